#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <random>

#include "neurogrow/morphometry.hpp"

using namespace neurogrow;

namespace {

void disk(Mask& m, Point c, double r) {
    for (int y = 0; y < m.ny(); ++y)
        for (int x = 0; x < m.nx(); ++x)
            if (std::hypot(x - c.x, y - c.y) <= r) m(x, y) = 1;
}

// Segment a-b thickened to a (2 half + 1)-wide band.
void line(Mask& m, Point a, Point b, int half = 1) {
    const double len = distance(a, b);
    const int n = int(std::ceil(len * 4)) + 1;
    for (int i = 0; i < n; ++i) {
        const double t = n == 1 ? 0.0 : double(i) / (n - 1);
        const int cx = int(std::lround(a.x + t * (b.x - a.x))), cy = int(std::lround(a.y + t * (b.y - a.y)));
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx)
                if (m.contains(cx + dx, cy + dy)) m(cx + dx, cy + dy) = 1;
    }
}

RealGrid to_field(const Mask& m) {
    RealGrid g(m.nx(), m.ny());
    for (std::size_t k = 0; k < m.size(); ++k) g[k] = m[k];
    return g;
}

Mask plus_shape(int n = 200) {
    Mask m(n, n);
    const Point c{n / 2.0, n / 2.0};
    disk(m, c, 15);
    for (int k = 0; k < 4; ++k) {
        const double a = k * std::numbers::pi / 2;
        line(m, c, {c.x + 75 * std::cos(a), c.y + 75 * std::sin(a)});
    }
    return m;
}

// Bellman-Ford relaxation to a fixed point: slow, but independent of the Dijkstra sweep.
RealGrid relax_distances(const Mask& m, Pixel src) {
    RealGrid d(m.nx(), m.ny(), kInf);
    d(src) = 0.0;
    for (bool changed = true; changed;) {
        changed = false;
        for (int y = 0; y < m.ny(); ++y)
            for (int x = 0; x < m.nx(); ++x) {
                if (!m(x, y)) continue;
                for (int k = 0; k < 8; ++k) {
                    const int nx = x + kNeighbor8Dx[k], ny = y + kNeighbor8Dy[k];
                    if (!m.contains(nx, ny) || !m(nx, ny)) continue;
                    const double c = k < 4 ? 1.0 : std::sqrt(2.0);
                    if (d(nx, ny) + c < d(x, y) - 1e-12) {
                        d(x, y) = d(nx, ny) + c;
                        changed = true;
                    }
                }
            }
    }
    return d;
}

// Component count by breadth-first flood fill.
int count_components(const Mask& m) {
    Mask seen(m.nx(), m.ny());
    int n = 0;
    for (int y = 0; y < m.ny(); ++y)
        for (int x = 0; x < m.nx(); ++x) {
            if (!m(x, y) || seen(x, y)) continue;
            ++n;
            std::queue<Pixel> q;
            q.push({x, y});
            seen(x, y) = 1;
            while (!q.empty()) {
                const Pixel p = q.front();
                q.pop();
                for (int k = 0; k < 8; ++k) {
                    const int a = p.x + kNeighbor8Dx[k], b = p.y + kNeighbor8Dy[k];
                    if (m.contains(a, b) && m(a, b) && !seen(a, b)) {
                        seen(a, b) = 1;
                        q.push({a, b});
                    }
                }
            }
        }
    return n;
}

double sum_by_generation(const TraceSet& ts, Generation g) {
    double s = 0.0;
    for (const auto& t : ts.traces)
        if (t.generation == g) s += t.l_neu;
    return s;
}

}  // namespace

TEST_CASE("connected components") {
    Mask two(80, 40);
    disk(two, {20, 20}, 8);
    disk(two, {60, 20}, 8);
    const auto lm = label_components(two);
    CHECK(lm.n_neu == 2);
    CHECK(lm.centroids[0].x == doctest::Approx(20.0));
    CHECK(lm.centroids[1].x == doctest::Approx(60.0));
    CHECK(lm.areas[0] == lm.areas[1]);

    CHECK(connected_components(RealGrid(30, 30, 0.0)).n_neu == 0);

    Mask seven(300, 300);
    for (int k = 0; k < 7; ++k) disk(seven, {30.0 + 40 * k, 40.0 + 30 * (k % 3)}, 12);
    CHECK(label_components(seven).n_neu == 7);

    // Diagonal contact joins components under 8-connectivity.
    Mask diag(4, 4);
    diag(0, 0) = diag(1, 1) = diag(2, 2) = 1;
    CHECK(label_components(diag).n_neu == 1);

    std::mt19937_64 rng(4);
    std::bernoulli_distribution coin(0.45);
    for (int t = 0; t < 20; ++t) {
        Mask r(40, 30);
        for (auto& v : r.data()) v = coin(rng);
        const auto l = label_components(r);
        CHECK(l.n_neu == count_components(r));
        for (std::size_t k = 0; k < r.size(); ++k) CHECK((l.labels[k] != 0) == (r[k] != 0));
    }

    RealGrid soft(10, 10, 0.49);
    soft(3, 3) = 0.5;
    CHECK(connected_components(soft).n_neu == 1);
}

TEST_CASE("geodesic distance") {
    Mask bar(101, 1, 1);
    const auto g = geodesic_distance(bar, {0, 0});
    CHECK(g.d(0, 0) == 0.0);
    CHECK(*std::max_element(g.d.data().begin(), g.d.data().end()) == doctest::Approx(100.0));

    Mask ell(60, 60);
    for (int x = 0; x <= 50; ++x) ell(x, 0) = 1;
    for (int y = 0; y <= 50; ++y) ell(50, y) = 1;
    const auto gl = geodesic_distance(ell, {0, 0});
    CHECK(std::abs(gl.d(50, 50) - 100.0) <= std::sqrt(2.0));

    CHECK_THROWS_AS(geodesic_distance(ell, {10, 10}), DomainError);
    CHECK_THROWS_AS(geodesic_distance(ell, {-1, 0}), DomainError);

    // Unreachable pixels stay infinite.
    Mask split(10, 3);
    split(0, 1) = split(1, 1) = split(5, 1) = 1;
    const auto gs = geodesic_distance(split, {0, 1});
    CHECK(std::isinf(gs.d(5, 1)));
    CHECK(std::isinf(gs.d(3, 1)));

    std::mt19937_64 rng(12);
    std::bernoulli_distribution coin(0.7);
    for (int t = 0; t < 10; ++t) {
        Mask r(30, 25);
        for (auto& v : r.data()) v = coin(rng);
        r(15, 12) = 1;
        const auto d = geodesic_distance(r, {15, 12}).d;
        const auto ref = relax_distances(r, {15, 12});
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (std::isinf(ref[k]))
                CHECK(std::isinf(d[k]));
            else
                CHECK(d[k] == doctest::Approx(ref[k]).epsilon(1e-12));
        }
    }

    // Multi-source distance is the pointwise minimum of single-source fields.
    Mask open(20, 20, 1);
    const auto multi = geodesic_distance(open, std::vector<Pixel>{{2, 2}, {17, 15}});
    const auto a = geodesic_distance(open, {2, 2}).d, b = geodesic_distance(open, {17, 15}).d;
    for (std::size_t k = 0; k < open.size(); ++k) CHECK(multi[k] == doctest::Approx(std::min(a[k], b[k])));
}

TEST_CASE("tracing: disk only") {
    Mask m(100, 100);
    disk(m, {50, 50}, 20);
    const auto ts = trace_neurites(m, {50, 50});
    CHECK(ts.traces.empty());
    CHECK(ts.l_total == 0.0);
    CHECK_THROWS_AS(trace_neurites(m, {2, 2}), DomainError);
}

TEST_CASE("tracing: disk plus straight arm of 80") {
    Mask m(180, 100);
    disk(m, {50, 50}, 20);
    line(m, {70, 50}, {150, 50});
    const auto ts = trace_neurites(m, {50, 50});
    REQUIRE(ts.traces.size() == 1);
    CHECK(ts.traces[0].generation == Generation::primary);
    CHECK(ts.l_total == doctest::Approx(80.0).epsilon(2.0 / 80.0));
    CHECK(ts.traces[0].tip().x >= 149);

    // Path is tip to root and strictly descending in d_geo.
    const auto& path = ts.traces[0].path;
    for (std::size_t i = 1; i < path.size(); ++i) CHECK(ts.d_geo(path[i]) < ts.d_geo(path[i - 1]));
    double lo = kInf, hi = -kInf;
    for (const auto& p : path) {
        lo = std::min(lo, ts.d_geo(p));
        hi = std::max(hi, ts.d_geo(p));
    }
    CHECK(ts.traces[0].l_neu == doctest::Approx(hi - lo));

    // Field overload thresholds at 0.5 and snaps the source to the mask.
    const auto tf = trace_neurites(to_field(m), Point{50.2, 49.7}, 20.0);
    CHECK(tf.l_total == doctest::Approx(ts.l_total));
}

TEST_CASE("tracing: Y-shaped arm") {
    Mask m(200, 200);
    const Point c{60, 100};
    disk(m, c, 20);
    const Point fork{120, 100};  // stem of 40 beyond the soma edge
    line(m, {80, 100}, fork);
    const double s = 30.0 / std::sqrt(2.0);
    line(m, fork, {fork.x + s, fork.y + s});
    line(m, fork, {fork.x + s, fork.y - s});
    const auto ts = trace_neurites(m, {60, 100});
    int primary = 0, secondary = 0;
    for (const auto& t : ts.traces) {
        primary += t.generation == Generation::primary;
        secondary += t.generation == Generation::secondary;
    }
    CHECK(primary == 1);
    CHECK(secondary == 1);
    CHECK(sum_by_generation(ts, Generation::primary) == doctest::Approx(70.0).epsilon(3.0 / 70.0));
    CHECK(sum_by_generation(ts, Generation::secondary) == doctest::Approx(30.0).epsilon(3.0 / 30.0));
    CHECK(ts.l_total == doctest::Approx(100.0).epsilon(6.0 / 100.0));

    // Traced paths never share pixels.
    Mask used(m.nx(), m.ny());
    for (const auto& t : ts.traces)
        for (const auto& p : t.path) {
            CHECK(!used(p));
            used(p) = 1;
        }
}

TEST_CASE("tracing: tertiary branch and additivity") {
    Mask m(240, 200);
    const Point c{50, 100};
    disk(m, c, 20);
    line(m, {70, 100}, {150, 100});
    line(m, {110, 100}, {110, 140});  // secondary off the primary
    line(m, {110, 125}, {130, 125});  // tertiary off the secondary
    const auto ts = trace_neurites(m, {50, 100});
    bool tertiary = false;
    for (const auto& t : ts.traces) tertiary |= t.generation == Generation::tertiary;
    CHECK(tertiary);

    TraceOptions one;
    one.generations = 1;
    CHECK(trace_neurites(m, {50, 100}, one).traces.size() == 1);

    // Duplicating a neuron doubles the total exactly.
    Mask twin(480, 200);
    for (int y = 0; y < 200; ++y)
        for (int x = 0; x < 240; ++x) twin(x, y) = twin(x + 240, y) = m(x, y);
    const auto lm = label_components(twin);
    REQUIRE(lm.n_neu == 2);
    double total = 0.0;
    total += trace_neurites(component_mask(lm, 1), {50, 100}).l_total;
    total += trace_neurites(component_mask(lm, 2), {290, 100}).l_total;
    CHECK(total == 2.0 * ts.l_total);
}

TEST_CASE("box convolution") {
    RealGrid ones(10, 10, 1.0);
    CHECK(box_convolve(ones, 3)(5, 5) == 9.0);
    CHECK(box_convolve(ones, 3)(0, 0) == 4.0);  // zero padding
    const auto z = box_convolve(RealGrid(10, 10, 0.0), 5);
    for (double v : z.data()) CHECK(v == 0.0);
    CHECK_THROWS_AS(box_convolve(ones, 0), DomainError);

    Mask bar(100, 30);
    line(bar, {20, 15}, {80, 15});
    const auto I = box_convolve(to_field(bar), 20);
    CHECK(I(81, 15) < I(50, 15));
    CHECK(I(19, 15) < I(50, 15));
    CHECK(I(50, 2) == 0.0);  // masked outside the cell
}

TEST_CASE("tip detection") {
    const auto plus = to_field(plus_shape());
    const auto tips = detect_tips(plus);
    CHECK(tips.n_tips() == 4);
    CHECK(tips.zeta_tip == 0.4);
    const auto I = box_convolve(plus, 20);
    const double imax = *std::max_element(I.data().begin(), I.data().end());
    for (const auto& t : tips.tips) {
        CHECK(t.area > 10);
        CHECK(plus(t.apex) >= 0.5);
        CHECK(I(t.apex) < 0.4 * imax);
        CHECK(distance(t.position, {100, 100}) > 40);
        CHECK(std::hypot(t.apex.x - 100, t.apex.y - 100) > 70);
    }

    Mask d(100, 100);
    disk(d, {50, 50}, 20);
    CHECK(detect_tips(to_field(d)).n_tips() == 0);
    CHECK(detect_tips(RealGrid(20, 20, 0.0)).n_tips() == 0);

    // Raising zeta grows every candidate region, so the retained tip area never
    // shrinks. The count itself is not monotone once regions merge.
    Mask y(200, 200);
    disk(y, {60, 100}, 20);
    line(y, {80, 100}, {120, 100});
    line(y, {120, 100}, {141, 121});
    line(y, {120, 100}, {141, 79});
    for (const auto& field : {plus, to_field(y)}) {
        int prev = 0;
        for (double z = 0.05; z <= 0.9001; z += 0.05) {
            TipOptions o;
            o.zeta_tip = z;
            int area = 0;
            for (const auto& t : detect_tips(field, o).tips) area += t.area;
            CHECK(area >= prev);
            prev = area;
        }
    }
    TipOptions merged;
    merged.zeta_tip = 0.6;
    CHECK(detect_tips(plus, merged).n_tips() < tips.n_tips());
}

TEST_CASE("tips agree with traces") {
    const auto m = plus_shape();
    const auto ts = trace_neurites(m, {100, 100});
    const auto tips = detect_tips(to_field(m));
    for (const auto& t : ts.traces) {
        if (t.generation != Generation::primary) continue;
        double best = kInf;
        for (const auto& tip : tips.tips)
            best = std::min(best, distance({double(t.tip().x), double(t.tip().y)},
                                           {double(tip.apex.x), double(tip.apex.y)}));
        CHECK(best <= 2.0);
    }
}

TEST_CASE("tip detection treats neurons separately") {
    // Two plus shapes 6 pixels apart: the box window straddles both.
    const auto a = plus_shape(200);
    Mask both(406, 200), left(406, 200), right(406, 200);
    for (int y = 0; y < 200; ++y)
        for (int x = 0; x < 200; ++x) {
            both(x, y) = left(x, y) = a(x, y);
            both(x + 206, y) = right(x + 206, y) = a(x, y);
        }
    const auto all = detect_tips(to_field(both));
    auto l = detect_tips(to_field(left)).tips, r = detect_tips(to_field(right)).tips;
    l.insert(l.end(), r.begin(), r.end());
    REQUIRE(all.n_tips() == int(l.size()));
    for (std::size_t i = 0; i < l.size(); ++i) {
        CHECK(all.tips[i].apex == l[i].apex);
        CHECK(all.tips[i].position == l[i].position);
        CHECK(all.tips[i].area == l[i].area);
    }
}

TEST_CASE("tortuosity") {
    NeuriteTrace straight;
    for (int x = 40; x >= 0; --x) straight.path.push_back({x, 3});
    straight.l_neu = 40;
    CHECK(tortuosity(straight) == doctest::Approx(1.0).epsilon(0.05));

    // Right angle with arms 30 and 40, length from the geodesic field.
    Mask ell(50, 50);
    for (int x = 0; x <= 30; ++x) ell(x, 0) = 1;
    for (int y = 0; y <= 40; ++y) ell(30, y) = 1;
    const auto d = geodesic_distance(ell, {0, 0}).d;
    NeuriteTrace bent;
    for (int y = 40; y >= 0; --y) bent.path.push_back({30, y});
    for (int x = 29; x >= 0; --x) bent.path.push_back({x, 0});
    bent.l_neu = d(30, 40) - d(0, 0);
    CHECK(tortuosity(bent) == doctest::Approx(1.4).epsilon(0.05 / 1.4));

    NeuriteTrace loop;
    loop.path = {{3, 3}, {4, 4}, {3, 3}};
    loop.l_neu = 2.8;
    CHECK_THROWS_AS(tortuosity(loop), DomainError);
    NeuriteTrace single;
    single.path = {{1, 1}};
    CHECK_THROWS_AS(tortuosity(single), DomainError);

    // Every trace of a real tracing is at least as long as its chord.
    Mask m(200, 200);
    disk(m, {60, 100}, 20);
    line(m, {80, 100}, {120, 100});
    line(m, {120, 100}, {140, 130});
    line(m, {140, 130}, {170, 120});
    for (const auto& t : trace_neurites(m, {60, 100}).traces) CHECK(tortuosity(t) >= 1.0 - 1e-9);
}

TEST_CASE("turning angles") {
    std::vector<Point> straight;
    for (int i = 0; i <= 50; ++i) straight.push_back({double(i), 0.5 * i});
    for (double a : turning_angles(straight, 5.0)) CHECK(std::abs(a) <= 1.0);
    CHECK(!turning_angles(straight, 5.0).empty());

    const std::vector<Point> corner{{0, 0}, {20, 0}, {20, 20}};
    const auto c = turning_angles(corner, 5.0);
    int right = 0;
    for (double a : c) {
        if (std::abs(a - 90.0) <= 2.0) ++right;
        else CHECK(a <= 1.0);
    }
    CHECK(right == 1);

    const double R = 40.0, kappa = 1.0 / R, s = 4.0;
    std::vector<Point> arc;
    for (int i = 0; i <= 400; ++i) {
        const double t = i * 0.005;
        arc.push_back({R * std::cos(t), R * std::sin(t)});
    }
    const auto aa = turning_angles(arc, s);
    REQUIRE(!aa.empty());
    for (double a : aa) CHECK(a == doctest::Approx(s * kappa * 180.0 / std::numbers::pi).epsilon(0.02));

    CHECK(turning_angles(std::vector<Point>{{0, 0}, {7, 0}}, 5.0).empty());
}

TEST_CASE("feature summary") {
    const auto m = plus_shape();
    TraceOptions o;
    o.zeta_soma = 15;
    const auto ts = trace_neurites(m, {100, 100}, o);
    const auto tips = detect_tips(to_field(m));
    const auto f = measure_features(ts, tips);
    CHECK(f.l_total == ts.l_total);
    CHECK(f.n_e == tips.n_tips());
    CHECK(f.l_seg == doctest::Approx(f.l_total / tips.n_tips()));
    CHECK(f.tortuosity.size() == ts.traces.size());
    for (double t : f.tortuosity) CHECK(t >= 1.0 - 1e-9);
    CHECK(f.l_total == doctest::Approx(4 * 60.0).epsilon(0.05));
}
