#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "neurogrow/phase_field.hpp"
#include "neurogrow/spline.hpp"

using namespace neurogrow;

namespace {

using Fn = std::function<double(double, double)>;

struct Setup {
    SplineSpace2D space;
    CollocationOperators ops;
    explicit Setup(int n) : space(SplineSpace2D::unit_mesh(n, n)), ops(CollocationOperators::assemble(space)) {}

    std::vector<double> sample(const Fn& f) const {
        std::vector<double> v(space.size());
        for (int j = 0; j < space.nv(); ++j)
            for (int i = 0; i < space.nu(); ++i) v[i + j * space.nu()] = f(space.greville_u[i], space.greville_v[j]);
        return v;
    }

    SimState state(const Fn& phi, const Fn& c, const Fn& t, const Fn& theta, const Fn& phi0) const {
        SimState s;
        s.nu = space.nu();
        s.nv = space.nv();
        s.phi = Field::from_values(ops, sample(phi));
        s.tubulin = Field::from_values(ops, sample(c));
        s.temperature = Field::from_values(ops, sample(t));
        s.theta = Field::from_values(ops, sample(theta));
        s.phi0 = Field::from_values(ops, sample(phi0));
        s.refresh_static(ops);
        s.source_norm = integrate_gradient_squared(space, s.phi0.coeffs);
        return s;
    }
};

// Smooth radial profile centred in the 64 x 64 test domain.
double profile(double x, double y, double w = 6.0) {
    const double r = std::hypot(x - 30.5, y - 30.5);
    return 0.5 * (1.0 + std::tanh((18.0 - r) / w));
}
double disk(double x, double y) { return profile(x, y); }
double zero(double, double) { return 0.0; }

// Central differences of an analytic function with step h.
struct Fd {
    Fn f;
    double h = 1e-3;
    double dx(double x, double y) const { return (f(x + h, y) - f(x - h, y)) / (2 * h); }
    double dy(double x, double y) const { return (f(x, y + h) - f(x, y - h)) / (2 * h); }
    double lap(double x, double y) const {
        return (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * f(x, y)) / (h * h);
    }
};

// Relative 2-norm over points at least `skip` from the edge.
double rel_error(const Setup& s, const std::vector<double>& got, const Fn& ref, int skip = 4) {
    double num = 0.0, den = 0.0;
    for (int j = skip; j < s.space.nv() - skip; ++j)
        for (int i = skip; i < s.space.nu() - skip; ++i) {
            const double r = ref(s.space.greville_u[i], s.space.greville_v[j]);
            const double g = got[i + j * s.space.nu()];
            num += (g - r) * (g - r);
            den += r * r;
        }
    return std::sqrt(num / den);
}

ModelParams isotropic() {
    ModelParams p;
    p.anisotropy_strength = 0.0;
    p.orientation_coeff = 0.0;
    return p;
}

}  // namespace

TEST_CASE("initial state") {
    ModelParams p;
    p.seed_interface_width = 0.0;
    const Setup su(60);
    const Point c{29.5, 29.5};
    const auto s = initialize_state({c}, p, su.space, su.ops, 42);
    for (int j = 0; j < s.nv; ++j)
        for (int i = 0; i < s.nu; ++i) {
            const double r = distance(su.space.point(i, j), c);
            const std::size_t k = i + std::size_t(j) * s.nu;
            CHECK(s.phi.values[k] == (r <= 20.0 ? 1.0 : 0.0));
            CHECK(s.tubulin.values[k] == doctest::Approx(0.5 * (1 + std::tanh((20.0 - r) / 2))).epsilon(1e-12));
            CHECK(s.theta.values[k] >= 0.0);
            CHECK(s.theta.values[k] <= 1.0);
        }
    CHECK(s.phi0.values == s.phi.values);
    CHECK(s.source_norm > 0.0);

    // Tubulin profile at r = r0 and at the centre.
    const Setup sq(61);
    const auto t = initialize_state({{30.0, 30.0}}, p, sq.space, sq.ops, 1);
    CHECK(t.tubulin.values[30 + 31 * 61] == doctest::Approx(0.5 * (1 + std::tanh(9.5))));
    CHECK(t.tubulin.values[31 + 31 * 61] == doctest::Approx(0.5 * (1 + std::tanh(10.0))));
    CHECK(0.5 * (1 + std::tanh(0.0)) == 0.5);

    const auto again = initialize_state({c}, p, su.space, su.ops, 42);
    CHECK(again.theta.values == s.theta.values);
    const auto other = initialize_state({c}, p, su.space, su.ops, 43);
    CHECK(other.theta.values != s.theta.values);

    CHECK_THROWS_AS(initialize_state({{15.0, 30.0}}, p, su.space, su.ops, 1), ConfigError);
    CHECK_THROWS_AS(initialize_state({}, p, su.space, su.ops, 1), ConfigError);
}

TEST_CASE("anisotropy function") {
    ModelParams p;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0), t(0.0, 1.0);
    std::vector<double> gx(200), gy(200), th(200);
    for (int k = 0; k < 200; ++k) {
        gx[k] = u(rng);
        gy[k] = u(rng);
        th[k] = t(rng);
    }
    const auto v = anisotropy(gx, gy, th, p);
    const double h = 1e-4;
    for (int k = 0; k < 200; ++k) {
        const double psi = std::atan2(gy[k], gx[k]);
        auto a = [&](double ps) {
            return 1.0 + p.anisotropy_strength * std::cos(p.anisotropy_mode * (ps - 2 * std::numbers::pi * th[k]));
        };
        CHECK(v.a[k] == doctest::Approx(a(psi)).epsilon(1e-14));
        CHECK(std::abs((a(psi + h) - a(psi - h)) / (2 * h) - v.da[k]) < 1e-6);
    }

    // Psi aligned with the orientation gives the maximum.
    const double th0 = 0.1;
    const double psi0 = 2 * std::numbers::pi * th0;
    const std::vector<double> ax{std::cos(psi0)}, ay{std::sin(psi0)}, at{th0};
    CHECK(anisotropy(ax, ay, at, p).a[0] == doctest::Approx(1.0 + p.anisotropy_strength));

    auto iso = p;
    iso.anisotropy_strength = 0.0;
    const auto vi = anisotropy(gx, gy, th, iso);
    for (int k = 0; k < 200; ++k) {
        CHECK(vi.a[k] == 1.0);
        CHECK(vi.da[k] == 0.0);
    }
    // Zero gradient takes psi = 0.
    const std::vector<double> z{0.0}, zt{0.3};
    CHECK(anisotropy(z, z, zt, p).a[0] ==
          doctest::Approx(1.0 + p.anisotropy_strength * std::cos(-p.anisotropy_mode * 0.3 * 2 * std::numbers::pi)));
}

TEST_CASE("tubulin consumption and gate") {
    ModelParams p;
    auto ctl = ControlFields::defaults(3, p);
    ctl.assembly_rate[2] = 50.0;
    ctl.disassembly_rate[2] = 0.0;
    const std::vector<double> c{0.5, 0.0, 0.2};
    const auto r = tubulin_consumption(c, ctl);
    CHECK(r[0] == doctest::Approx(2.4));
    CHECK(r[1] == doctest::Approx(-0.1));
    CHECK(r[2] == doctest::Approx(10.0));

    // Raising r_g never closes an open gate.
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
        auto a = ControlFields::defaults(1, p), b = a;
        a.assembly_rate[0] = 60 * u(rng);
        b.assembly_rate[0] = a.assembly_rate[0] + 10 * u(rng);
        a.disassembly_rate[0] = b.disassembly_rate[0] = 0.2 * u(rng);
        const std::vector<double> cc{u(rng)};
        const bool open_a = tubulin_consumption(cc, a)[0] > 0, open_b = tubulin_consumption(cc, b)[0] > 0;
        CHECK((!open_a || open_b));
    }
}

TEST_CASE("energy term") {
    ModelParams p;
    const Setup su(8);
    auto s = su.state([](double, double) { return 1.0; }, [](double, double) { return 1.0; },
                      [](double, double) { return 0.7; }, zero, disk);
    auto ctl = ControlFields::defaults(s.size(), p);
    auto e = energy_term(s, ctl, p);
    for (double v : e) CHECK(v == 0.0);  // mask off

    std::fill(ctl.energy_mask.begin(), ctl.energy_mask.end(), 1);
    e = energy_term(s, ctl, p);
    for (double v : e) CHECK(v == doctest::Approx(0.2865 * std::atan(3.0)).epsilon(1e-9));
    CHECK(0.2865 * std::atan(3.0) == doctest::Approx(0.3576).epsilon(1e-3));

    // Closed gate.
    auto closed = su.state([](double, double) { return 1.0; }, zero, [](double, double) { return 0.7; }, zero, disk);
    for (double v : energy_term(closed, ctl, p)) CHECK(v == 0.0);

    // Arctangent bound for arbitrary temperatures.
    auto wild = su.state([](double, double) { return 1.0; }, [](double, double) { return 1.0; },
                         [](double x, double y) { return 1e3 * std::sin(x * y); }, zero, disk);
    for (double v : energy_term(wild, ctl, p)) CHECK(std::abs(v) < p.alpha_over_pi * std::numbers::pi / 2);
}

TEST_CASE("phase rhs: trivial states") {
    ModelParams p;
    const Setup su(12);
    const auto ctl = ControlFields::defaults(su.space.size(), p);
    auto one = su.state([](double, double) { return 1.0; }, zero, zero, zero, disk);
    for (double v : phase_rhs(one, ctl, su.ops, p)) CHECK(std::abs(v) < 1e-9);
    auto nil = su.state(zero, zero, zero, zero, disk);
    for (double v : phase_rhs(nil, ctl, su.ops, p)) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("phase rhs matches a dense finite-difference oracle (isotropic)") {
    const auto p = isotropic();
    const Setup su(64);
    const Fn phi = [](double x, double y) { return profile(x, y); };
    const auto s = su.state(phi, zero, zero, zero, phi);
    const auto ctl = ControlFields::defaults(s.size(), p);
    const auto got = phase_rhs(s, ctl, su.ops, p);

    // Same continuous field: differences of the spline surface itself.
    const Fn spline_phi = [&](double x, double y) { return evaluate(su.space, s.phi.coeffs, {x, y}).value; };
    const Fd fs{spline_phi, 1e-3};
    const Fn ref_spline = [&](double x, double y) {
        const double f = spline_phi(x, y);
        return p.mobility * (fs.lap(x, y) + f * (1 - f) * (f - 0.5));
    };
    const double e_spline = rel_error(su, got, ref_spline);
    MESSAGE("phase rhs vs FD on the spline surface: ", e_spline);
    CHECK(e_spline < 1e-4);

    // Exact rhs of the analytic field: the gap is the collocation discretization error.
    const Fd fa{phi, 1e-3};
    const Fn ref_grid = [&](double x, double y) {
        const double f = phi(x, y);
        return p.mobility * (fa.lap(x, y) + f * (1 - f) * (f - 0.5));
    };
    const double e_grid = rel_error(su, got, ref_grid);
    MESSAGE("phase rhs vs FD of the analytic field: ", e_grid);
    CHECK(e_grid < 1e-2);
}

TEST_CASE("anisotropic phase rhs matches the divergence form by finite differences") {
    ModelParams p;
    p.anisotropy_strength = 0.02;
    p.orientation_coeff = 0.0;
    const Setup su(64);
    const Fn phi = [](double x, double y) { return profile(x, y, 5.0); };
    const double th = 0.13;
    const auto s = su.state(phi, zero, zero, [&](double, double) { return th; }, phi);
    const auto ctl = ControlFields::defaults(s.size(), p);
    const auto got = phase_rhs(s, ctl, su.ops, p);

    // Fluxes q = a^2 grad phi + a a' (-phi_y, phi_x) evaluated on the spline surface,
    // divergence by central differences.
    const Fn f = [&](double x, double y) { return evaluate(su.space, s.phi.coeffs, {x, y}).value; };
    auto flux = [&](double x, double y) {
        const auto e = evaluate(su.space, s.phi.coeffs, {x, y});
        const double psi = std::atan2(e.dy, e.dx);
        const double arg = p.anisotropy_mode * (psi - 2 * std::numbers::pi * th);
        const double a = 1 + p.anisotropy_strength * std::cos(arg);
        const double da = -p.anisotropy_strength * p.anisotropy_mode * std::sin(arg);
        return std::pair{a * a * e.dx - a * da * e.dy, a * a * e.dy + a * da * e.dx};
    };
    const double h = 1e-3;
    const Fn ref = [&](double x, double y) {
        const double div =
            (flux(x + h, y).first - flux(x - h, y).first + flux(x, y + h).second - flux(x, y - h).second) / (2 * h);
        const double v = f(x, y);
        return p.mobility * (div + v * (1 - v) * (v - 0.5));
    };
    const double e = rel_error(su, got, ref);
    MESSAGE("anisotropic phase rhs vs FD divergence: ", e);
    CHECK(e < 1e-4);
}

TEST_CASE("tubulin rhs matches a dense finite-difference oracle") {
    const auto p = isotropic();
    const Setup su(64);
    const Fn phi = [](double x, double y) { return profile(x, y); };
    const Fn c = [](double x, double y) { return 0.5 + 0.3 * std::sin(x / 9.0) * std::cos(y / 7.0); };
    const auto s = su.state(phi, c, zero, zero, phi);
    const auto got = tubulin_rhs(s, su.ops, p);

    const Fn sp = [&](double x, double y) { return evaluate(su.space, s.phi.coeffs, {x, y}).value; };
    const Fn sc = [&](double x, double y) { return evaluate(su.space, s.tubulin.coeffs, {x, y}).value; };
    const Fn su_ = [&](double x, double y) { return sp(x, y) * sc(x, y); };
    const Fd fp{sp, 1e-3}, fc{sc, 1e-3}, fu{su_, 1e-3};
    const double h = 1e-3;
    const Fn ref = [&](double x, double y) {
        // Conservative flux differences for div(phi grad c).
        auto fx = [&](double xx, double yy) { return sp(xx, yy) * fc.dx(xx, yy); };
        auto fy = [&](double xx, double yy) { return sp(xx, yy) * fc.dy(xx, yy); };
        const double div = (fx(x + h, y) - fx(x - h, y) + fy(x, y + h) - fy(x, y - h)) / (2 * h);
        const double gx = fp.dx(x, y), gy = fp.dy(x, y), g = std::hypot(gx, gy);
        const double transport = g > 1e-8 ? -(gx * fu.dx(x, y) + gy * fu.dy(x, y)) / g : 0.0;
        const double src = p.tubulin_production * (gx * gx + gy * gy) / s.source_norm;
        return p.tubulin_diffusion * div - p.tubulin_transport * transport - p.tubulin_decay * sp(x, y) * sc(x, y) + src;
    };
    const double e = rel_error(su, got, ref);
    MESSAGE("tubulin rhs vs FD: ", e);
    CHECK(e < 1e-4);

    // phi = 0: production only.
    const auto bare = su.state(zero, c, zero, zero, phi);
    const auto r0 = tubulin_rhs(bare, su.ops, p);
    for (std::size_t k = 0; k < r0.size(); ++k)
        CHECK(r0[k] == doctest::Approx(p.tubulin_production * bare.source_density[k] / bare.source_norm).epsilon(1e-9));

    // Uniform c inside a uniform phi = 1 body: no diffusion.
    auto flat = p;
    flat.tubulin_decay = 0.0;
    flat.tubulin_transport = 0.0;
    flat.tubulin_production = 0.0;
    const auto u = su.state([](double, double) { return 1.0; }, [](double, double) { return 0.6; }, zero, zero, phi);
    for (double v : tubulin_rhs(u, su.ops, flat)) CHECK(std::abs(v) < 1e-8);
}

TEST_CASE("production integrates to epsilon_0") {
    ModelParams p;
    const Setup su(60);
    const auto s = initialize_state({{29.5, 29.5}}, p, su.space, su.ops, 1);
    // Independent midpoint rule, 8 x 8 samples per unit cell.
    const double L = su.space.ku.back();
    const int m = int(L) * 8;
    const double h = L / m;
    double integral = 0.0;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            const auto e = evaluate(su.space, s.phi0.coeffs, {(i + 0.5) * h, (j + 0.5) * h});
            integral += (e.dx * e.dx + e.dy * e.dy) * h * h;
        }
    const double total = p.tubulin_production * integral / s.source_norm;
    CHECK(total == doctest::Approx(15.0).epsilon(0.01));
}

TEST_CASE("temperature rhs") {
    ModelParams p;
    const Setup su(64);
    const Fn t = [](double x, double y) { return x * x; };
    const auto s = su.state(zero, zero, t, zero, disk);
    const std::vector<double> rate(s.size(), 0.0);
    const auto r = temperature_rhs(s, su.ops, rate, p);
    for (int j = 1; j < s.nv - 1; ++j)
        for (int i = 1; i < s.nu - 1; ++i) CHECK(r[i + j * s.nu] == doctest::Approx(2.0).epsilon(1e-6));

    const auto c = su.state(zero, zero, [](double, double) { return 0.4; }, zero, disk);
    std::vector<double> rate2(s.size(), 0.1);
    for (double v : temperature_rhs(c, su.ops, rate, p)) CHECK(std::abs(v) < 1e-9);
    for (double v : temperature_rhs(c, su.ops, rate2, p)) CHECK(v == doctest::Approx(0.2));

    // Dense FD Laplacian of the spline surface, and of the analytic field.
    const Fn ts = [](double x, double y) { return 0.3 * std::sin(x / 6.0) * std::cos(y / 8.0); };
    const auto w = su.state(zero, zero, ts, zero, disk);
    std::vector<double> rate3(w.size());
    for (std::size_t k = 0; k < rate3.size(); ++k) rate3[k] = 0.05 * std::sin(0.1 * double(k));
    const auto got = temperature_rhs(w, su.ops, rate3, p);
    auto ref_of = [&](const Fn& f) {
        const Fd fd{f, 1e-3};
        std::vector<double> ref(w.size());
        for (int j = 1; j < w.nv - 1; ++j)
            for (int i = 1; i < w.nu - 1; ++i) {
                const int k = i + j * w.nu;
                ref[k] = fd.lap(su.space.greville_u[i], su.space.greville_v[j]) + p.latent_heat * rate3[k];
            }
        return ref;
    };
    auto rel = [&](const std::vector<double>& ref) {
        double num = 0, den = 0;
        for (int j = 4; j < w.nv - 4; ++j)
            for (int i = 4; i < w.nu - 4; ++i) {
                const int k = i + j * w.nu;
                num += (got[k] - ref[k]) * (got[k] - ref[k]);
                den += ref[k] * ref[k];
            }
        return std::sqrt(num / den);
    };
    const double e_spline =
        rel(ref_of([&](double x, double y) { return evaluate(su.space, w.temperature.coeffs, {x, y}).value; }));
    const double e_exact = rel(ref_of(ts));
    MESSAGE("temperature rhs vs FD: spline surface ", e_spline, ", analytic ", e_exact);
    CHECK(e_spline < 1e-4);
    CHECK(e_exact < 1e-2);
}

TEST_CASE("step") {
    ModelParams p;
    p.tubulin_decay = 0.0;
    const Setup su(20);
    // phi = 1, uniform c and T, flat phi0: every rate vanishes.
    auto s = su.state([](double, double) { return 1.0; }, [](double, double) { return 0.4; },
                      [](double, double) { return 0.2; }, zero, [](double, double) { return 1.0; });
    s.source_norm = 1.0;
    const auto ctl = ControlFields::defaults(s.size(), p);
    const auto n = step(s, ctl, su.ops, p);
    for (std::size_t k = 0; k < s.size(); ++k) {
        CHECK(n.phi.values[k] == doctest::Approx(s.phi.values[k]).epsilon(1e-12));
        CHECK(n.tubulin.values[k] == doctest::Approx(s.tubulin.values[k]).epsilon(1e-12));
        CHECK(n.temperature.values[k] == doctest::Approx(s.temperature.values[k]).epsilon(1e-12));
    }
    CHECK(n.iteration == 1);

    // Euler bound on the first step from initialization.
    ModelParams q;
    const Setup sg(60);
    const auto s0 = initialize_state({{29.5, 29.5}}, q, sg.space, sg.ops, 3);
    const auto c0 = ControlFields::defaults(s0.size(), q);
    const auto rhs = phase_rhs(s0, c0, sg.ops, q);
    double max_rhs = 0.0, max_d = 0.0;
    for (double v : rhs) max_rhs = std::max(max_rhs, std::abs(v));
    const auto s1 = step(s0, c0, sg.ops, q);
    for (std::size_t k = 0; k < s0.size(); ++k) max_d = std::max(max_d, std::abs(s1.phi.values[k] - s0.phi.values[k]));
    CHECK(max_d <= q.effective_dt() * max_rhs * (1 + 1e-12));
    CHECK(s1.time == doctest::Approx(q.effective_dt()));

    // Determinism and the phi band over 500 steps.
    auto a = s0, b = s0;
    for (int i = 0; i < 500; ++i) {
        a = step(a, c0, sg.ops, q);
        b = step(b, c0, sg.ops, q);
        const auto [lo, hi] = std::minmax_element(a.phi.values.begin(), a.phi.values.end());
        REQUIRE(*lo >= kPhiLower);
        REQUIRE(*hi <= kPhiUpper);
        REQUIRE(*std::min_element(a.tubulin.values.begin(), a.tubulin.values.end()) >= -1e-6);
    }
    CHECK(a.phi.values == b.phi.values);
    CHECK(a.phi0.values == s0.phi0.values);
}

TEST_CASE("instability is reported") {
    ModelParams p;
    const Setup su(60);
    const auto s0 = initialize_state({{29.5, 29.5}}, p, su.space, su.ops, 3);
    const auto ctl = ControlFields::defaults(s0.size(), p);
    // Far beyond the explicit stability limit.
    auto s = s0;
    CHECK_THROWS_AS(
        [&] {
            for (int i = 0; i < 50; ++i) s = step(s, ctl, su.ops, p, 0.5);
        }(),
        NumericalInstability);
}
