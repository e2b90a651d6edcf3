#include "neurogrow/morphometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include "neurogrow/kernels.hpp"

namespace neurogrow {

namespace {

constexpr double kDiag = std::numbers::sqrt2;

double step_cost(int k) { return k < 4 ? 1.0 : kDiag; }

void run_dijkstra(const Mask& mask, RealGrid& d,
                  std::priority_queue<std::pair<double, std::size_t>, std::vector<std::pair<double, std::size_t>>,
                                      std::greater<>>& pq) {
    while (!pq.empty()) {
        const auto [dist, idx] = pq.top();
        pq.pop();
        if (dist > d[idx]) continue;
        const Pixel p = d.pixel(idx);
        for (int k = 0; k < 8; ++k) {
            const int x = p.x + kNeighbor8Dx[k], y = p.y + kNeighbor8Dy[k];
            if (!mask.contains(x, y) || !mask(x, y)) continue;
            const double nd = dist + step_cost(k);
            const std::size_t ni = d.index(x, y);
            if (nd < d[ni]) {
                d[ni] = nd;
                pq.emplace(nd, ni);
            }
        }
    }
}

}  // namespace

LabelMap label_components(const Mask& mask) {
    LabelMap lm;
    lm.labels = LabelGrid(mask.nx(), mask.ny(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || lm.labels[start]) continue;
        const int label = ++lm.n_neu;
        double sx = 0, sy = 0;
        int area = 0;
        lm.labels[start] = label;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            const Pixel p = mask.pixel(idx);
            sx += p.x;
            sy += p.y;
            ++area;
            for (int k = 0; k < 8; ++k) {
                const int x = p.x + kNeighbor8Dx[k], y = p.y + kNeighbor8Dy[k];
                if (!mask.contains(x, y) || !mask(x, y) || lm.labels(x, y)) continue;
                lm.labels(x, y) = label;
                stack.push_back(mask.index(x, y));
            }
        }
        lm.centroids.push_back({sx / area, sy / area});
        lm.areas.push_back(area);
    }
    return lm;
}

Mask threshold_mask(const RealGrid& phi, double threshold) {
    Mask m(phi.nx(), phi.ny(), 0);
    for (std::size_t k = 0; k < phi.size(); ++k) m[k] = phi[k] >= threshold ? 1 : 0;
    return m;
}

LabelMap connected_components(const RealGrid& phi, double threshold) {
    return label_components(threshold_mask(phi, threshold));
}

Mask component_mask(const LabelMap& lm, int label) {
    Mask m(lm.labels.nx(), lm.labels.ny(), 0);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = lm.labels[k] == label ? 1 : 0;
    return m;
}

GeodesicField geodesic_distance(const Mask& mask, Pixel source) {
    if (!mask.contains(source) || !mask(source)) throw DomainError("geodesic source lies outside the mask");
    return {geodesic_distance(mask, std::vector<Pixel>{source}), source};
}

RealGrid geodesic_distance(const Mask& mask, const std::vector<Pixel>& sources) {
    RealGrid d(mask.nx(), mask.ny(), kInf);
    std::priority_queue<std::pair<double, std::size_t>, std::vector<std::pair<double, std::size_t>>, std::greater<>>
        pq;
    for (const Pixel& s : sources) {
        if (!mask.contains(s) || !mask(s)) continue;
        d(s) = 0.0;
        pq.emplace(0.0, d.index(s.x, s.y));
    }
    run_dijkstra(mask, d, pq);
    return d;
}

Pixel nearest_mask_pixel(const Mask& mask, Point p) {
    double best = kInf;
    Pixel out{-1, -1};
    for (int y = 0; y < mask.ny(); ++y) {
        for (int x = 0; x < mask.nx(); ++x) {
            if (!mask(x, y)) continue;
            const double dd = (x - p.x) * (x - p.x) + (y - p.y) * (y - p.y);
            if (dd < best) {
                best = dd;
                out = {x, y};
            }
        }
    }
    if (out.x < 0) throw DomainError("empty mask has no nearest pixel");
    return out;
}

namespace {

Mask reachable_component(const Mask& mask, Pixel seed) {
    Mask out(mask.nx(), mask.ny(), 0);
    std::vector<Pixel> stack{seed};
    out(seed) = 1;
    while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (int k = 0; k < 8; ++k) {
            const int x = p.x + kNeighbor8Dx[k], y = p.y + kNeighbor8Dy[k];
            if (!mask.contains(x, y) || !mask(x, y) || out(x, y)) continue;
            out(x, y) = 1;
            stack.push_back({x, y});
        }
    }
    return out;
}

// Walks downhill in d from `start`, staying on pixels carrying `label`.
std::vector<Pixel> descend(const RealGrid& d, const LabelGrid& labels, int label, Pixel start, Pixel p_initial) {
    std::vector<Pixel> path{start};
    Pixel cur = start;
    for (;;) {
        Pixel best{-1, -1};
        double best_d = d(cur);
        double best_r = kInf;
        for (int k = 0; k < 8; ++k) {
            const int x = cur.x + kNeighbor8Dx[k], y = cur.y + kNeighbor8Dy[k];
            if (!labels.contains(x, y) || labels(x, y) != label) continue;
            const double nd = d(x, y);
            if (!(nd < d(cur))) continue;
            const double r = std::hypot(double(x - p_initial.x), double(y - p_initial.y));
            bool better = best.x < 0 || nd < best_d;
            if (!better && nd == best_d)
                better = r < best_r || (r == best_r && labels.index(x, y) < labels.index(best.x, best.y));
            if (better) {
                best = {x, y};
                best_d = nd;
                best_r = r;
            }
        }
        if (best.x < 0) break;
        path.push_back(best);
        cur = best;
    }
    return path;
}

}  // namespace

TraceSet trace_neurites(const Mask& neuron, Pixel p_initial, const TraceOptions& opts) {
    if (!neuron.contains(p_initial) || !neuron(p_initial)) throw DomainError("P_initial lies outside the neuron mask");
    TraceSet out;
    out.p_initial = p_initial;
    const Mask comp = reachable_component(neuron, p_initial);
    out.d_geo = geodesic_distance(comp, p_initial).d;

    Mask work(comp.nx(), comp.ny(), 0);
    std::vector<Pixel> sources;
    for (std::size_t k = 0; k < comp.size(); ++k) {
        if (!comp[k]) continue;
        if (out.d_geo[k] <= opts.zeta_soma)
            sources.push_back(comp.pixel(k));
        else
            work[k] = 1;
    }

    RealGrid d = out.d_geo;
    for (int gen = 1; gen <= opts.generations; ++gen) {
        if (gen > 1) d = geodesic_distance(comp, sources);
        const LabelMap parts = label_components(work);
        bool any = false;
        for (int label = 1; label <= parts.n_neu; ++label) {
            double dmax = -1.0;
            Pixel start{-1, -1};
            for (std::size_t k = 0; k < work.size(); ++k) {
                if (parts.labels[k] == label && std::isfinite(d[k]) && d[k] > dmax) {
                    dmax = d[k];
                    start = work.pixel(k);
                }
            }
            if (start.x < 0) continue;
            auto path = descend(d, parts.labels, label, start, p_initial);
            const double l = d(path.front()) - d(path.back());
            if (l >= opts.min_length) {
                for (const Pixel& p : path) {
                    work(p) = 0;
                    sources.push_back(p);
                }
                out.traces.push_back({std::move(path), Generation(gen), l});
                out.l_total += l;
                any = true;
            } else {
                for (std::size_t k = 0; k < work.size(); ++k)
                    if (parts.labels[k] == label) work[k] = 0;
            }
        }
        if (!any) break;
    }
    return out;
}

TraceSet trace_neurites(const RealGrid& phi, Point p_initial, double zeta_soma) {
    const Mask m = threshold_mask(phi);
    TraceOptions opts;
    opts.zeta_soma = zeta_soma;
    return trace_neurites(m, nearest_mask_pixel(m, p_initial), opts);
}

RealGrid box_convolve(const RealGrid& phi, int l_kl) {
    if (l_kl < 1) throw DomainError("kernel size must be at least 1");
    RealGrid out;
    kernels::box_sum(phi, l_kl, out);
    for (std::size_t k = 0; k < out.size(); ++k)
        if (phi[k] < 0.5) out[k] = 0.0;
    return out;
}

TipSet detect_tips_from_intensity(const RealGrid& phi, const RealGrid& intensity, const TipOptions& opts) {
    TipSet out;
    out.zeta_tip = opts.zeta_tip;
    const double imax = *std::max_element(intensity.data().begin(), intensity.data().end());
    if (!(imax > 0.0)) return out;
    const double cut = opts.zeta_tip * imax;
    Mask cand(phi.nx(), phi.ny(), 0);
    for (std::size_t k = 0; k < phi.size(); ++k) cand[k] = (phi[k] >= 0.5 && intensity[k] < cut) ? 1 : 0;
    const LabelMap regions = label_components(cand);
    std::vector<Pixel> apex(regions.n_neu, Pixel{-1, -1});
    for (std::size_t k = 0; k < cand.size(); ++k) {
        const int l = regions.labels[k];
        if (!l) continue;
        Pixel& a = apex[l - 1];
        if (a.x < 0 || intensity[k] < intensity(a)) a = cand.pixel(k);
    }
    for (int l = 0; l < regions.n_neu; ++l) {
        if (regions.areas[l] <= opts.gamma_tip) continue;
        out.tips.push_back({regions.centroids[l], apex[l], regions.areas[l]});
    }
    return out;
}

TipSet detect_tips(const RealGrid& phi, const TipOptions& opts) {
    const LabelMap lm = connected_components(phi);
    if (lm.n_neu <= 1) return detect_tips_from_intensity(phi, box_convolve(phi, opts.l_kl), opts);

    // Each neuron on its own, with the other components blanked out.
    TipSet out;
    out.zeta_tip = opts.zeta_tip;
    for (int label = 1; label <= lm.n_neu; ++label) {
        RealGrid own = phi;
        for (std::size_t k = 0; k < own.size(); ++k)
            if (lm.labels[k] != 0 && lm.labels[k] != label) own[k] = 0.0;
        const TipSet t = detect_tips_from_intensity(own, box_convolve(own, opts.l_kl), opts);
        out.tips.insert(out.tips.end(), t.tips.begin(), t.tips.end());
    }
    return out;
}

double tortuosity(const NeuriteTrace& trace) {
    if (trace.path.size() < 2) throw DomainError("tortuosity needs at least two trace points");
    const double chord = std::hypot(double(trace.tip().x - trace.root().x), double(trace.tip().y - trace.root().y));
    if (chord == 0.0) throw DomainError("tortuosity undefined for coincident endpoints");
    return trace.l_neu / chord;
}

std::vector<Point> to_points(const std::vector<Pixel>& path) {
    std::vector<Point> pts;
    pts.reserve(path.size());
    for (const Pixel& p : path) pts.push_back({double(p.x), double(p.y)});
    return pts;
}

std::vector<double> turning_angles(const std::vector<Point>& polyline, double resample_step) {
    std::vector<double> out;
    if (polyline.size() < 2 || !(resample_step > 0.0)) return out;
    double length = 0.0;
    for (std::size_t i = 1; i < polyline.size(); ++i) length += distance(polyline[i - 1], polyline[i]);
    if (length < 2.0 * resample_step) return out;

    std::vector<Point> samples{polyline.front()};
    double next = resample_step, walked = 0.0;
    for (std::size_t i = 1; i < polyline.size(); ++i) {
        const Point a = polyline[i - 1], b = polyline[i];
        const double seg = distance(a, b);
        while (seg > 0.0 && walked + seg >= next - 1e-9) {
            const double t = (next - walked) / seg;
            samples.push_back(a + t * (b - a));
            next += resample_step;
        }
        walked += seg;
    }
    for (std::size_t i = 2; i < samples.size(); ++i) {
        const Point u = samples[i - 1] - samples[i - 2];
        const Point v = samples[i] - samples[i - 1];
        const double c = (u.x * v.x + u.y * v.y) / (norm(u) * norm(v));
        out.push_back(std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi);
    }
    return out;
}

std::vector<double> turning_angles(const NeuriteTrace& trace, double resample_step) {
    return turning_angles(to_points(trace.path), resample_step);
}

MorphoFeatures measure_features(const TraceSet& traces, const TipSet& tips, double resample_step) {
    MorphoFeatures f;
    f.l_total = traces.l_total;
    f.n_e = tips.n_tips();
    f.l_seg = f.n_e > 0 ? f.l_total / f.n_e : 0.0;
    for (const auto& t : traces.traces) {
        if (t.path.size() >= 2 && !(t.tip() == t.root())) f.tortuosity.push_back(tortuosity(t));
        const auto a = turning_angles(t, resample_step);
        f.turning_angles.insert(f.turning_angles.end(), a.begin(), a.end());
    }
    return f;
}

}  // namespace neurogrow
