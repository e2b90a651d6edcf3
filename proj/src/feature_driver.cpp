#include "neurogrow/feature_driver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace neurogrow {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double interval_gap(double v, const Quartiles& q) {
    if (v < q.q1) return q.q1 - v;
    if (v > q.q3) return v - q.q3;
    return 0.0;
}

Point rotate(Point v, double deg) {
    const double c = std::cos(deg * kDeg), s = std::sin(deg * kDeg);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Pixel round_pixel(Point p) { return {int(std::lround(p.x)), int(std::lround(p.y))}; }

}  // namespace

double sample_turning_magnitude(const ProfileRow& row, Rng& rng) {
    if (row.theta_sigma == 0.0) return row.theta_mu;
    std::normal_distribution<double> g(row.theta_mu, row.theta_sigma);
    return g(rng);
}

double sample_turning_angle(const ProfileRow& row, Rng& rng) {
    const double m = std::clamp(sample_turning_magnitude(row, rng), 0.0, 90.0);
    std::bernoulli_distribution sign(0.5);
    return sign(rng) ? m : -m;
}

TipSet constrain_tip_count(const RealGrid& phi, const ProfileRow& row, const DriverOptions& opts) {
    const RealGrid intensity = box_convolve(phi, opts.tips.l_kl);
    TipOptions t = opts.tips;
    double lo = opts.zeta_lo, hi = opts.zeta_hi;
    t.zeta_tip = std::clamp(t.zeta_tip, lo, hi);
    TipSet best;
    double best_gap = kInf;
    for (int it = 0; it < opts.zeta_iterations; ++it) {
        TipSet cur = detect_tips_from_intensity(phi, intensity, t);
        const int n = cur.n_tips();
        const double gap = interval_gap(n, row.n_e);
        if (gap < best_gap) {
            best_gap = gap;
            best = std::move(cur);
        }
        if (gap == 0.0) break;
        if (n < row.n_e.q1)
            lo = t.zeta_tip;
        else
            hi = t.zeta_tip;
        t.zeta_tip = 0.5 * (lo + hi);
    }
    best.flagged = best_gap > 0.0;
    return best;
}

CuePlacement place_external_cue(Point tip, Point root, double l_neu, const ProfileRow& row, Rng& rng, double d_cue,
                                int max_draws) {
    CuePlacement out;
    Point dir = tip - root;
    if (norm(dir) == 0.0) {
        std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
        const double a = ang(rng);
        dir = {std::cos(a), std::sin(a)};
        out.degenerate = true;
    } else {
        dir = (1.0 / norm(dir)) * dir;
    }
    double best_gap = kInf;
    for (int k = 0; k < std::max(1, max_draws); ++k) {
        const double theta = sample_turning_angle(row, rng);
        const Point cue = tip + d_cue * rotate(dir, theta);
        const double chord = distance(cue, root);
        const double tau = chord > 0.0 ? (l_neu + d_cue) / chord : kInf;
        const double gap = interval_gap(tau, row.tau);
        if (gap < best_gap) {
            best_gap = gap;
            out.cue = cue;
            out.theta_t = theta;
            out.projected_tau = tau;
        }
        out.draws = k + 1;
        if (gap == 0.0) break;
    }
    out.accepted = best_gap == 0.0;
    return out;
}

CuePlacement place_external_cue(const NeuriteTrace& trace, const ProfileRow& row, Rng& rng, double d_cue,
                                int max_draws) {
    if (trace.path.empty()) throw DomainError("cue placement needs a nonempty trace");
    const Pixel t = trace.tip(), r = trace.root();
    return place_external_cue({double(t.x), double(t.y)}, {double(r.x), double(r.y)}, trace.l_neu, row, rng, d_cue,
                              max_draws);
}

GrowthCone build_growth_cone(Pixel tip, Point cue, int nx, int ny, int l_gc) {
    GrowthCone gc;
    gc.center = tip;
    const int lo = -(l_gc / 2);
    const Point dir = cue - Point{double(tip.x), double(tip.y)};
    for (int dy = lo; dy < lo + l_gc; ++dy) {
        for (int dx = lo; dx < lo + l_gc; ++dx) {
            const int x = tip.x + dx, y = tip.y + dy;
            if (x < 0 || y < 0 || x >= nx || y >= ny) continue;
            gc.zone.push_back({x, y});
            if (dx * dir.x + dy * dir.y >= 0.0) gc.activation.push_back({x, y});
        }
    }
    return gc;
}

std::vector<GrowthCone> build_growth_cones(const std::vector<Pixel>& tips, const std::vector<Point>& cues, int nx,
                                           int ny, int l_gc) {
    if (tips.size() != cues.size()) throw DomainError("tips and cues are not aligned");
    std::vector<GrowthCone> out;
    for (std::size_t i = 0; i < tips.size(); ++i) out.push_back(build_growth_cone(tips[i], cues[i], nx, ny, l_gc));
    return out;
}

int select_axon_tip(const std::vector<Point>& tips, Point p_initial) {
    int best = -1;
    double best_d = -1.0;
    for (std::size_t i = 0; i < tips.size(); ++i) {
        const double d = distance(tips[i], p_initial);
        if (d > best_d) {
            best_d = d;
            best = int(i);
        }
    }
    return best;
}

FeatureDriver::FeatureDriver(MorphometricProfile profile, ModelParams params, DriverOptions opts,
                             std::vector<Point> seeds, std::uint64_t seed)
    : profile_(std::move(profile)), params_(params), opts_(opts), seeds_(std::move(seeds)), seed_(seed) {
    if (!(opts_.um_per_grid > 0.0)) throw ConfigError("um_per_grid must be positive");
    if (opts_.l_gc < 1) throw ConfigError("growth cone size must be at least 1");
}

void FeatureDriver::shift(int dx, int dy) {
    const Point d{double(dx), double(dy)};
    for (auto& s : seeds_) s = s + d;
    for (auto& [id, tips] : memory_) {
        for (auto& t : tips) {
            t.apex = t.apex + d;
            t.cue = t.cue + d;
        }
    }
    for (auto& [id, p] : axon_) p = p + d;
}

DriveResult FeatureDriver::drive(const RealGrid& phi) {
    DriveResult out;
    out.controls = ControlFields::defaults(phi.size(), params_);
    const LabelMap lm = connected_components(phi);

    // Neuron identity: the lowest-index seed inside the component; seedless
    // components are numbered after the seeds and start from their centroid.
    int next_free = int(seeds_.size());
    for (int label = 1; label <= lm.n_neu; ++label) {
        int id = -1;
        Pixel p_initial{-1, -1};
        for (std::size_t s = 0; s < seeds_.size(); ++s) {
            const Pixel p = round_pixel(seeds_[s]);
            if (lm.labels.contains(p) && lm.labels(p) == label) {
                id = int(s);
                p_initial = p;
                break;
            }
        }
        if (id < 0) {
            id = next_free++;
            p_initial = nearest_mask_pixel(component_mask(lm, label), lm.centroids[label - 1]);
        }
        drive_neuron(phi, lm, label, id, p_initial, out);
    }

    if (!out.neurons.empty()) {
        out.div_index = profile_.size() - 1;
        out.terminal = true;
        for (const auto& n : out.neurons) {
            out.div_index = std::min(out.div_index, n.div_index);
            out.terminal = out.terminal && n.terminal;
            out.l_total_um += n.l_total_um;
            out.n_tips += n.n_tips;
        }
    }
    out.div = profile_.row(out.div_index).div;
    ++calls_;
    return out;
}

void FeatureDriver::drive_neuron(const RealGrid& phi, const LabelMap& lm, int label, int id, Pixel p_initial,
                                 DriveResult& out) {
    const int nx = phi.nx(), ny = phi.ny();
    std::seed_seq sseq{std::uint32_t(seed_), std::uint32_t(seed_ >> 32), std::uint32_t(id), std::uint32_t(calls_),
                       std::uint32_t(calls_ >> 32)};
    Rng rng(sseq);

    const Mask mask = component_mask(lm, label);
    RealGrid phi_c(nx, ny, 0.0);
    for (std::size_t k = 0; k < phi.size(); ++k)
        if (mask[k]) phi_c[k] = phi[k];

    NeuronReport rep;
    rep.id = id;
    rep.p_initial = p_initial;
    TraceSet traces = trace_neurites(mask, p_initial, opts_.trace);
    rep.l_total_um = traces.l_total * opts_.um_per_grid;
    const DivResult dv = determine_div(rep.l_total_um, profile_);
    int& sticky = div_index_[id];
    sticky = std::max(sticky, dv.index);
    rep.div_index = sticky;
    rep.div = profile_.row(sticky).div;
    rep.terminal = dv.terminal;
    const ProfileRow& row = profile_.row(sticky);
    auto& ctl = out.controls;

    auto bootstrap = [&] {
        rep.bootstrap = true;
        const int w = opts_.bootstrap_band;
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                if (!mask(x, y)) continue;
                bool edge = false;
                for (int k = 0; k < 4 && !edge; ++k) {
                    const int xx = x + kNeighbor8Dx[k], yy = y + kNeighbor8Dy[k];
                    edge = phi.contains(xx, yy) && phi(xx, yy) < 0.5;
                }
                if (!edge) continue;
                for (int dy = -w; dy <= w; ++dy)
                    for (int dx = -w; dx <= w; ++dx)
                        if (phi.contains(x + dx, y + dy)) ctl.energy_mask[phi.index(x + dx, y + dy)] = 1;
            }
        }
    };

    // Cold start: the first invocation on a neurite-free cell activates its whole interface.
    if (traces.l_total == 0.0 && calls_ == 0) {
        bootstrap();
        out.neurons.push_back(std::move(rep));
        return;
    }

    TipSet tips = constrain_tip_count(phi_c, row, opts_);
    rep.zeta_tip = tips.zeta_tip;
    rep.tip_flag = tips.flagged;
    if (tips.flagged) {
        std::ostringstream msg;
        msg << "neuron " << id << ": " << tips.n_tips() << " tips outside n_e [" << row.n_e.q1 << ", " << row.n_e.q3
            << "] at zeta_tip " << tips.zeta_tip;
        out.log.push_back(msg.str());
    }
    if (tips.tips.empty()) {
        bootstrap();
        rep.traces = std::move(traces.traces);
        out.neurons.push_back(std::move(rep));
        return;
    }

    const Point p0{double(p_initial.x), double(p_initial.y)};
    std::vector<TipMemory>& memory = memory_[id];
    std::vector<TipMemory> next;
    std::vector<char> used(memory.size(), 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const Tip& tip : tips.tips) {
        const Point apex{double(tip.apex.x), double(tip.apex.y)};
        const double d_apex = traces.d_geo(tip.apex);
        int match = -1;
        double match_d = opts_.tip_match_radius;
        for (std::size_t m = 0; m < memory.size(); ++m) {
            const double dd = distance(memory[m].apex, apex);
            if (!used[m] && dd <= match_d) {
                match_d = dd;
                match = int(m);
            }
        }
        TipMemory mem;
        bool refresh = true;
        if (match >= 0) {
            used[match] = 1;
            mem = memory[match];
            refresh = d_apex - mem.ref_d >= mem.target || distance(mem.cue, apex) < 1.0;
        }
        mem.apex = apex;
        if (refresh) {
            // The neurite behind this tip: the trace ending nearest to it.
            Point root = p0;
            double l_neu = d_apex;
            double nearest = opts_.tip_match_radius;
            for (const auto& t : traces.traces) {
                const double dd = distance(Point{double(t.tip().x), double(t.tip().y)}, apex);
                if (dd <= nearest) {
                    nearest = dd;
                    root = {double(t.root().x), double(t.root().y)};
                    l_neu = t.l_neu + dd;
                }
            }
            const CuePlacement cp =
                place_external_cue(apex, root, l_neu, row, rng, opts_.d_cue, opts_.cue_draws);
            mem.cue = cp.cue;
            mem.ref_d = d_apex;
            const double lseg = row.l_seg.q1 + (row.l_seg.q3 - row.l_seg.q1) * unit(rng);
            mem.target = lseg / opts_.um_per_grid;
        }
        next.push_back(mem);
        rep.tips.push_back(tip.apex);
        rep.cues.push_back(mem.cue);
    }
    memory = std::move(next);
    rep.n_tips = int(rep.tips.size());

    std::vector<Point> apexes;
    for (const Pixel& p : rep.tips) apexes.push_back({double(p.x), double(p.y)});
    rep.axon_tip = select_axon_tip(apexes, p0);
    const Point axon = apexes[rep.axon_tip];
    if (auto it = axon_.find(id); it != axon_.end() && distance(it->second, axon) > opts_.tip_match_radius) {
        std::ostringstream msg;
        msg << "neuron " << id << ": axon moved to tip (" << axon.x << ", " << axon.y << ")";
        out.log.push_back(msg.str());
    }
    axon_[id] = axon;

    const auto cones = build_growth_cones(rep.tips, rep.cues, nx, ny, opts_.l_gc);
    for (std::size_t i = 0; i < cones.size(); ++i) {
        if (int(i) == rep.axon_tip) {
            for (const Pixel& p : cones[i].zone) {
                double& m = ctl.mobility[phi.index(p.x, p.y)];
                m = std::max(m, params_.axon_mobility);
            }
        }
        for (const Pixel& p : cones[i].activation) {
            const std::size_t k = phi.index(p.x, p.y);
            ctl.assembly_rate[k] = params_.cone_assembly_rate;
            ctl.disassembly_rate[k] = params_.cone_disassembly_rate;
            ctl.energy_mask[k] = 1;
        }
    }
    rep.traces = std::move(traces.traces);
    out.neurons.push_back(std::move(rep));
}

}  // namespace neurogrow
