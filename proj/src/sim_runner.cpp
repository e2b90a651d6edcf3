#include "neurogrow/sim_runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace neurogrow {

using nlohmann::json;

void SimConfig::validate() const {
    params.validate();
    if (nx < 8 || ny < 8) throw ConfigError("control mesh must be at least 8 x 8");
    const double need = 2.0 * (params.seed_radius + margin);
    if (nx < need || ny < need) throw ConfigError("control mesh smaller than 2 (r0 + margin)");
    if (neuron_count < 1 && centers.empty()) throw ConfigError("at least one neuron is required");
    if (max_iter < 0 || snapshot_every < 0) throw ConfigError("iteration counts must be nonnegative");
    if (controller_every < 1) throw ConfigError("controller_every must be at least 1");
    if (margin < 0 || pad < 1) throw ConfigError("expansion margin must be >= 0 and pad >= 1");
    if (max_dim < std::max(nx, ny)) throw ConfigError("max_dim is below the initial mesh");
    if (retries < 0) throw ConfigError("retries must be nonnegative");
}

long SimConfig::snapshot_cadence() const {
    if (snapshot_every > 0) return snapshot_every;
    return std::max(1L, std::lround(double(max_iter) / 60.0));
}

namespace {

template <class T>
void opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

SimConfig SimConfig::from_json_text(const std::string& text) {
    SimConfig c;
    try {
        const json j = json::parse(text);
        opt(j, "case_id", c.case_id);
        opt(j, "nx", c.nx);
        opt(j, "ny", c.ny);
        opt(j, "neuron_count", c.neuron_count);
        opt(j, "seed", c.seed);
        opt(j, "placement_seed", c.placement_seed);
        opt(j, "profile", c.profile_path);
        opt(j, "max_iter", c.max_iter);
        opt(j, "snapshot_every", c.snapshot_every);
        opt(j, "controller_every", c.controller_every);
        opt(j, "margin", c.margin);
        opt(j, "pad", c.pad);
        opt(j, "max_dim", c.max_dim);
        opt(j, "retries", c.retries);
        if (j.contains("centers")) {
            for (const auto& p : j.at("centers")) c.centers.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            c.neuron_count = int(c.centers.size());
        }
        if (j.contains("params")) {
            const auto& p = j.at("params");
            auto& m = c.params;
            opt(p, "mobility", m.mobility);
            opt(p, "axon_mobility", m.axon_mobility);
            opt(p, "orientation_coeff", m.orientation_coeff);
            opt(p, "latent_heat", m.latent_heat);
            opt(p, "alpha_over_pi", m.alpha_over_pi);
            opt(p, "gamma", m.gamma);
            opt(p, "tubulin_diffusion", m.tubulin_diffusion);
            opt(p, "tubulin_transport", m.tubulin_transport);
            opt(p, "tubulin_decay", m.tubulin_decay);
            opt(p, "tubulin_production", m.tubulin_production);
            opt(p, "assembly_rate", m.assembly_rate);
            opt(p, "disassembly_rate", m.disassembly_rate);
            opt(p, "cone_assembly_rate", m.cone_assembly_rate);
            opt(p, "cone_disassembly_rate", m.cone_disassembly_rate);
            opt(p, "anisotropy_strength", m.anisotropy_strength);
            opt(p, "anisotropy_mode", m.anisotropy_mode);
            opt(p, "equilibrium_temperature", m.equilibrium_temperature);
            opt(p, "dt", m.dt);
            opt(p, "time_scale", m.time_scale);
            opt(p, "seed_radius", m.seed_radius);
            opt(p, "seed_interface_width", m.seed_interface_width);
        }
        if (j.contains("driver")) {
            const auto& d = j.at("driver");
            auto& o = c.driver;
            opt(d, "um_per_grid", o.um_per_grid);
            opt(d, "d_cue", o.d_cue);
            opt(d, "l_gc", o.l_gc);
            opt(d, "zeta_tip", o.tips.zeta_tip);
            opt(d, "gamma_tip", o.tips.gamma_tip);
            opt(d, "l_kl", o.tips.l_kl);
            opt(d, "zeta_soma", o.trace.zeta_soma);
            opt(d, "min_neurite_length", o.trace.min_length);
            opt(d, "zeta_lo", o.zeta_lo);
            opt(d, "zeta_hi", o.zeta_hi);
            opt(d, "zeta_iterations", o.zeta_iterations);
            opt(d, "cue_draws", o.cue_draws);
            opt(d, "tip_match_radius", o.tip_match_radius);
            opt(d, "bootstrap_band", o.bootstrap_band);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

SimConfig SimConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string SimConfig::to_json_text() const {
    json j;
    j["case_id"] = case_id;
    j["nx"] = nx;
    j["ny"] = ny;
    j["neuron_count"] = neuron_count;
    j["seed"] = seed;
    j["placement_seed"] = placement_seed;
    j["profile"] = profile_path;
    j["max_iter"] = max_iter;
    j["snapshot_every"] = snapshot_every;
    j["controller_every"] = controller_every;
    j["margin"] = margin;
    j["pad"] = pad;
    j["max_dim"] = max_dim;
    j["retries"] = retries;
    if (!centers.empty()) {
        j["centers"] = json::array();
        for (const auto& p : centers) j["centers"].push_back({p.x, p.y});
    }
    const auto& m = params;
    j["params"] = {{"mobility", m.mobility},
                   {"axon_mobility", m.axon_mobility},
                   {"orientation_coeff", m.orientation_coeff},
                   {"latent_heat", m.latent_heat},
                   {"alpha_over_pi", m.alpha_over_pi},
                   {"gamma", m.gamma},
                   {"tubulin_diffusion", m.tubulin_diffusion},
                   {"tubulin_transport", m.tubulin_transport},
                   {"tubulin_decay", m.tubulin_decay},
                   {"tubulin_production", m.tubulin_production},
                   {"assembly_rate", m.assembly_rate},
                   {"disassembly_rate", m.disassembly_rate},
                   {"cone_assembly_rate", m.cone_assembly_rate},
                   {"cone_disassembly_rate", m.cone_disassembly_rate},
                   {"anisotropy_strength", m.anisotropy_strength},
                   {"anisotropy_mode", m.anisotropy_mode},
                   {"equilibrium_temperature", m.equilibrium_temperature},
                   {"dt", m.dt},
                   {"time_scale", m.time_scale},
                   {"seed_radius", m.seed_radius},
                   {"seed_interface_width", m.seed_interface_width}};
    const auto& o = driver;
    j["driver"] = {{"um_per_grid", o.um_per_grid},       {"d_cue", o.d_cue},
                   {"l_gc", o.l_gc},                     {"zeta_tip", o.tips.zeta_tip},
                   {"gamma_tip", o.tips.gamma_tip},      {"l_kl", o.tips.l_kl},
                   {"zeta_soma", o.trace.zeta_soma},     {"min_neurite_length", o.trace.min_length},
                   {"zeta_lo", o.zeta_lo},               {"zeta_hi", o.zeta_hi},
                   {"zeta_iterations", o.zeta_iterations}, {"cue_draws", o.cue_draws},
                   {"tip_match_radius", o.tip_match_radius}, {"bootstrap_band", o.bootstrap_band}};
    return j.dump(2);
}

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::div6_reached: return "div6_reached";
        case StopReason::max_iter: return "max_iter";
        case StopReason::instability: return "instability";
        case StopReason::domain_limit: return "domain_limit";
    }
    return "unknown";
}

Expansion expansion_sides(const RealGrid& phi, int margin) {
    Expansion e;
    for (int y = 0; y < phi.ny(); ++y) {
        for (int x = 0; x < phi.nx(); ++x) {
            if (phi(x, y) < 0.5) continue;
            e.west |= x < margin;
            e.east |= x >= phi.nx() - margin;
            e.south |= y < margin;
            e.north |= y >= phi.ny() - margin;
        }
    }
    return e;
}

Domain Domain::unit_mesh(int nu, int nv) {
    SplineSpace2D space = SplineSpace2D::unit_mesh(nu, nv);
    CollocationOperators ops = CollocationOperators::assemble(space);
    return {std::move(space), std::move(ops)};
}

bool expand_domain(SimState& s, Domain& d, const Expansion& sides, int pad, int max_dim, Rng& rng) {
    if (!sides.any()) return true;
    const int west = sides.west ? pad : 0, east = sides.east ? pad : 0;
    const int south = sides.south ? pad : 0, north = sides.north ? pad : 0;
    const int nu = s.nu + west + east, nv = s.nv + south + north;
    if (nu > max_dim || nv > max_dim) return false;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n = std::size_t(nu) * nv;
    std::vector<double> phi(n, 0.0), c(n, 0.0), temp(n, 0.0), phi0(n, 0.0), theta(n);
    for (int j = 0; j < nv; ++j) {
        for (int i = 0; i < nu; ++i) {
            const std::size_t k = std::size_t(j) * nu + i;
            const int oi = i - west, oj = j - south;
            if (oi >= 0 && oj >= 0 && oi < s.nu && oj < s.nv) {
                const std::size_t o = std::size_t(oj) * s.nu + oi;
                phi[k] = s.phi.values[o];
                c[k] = s.tubulin.values[o];
                temp[k] = s.temperature.values[o];
                phi0[k] = s.phi0.values[o];
                theta[k] = s.theta.values[o];
            } else {
                theta[k] = unit(rng);
            }
        }
    }
    d = Domain::unit_mesh(nu, nv);
    s.nu = nu;
    s.nv = nv;
    s.phi = Field::from_values(d.ops, std::move(phi));
    s.tubulin = Field::from_values(d.ops, std::move(c));
    s.temperature = Field::from_values(d.ops, std::move(temp));
    s.phi0 = Field::from_values(d.ops, std::move(phi0));
    s.theta = Field::from_values(d.ops, std::move(theta));
    s.refresh_static(d.ops);
    return true;
}

std::vector<Point> place_neurons(int count, double w, double h, double r0, Rng& rng, int attempts) {
    std::vector<Point> out;
    const double m = 2.0 * r0, sep = 4.0 * r0;
    if (w <= 2 * m || h <= 2 * m) return out;
    std::uniform_real_distribution<double> ux(m, w - m), uy(m, h - m);
    for (int a = 0; a < attempts && int(out.size()) < count; ++a) {
        const Point p{ux(rng), uy(rng)};
        bool ok = true;
        for (const auto& q : out) ok = ok && distance(p, q) >= sep;
        if (ok) out.push_back(p);
    }
    if (int(out.size()) < count) out.clear();
    return out;
}

namespace {

double invert_monotone(const std::vector<double>& g, double v) {
    if (v <= g.front()) return 0.0;
    if (v >= g.back()) return double(g.size() - 1);
    const auto it = std::upper_bound(g.begin(), g.end(), v);
    const std::size_t i = std::size_t(it - g.begin()) - 1;
    return i + (v - g[i]) / (g[i + 1] - g[i]);
}

FrameRecord snapshot(const SimState& s, int x0, int y0) {
    FrameRecord f;
    f.iteration = s.iteration;
    f.x0 = x0;
    f.y0 = y0;
    f.phi = to_float(s.phi_grid());
    return f;
}

}  // namespace

Point physical_to_pixel(const SplineSpace2D& space, Point p) {
    return {invert_monotone(space.greville_u, p.x), invert_monotone(space.greville_v, p.y)};
}

CaseResult run_case(const SimConfig& cfg, const LogSink& sink) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    CaseResult r;
    r.case_id = cfg.case_id;
    r.seed = cfg.seed;

    const MorphometricProfile profile =
        cfg.profile_path.empty() ? MorphometricProfile::default_profile() : MorphometricProfile::load(cfg.profile_path);
    Rng case_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    int nx = cfg.nx, ny = cfg.ny;
    std::vector<Point> centers = cfg.centers;
    if (centers.empty()) {
        const double r0 = cfg.params.seed_radius;
        if (cfg.neuron_count == 1) {
            centers.push_back({0.5 * (nx - 3), 0.5 * (ny - 3)});
        } else {
            Rng place(cfg.placement_seed ? cfg.placement_seed : cfg.seed + 0x51ed27);
            while ((centers = place_neurons(cfg.neuron_count, nx - 3, ny - 3, r0, place)).empty()) {
                nx += cfg.pad;
                ny += cfg.pad;
                if (std::max(nx, ny) > cfg.max_dim) throw ConfigError("cannot place the neurons within max_dim");
            }
        }
    }
    r.neuron_count = int(centers.size());

    Domain dom = Domain::unit_mesh(nx, ny);
    SimState s = initialize_state(centers, cfg.params, dom.space, dom.ops, cfg.seed);
    std::vector<Point> seeds;
    for (const auto& c : centers) seeds.push_back(physical_to_pixel(dom.space, c));
    FeatureDriver driver(profile, cfg.params, cfg.driver, seeds, cfg.seed);

    r.dims_history.push_back({nx, ny});
    r.phi0 = snapshot(s, 0, 0);
    const long cadence = cfg.snapshot_cadence();

    DriveResult ctl = driver.drive(s);
    r.log.insert(r.log.end(), ctl.log.begin(), ctl.log.end());
    auto record = [&] {
        r.frames.push_back(snapshot(s, r.x0, r.y0));
        r.div_trajectory.push_back(ctl.div);
        r.l_total.push_back(ctl.l_total_um);
    };
    record();

    r.stop = StopReason::max_iter;
    bool stale = false;
    for (long it = 0; it < cfg.max_iter; ++it) {
        if (stale || (it > 0 && it % cfg.controller_every == 0)) {
            ctl = driver.drive(s);
            r.log.insert(r.log.end(), ctl.log.begin(), ctl.log.end());
            stale = false;
        }
        if (ctl.terminal) {
            r.stop = StopReason::div6_reached;
            break;
        }

        double dt = cfg.params.effective_dt();
        std::optional<SimState> next;
        std::string failure;
        for (int attempt = 0; attempt <= cfg.retries && !next; ++attempt) {
            try {
                next = step(s, ctl.controls, dom.ops, cfg.params, dt);
            } catch (const NumericalInstability& e) {
                failure = e.what();
                dt *= 0.5;
            }
        }
        if (!next) {
            r.stop = StopReason::instability;
            r.message = failure;
            break;
        }
        s = std::move(*next);
        if (sink) sink({s.iteration, ctl.l_total_um, ctl.div, ctl.n_tips, dt});

        const Expansion e = expansion_sides(s.phi_grid(), cfg.margin);
        if (e.any()) {
            if (!expand_domain(s, dom, e, cfg.pad, cfg.max_dim, case_rng)) {
                r.stop = StopReason::domain_limit;
                r.message = "domain would exceed " + std::to_string(cfg.max_dim) + " control points";
                break;
            }
            const int dx = e.west ? cfg.pad : 0, dy = e.south ? cfg.pad : 0;
            driver.shift(dx, dy);
            r.x0 -= dx;
            r.y0 -= dy;
            r.dims_history.push_back({s.nu, s.nv});
            stale = true;
        }
        if (s.iteration % cadence == 0) record();
    }
    if (r.frames.back().iteration != s.iteration) {
        if (stale) ctl = driver.drive(s);
        record();
    }
    r.final_state = std::move(s);
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<BatchItem> run_batch(const std::vector<SimConfig>& configs, int parallelism) {
    std::vector<BatchItem> out(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < configs.size();) {
            try {
                out[i].result = run_case(configs[i]);
            } catch (const std::exception& e) {
                out[i].error = e.what();
            }
        }
    };
    const int n = std::max(1, std::min<int>(parallelism, int(configs.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

FrameArchive to_archive(const CaseResult& r) {
    FrameArchive a;
    a.case_id = r.case_id;
    a.seed = r.seed;
    a.neuron_count = r.neuron_count;
    a.dims_history = r.dims_history;
    a.phi0 = r.phi0;
    a.theta.iteration = r.final_state.iteration;
    a.theta.x0 = r.x0;
    a.theta.y0 = r.y0;
    RealGrid th(r.final_state.nu, r.final_state.nv);
    th.data() = r.final_state.theta.values;
    a.theta.phi = to_float(th);
    a.frames = r.frames;
    return a;
}

}  // namespace neurogrow
