// neurogrow: growth simulation, morphometry of frames and dataset export.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "neurogrow/dataset_io.hpp"
#include "neurogrow/feature_driver.hpp"
#include "neurogrow/morphometry.hpp"
#include "neurogrow/profile.hpp"
#include "neurogrow/sim_runner.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace neurogrow;

namespace {

// A frame argument is either a blob file or an archive directory (its last frame).
RealGrid load_frame(const std::string& arg) {
    const fs::path p(arg);
    if (fs::is_directory(p)) {
        const auto a = read_archive(p);
        if (a.frames.empty()) throw DomainError("archive " + arg + " has no frames");
        return to_real(a.frames.back().phi);
    }
    return to_real(read_blob(p));
}

json pixel_json(Pixel p) { return json::array({p.x, p.y}); }
json point_json(Point p) { return json::array({p.x, p.y}); }

struct Overlay {
    Grid<unsigned char> img;

    explicit Overlay(const RealGrid& phi) : img(phi.nx(), phi.ny()) {
        for (int y = 0; y < phi.ny(); ++y)
            for (int x = 0; x < phi.nx(); ++x) img(x, y) = phi(x, y) >= 0.5 ? 96 : 0;
    }
    void mark(Pixel p, unsigned char v) {
        if (p.x >= 0 && p.y >= 0 && p.x < img.nx() && p.y < img.ny()) img(p.x, p.y) = v;
    }
    void cross(Pixel p, unsigned char v) {
        for (int d = -2; d <= 2; ++d) {
            mark({p.x + d, p.y}, v);
            mark({p.x, p.y + d}, v);
        }
    }
    // Binary PGM, first row at the top (highest y).
    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + path);
        out << "P5\n" << img.nx() << ' ' << img.ny() << "\n255\n";
        for (int y = img.ny() - 1; y >= 0; --y)
            for (int x = 0; x < img.nx(); ++x) out.put(char(img(x, y)));
    }
};

struct ComponentTrace {
    int label = 0;
    Pixel p_initial;
    TraceSet traces;
};

// Traces every component from the mask pixel nearest its centroid, or from
// the given source for the component containing it.
std::vector<ComponentTrace> trace_components(const RealGrid& phi, const TraceOptions& opts,
                                             std::optional<Point> source) {
    const auto lm = connected_components(phi);
    std::vector<ComponentTrace> out;
    for (int label = 1; label <= lm.n_neu; ++label) {
        const auto mask = component_mask(lm, label);
        Pixel p0 = nearest_mask_pixel(mask, lm.centroids[label - 1]);
        if (source) {
            const Pixel s{int(std::lround(source->x)), int(std::lround(source->y))};
            if (s.x >= 0 && s.y >= 0 && s.x < phi.nx() && s.y < phi.ny() && mask(s.x, s.y)) p0 = s;
        }
        out.push_back({label, p0, trace_neurites(mask, p0, opts)});
    }
    return out;
}

json traces_json(const TraceSet& ts) {
    json arr = json::array();
    for (const auto& t : ts.traces) {
        json path = json::array();
        for (const auto& p : t.path) path.push_back(pixel_json(p));
        arr.push_back({{"generation", int(t.generation)},
                       {"l_neu", t.l_neu},
                       {"tip", pixel_json(t.tip())},
                       {"root", pixel_json(t.root())},
                       {"path", path}});
    }
    return arr;
}

json tips_json(const TipSet& ts) {
    json arr = json::array();
    for (const auto& t : ts.tips)
        arr.push_back({{"position", point_json(t.position)}, {"apex", pixel_json(t.apex)}, {"area", t.area}});
    return arr;
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

int cmd_simulate(const std::string& config_path, std::optional<std::string> out_dir, std::optional<std::uint64_t> seed,
                 bool quiet) {
    auto cfg = SimConfig::load(config_path);
    if (seed) cfg.seed = *seed;
    const fs::path out = out_dir ? fs::path(*out_dir) : fs::path(cfg.case_id);
    fs::create_directories(out);
    std::ofstream log(out / "run.log");
    auto sink = [&](const RunLogEntry& e) {
        json j = {{"iteration", e.iteration}, {"l_total", e.l_total}, {"div", e.div}, {"n_tips", e.n_tips}, {"dt", e.dt}};
        log << j.dump() << '\n';
        if (!quiet && e.iteration % 100 == 0) std::cerr << j.dump() << '\n';
    };
    const auto r = run_case(cfg, sink);
    for (const auto& line : r.log) log << json({{"event", line}}).dump() << '\n';
    write_archive(to_archive(r), out);
    {
        std::ofstream c(out / "config.json");
        c << cfg.to_json_text() << '\n';
    }
    print({{"case_id", r.case_id},
           {"seed", r.seed},
           {"stop", to_string(r.stop)},
           {"message", r.message},
           {"iterations", r.final_state.iteration},
           {"frames", r.frames.size()},
           {"l_total", r.l_total.empty() ? 0.0 : r.l_total.back()},
           {"div", r.div_trajectory.empty() ? 0.0 : r.div_trajectory.back()},
           {"dims", json::array({r.final_state.nu, r.final_state.nv})},
           {"runtime_s", r.runtime_s},
           {"out", out.string()}});
    return r.stop == StopReason::instability ? 2 : 0;
}

int cmd_batch(const std::string& config_path, const std::string& out_dir, int count, std::uint64_t seed,
              int parallel) {
    const auto base = SimConfig::load(config_path);
    std::vector<SimConfig> configs;
    for (int i = 0; i < count; ++i) {
        auto c = base;
        c.seed = seed + std::uint64_t(i);
        char id[64];
        std::snprintf(id, sizeof id, "%s_%03d", base.case_id.c_str(), i);
        c.case_id = id;
        configs.push_back(c);
    }
    const auto results = run_batch(configs, parallel);
    json report = json::array();
    int failures = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& item = results[i];
        if (!item.result) {
            ++failures;
            report.push_back({{"case_id", configs[i].case_id}, {"error", item.error}});
            continue;
        }
        write_archive(to_archive(*item.result), fs::path(out_dir) / configs[i].case_id);
        report.push_back({{"case_id", configs[i].case_id},
                          {"stop", to_string(item.result->stop)},
                          {"frames", item.result->frames.size()}});
    }
    print(report);
    return failures ? 2 : 0;
}

TraceOptions trace_opts(double zeta_soma, double min_length) {
    TraceOptions o;
    o.zeta_soma = zeta_soma;
    o.min_length = min_length;
    return o;
}

int cmd_trace(const std::string& frame, const TraceOptions& opts, std::optional<Point> source,
              const std::string& overlay) {
    const auto phi = load_frame(frame);
    const auto comps = trace_components(phi, opts, source);
    json j = {{"frame", frame}, {"nx", phi.nx()}, {"ny", phi.ny()}, {"n_neu", comps.size()}};
    json arr = json::array();
    double total = 0.0;
    for (const auto& c : comps) {
        total += c.traces.l_total;
        arr.push_back({{"label", c.label},
                       {"p_initial", pixel_json(c.p_initial)},
                       {"l_total", c.traces.l_total},
                       {"traces", traces_json(c.traces)}});
    }
    j["l_total"] = total;
    j["neurons"] = arr;
    print(j);
    if (!overlay.empty()) {
        Overlay ov(phi);
        for (const auto& c : comps) {
            for (const auto& t : c.traces.traces)
                for (const auto& p : t.path) ov.mark(p, t.generation == Generation::primary ? 255 : 192);
            ov.cross(c.p_initial, 160);
        }
        ov.write(overlay);
    }
    return 0;
}

int cmd_detect_tips(const std::string& frame, const TipOptions& opts, const std::string& overlay) {
    const auto phi = load_frame(frame);
    const auto tips = detect_tips(phi, opts);
    print({{"frame", frame},
           {"zeta_tip", opts.zeta_tip},
           {"gamma_tip", opts.gamma_tip},
           {"l_kl", opts.l_kl},
           {"n_tips", tips.n_tips()},
           {"tips", tips_json(tips)}});
    if (!overlay.empty()) {
        Overlay ov(phi);
        for (const auto& t : tips.tips) ov.cross(t.apex, 255);
        ov.write(overlay);
    }
    return 0;
}

int cmd_features(const std::string& frame, const TraceOptions& topts, const TipOptions& tip_opts, double step,
                 double um_per_grid, const std::string& profile_path, const std::string& overlay) {
    const auto phi = load_frame(frame);
    const auto profile = profile_path.empty() ? MorphometricProfile::default_profile()
                                              : MorphometricProfile::load(profile_path);
    const auto comps = trace_components(phi, topts, std::nullopt);
    const auto lm = connected_components(phi);
    json arr = json::array();
    Overlay ov(phi);
    for (const auto& c : comps) {
        // Tips of this component only.
        RealGrid own(phi.nx(), phi.ny(), 0.0);
        for (int y = 0; y < phi.ny(); ++y)
            for (int x = 0; x < phi.nx(); ++x)
                if (lm.labels(x, y) == c.label) own(x, y) = phi(x, y);
        const auto tips = detect_tips(own, tip_opts);
        const auto f = measure_features(c.traces, tips, step);
        const auto div = determine_div(f.l_total * um_per_grid, profile);
        arr.push_back({{"label", c.label},
                       {"p_initial", pixel_json(c.p_initial)},
                       {"l_total", f.l_total},
                       {"l_total_um", f.l_total * um_per_grid},
                       {"div", div.div},
                       {"div_terminal", div.terminal},
                       {"n_tips", tips.n_tips()},
                       {"n_e", f.n_e},
                       {"l_seg", f.l_seg},
                       {"tortuosity", f.tortuosity},
                       {"turning_angles", f.turning_angles},
                       {"tips", tips_json(tips)}});
        for (const auto& t : c.traces.traces)
            for (const auto& p : t.path) ov.mark(p, 192);
        for (const auto& t : tips.tips) ov.cross(t.apex, 255);
    }
    print({{"frame", frame}, {"n_neu", comps.size()}, {"neurons", arr}});
    if (!overlay.empty()) ov.write(overlay);
    return 0;
}

int cmd_export(const std::string& cases, const std::string& out, std::uint64_t seed, int frames, int size) {
    fs::path manifest(out);
    if (manifest.extension() != ".json") manifest += ".json";
    if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
    const auto m = export_dataset(cases, manifest, seed, frames, size);
    auto shape = [](const std::vector<std::size_t>& s) { return json(s); };
    print({{"manifest", manifest.string()},
           {"cases", m.cases.size()},
           {"n_train", m.n_train},
           {"input_shape", shape(m.input_shape())},
           {"target_shape", shape(m.target_shape())}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neurogrow: phase-field neuron growth driven by morphometric targets"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "run one growth case and write its archive");
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool quiet = false;
    sim->add_option("--config", config, "JSON case config")->required()->check(CLI::ExistingFile);
    auto* sim_out = sim->add_option("--out", out, "archive directory (default: ./<case_id>)");
    auto* sim_seed = sim->add_option("--seed", seed, "override the config seed");
    sim->add_flag("--quiet", quiet);

    auto* batch = app.add_subcommand("batch", "run a config under consecutive seeds");
    int count = 1, parallel = 1;
    batch->add_option("--config", config)->required()->check(CLI::ExistingFile);
    batch->add_option("--out", out)->required();
    batch->add_option("--count", count)->check(CLI::PositiveNumber);
    batch->add_option("--seed", seed);
    batch->add_option("--parallel", parallel)->check(CLI::PositiveNumber);

    std::string frame, overlay, profile;
    double zeta_soma = 20.0, min_length = 3.0, step = 5.0, um = 1.0;
    std::vector<double> source;
    TipOptions tip_opts;

    auto* tr = app.add_subcommand("trace", "trace neurites of every component in a frame");
    tr->add_option("--frame", frame, "frame blob or archive directory")->required()->check(CLI::ExistingPath);
    tr->add_option("--zeta-soma", zeta_soma);
    tr->add_option("--min-length", min_length);
    tr->add_option("--source", source, "soma centre x y (pixels)")->expected(2);
    tr->add_option("--overlay", overlay, "write a PGM overlay");

    auto* dt = app.add_subcommand("detect-tips", "detect neurite tips in a frame");
    dt->add_option("--frame", frame)->required()->check(CLI::ExistingPath);
    dt->add_option("--zeta-tip", tip_opts.zeta_tip);
    dt->add_option("--gamma-tip", tip_opts.gamma_tip);
    dt->add_option("--l-kl", tip_opts.l_kl);
    dt->add_option("--overlay", overlay);

    auto* ft = app.add_subcommand("features", "per-neuron morphometric features of a frame");
    ft->add_option("--frame", frame)->required()->check(CLI::ExistingPath);
    ft->add_option("--zeta-soma", zeta_soma);
    ft->add_option("--min-length", min_length);
    ft->add_option("--zeta-tip", tip_opts.zeta_tip);
    ft->add_option("--gamma-tip", tip_opts.gamma_tip);
    ft->add_option("--l-kl", tip_opts.l_kl);
    ft->add_option("--step", step, "turning-angle resampling step");
    ft->add_option("--um-per-grid", um);
    ft->add_option("--profile", profile)->check(CLI::ExistingFile);
    ft->add_option("--overlay", overlay);

    auto* ex = app.add_subcommand("export-dataset", "pack case archives into the training dataset");
    std::string cases;
    int frames = 60, size = 300;
    ex->add_option("--cases", cases, "directory of case archives")->required()->check(CLI::ExistingDirectory);
    ex->add_option("--out", out, "manifest path; arrays go next to it")->required();
    ex->add_option("--seed", seed)->required();
    ex->add_option("--frames", frames)->check(CLI::PositiveNumber);
    ex->add_option("--size", size)->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return cmd_simulate(config, sim_out->count() ? std::optional(out) : std::nullopt,
                                sim_seed->count() ? std::optional(seed) : std::nullopt, quiet);
        if (batch->parsed()) return cmd_batch(config, out, count, seed, parallel);
        if (tr->parsed()) {
            std::optional<Point> src;
            if (source.size() == 2) src = Point{source[0], source[1]};
            return cmd_trace(frame, trace_opts(zeta_soma, min_length), src, overlay);
        }
        if (dt->parsed()) return cmd_detect_tips(frame, tip_opts, overlay);
        if (ft->parsed())
            return cmd_features(frame, trace_opts(zeta_soma, min_length), tip_opts, step, um, profile, overlay);
        if (ex->parsed()) return cmd_export(cases, out, seed, frames, size);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
