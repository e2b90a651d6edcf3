#pragma once

// Growth cases: initialization, the drive/step loop with adaptive domain
// expansion, snapshots and batch execution.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "neurogrow/dataset_io.hpp"
#include "neurogrow/feature_driver.hpp"
#include "neurogrow/phase_field.hpp"
#include "neurogrow/spline.hpp"

namespace neurogrow {

struct SimConfig {
    std::string case_id = "case";
    int nx = 60;  // control mesh
    int ny = 60;
    std::vector<Point> centers;  // physical coordinates; empty -> auto placement
    int neuron_count = 1;
    std::uint64_t seed = 1;
    std::uint64_t placement_seed = 0;  // 0 -> derived from seed
    ModelParams params;
    DriverOptions driver;
    std::string profile_path;  // empty -> shipped profile
    long max_iter = 500;
    long snapshot_every = 0;  // 0 -> round(max_iter / 60)
    int controller_every = 1;
    int margin = 10;
    int pad = 10;
    int max_dim = 1000;
    int retries = 3;

    void validate() const;
    long snapshot_cadence() const;
    static SimConfig from_json_text(const std::string& text);
    static SimConfig load(const std::string& path);
    std::string to_json_text() const;
};

enum class StopReason { div6_reached, max_iter, instability, domain_limit };
const char* to_string(StopReason r);

struct RunLogEntry {
    long iteration = 0;
    double l_total = 0.0;  // micrometres, all neurons
    double div = 0.0;
    int n_tips = 0;
    double dt = 0.0;  // model time step actually taken
};

struct CaseResult {
    std::string case_id;
    std::uint64_t seed = 0;
    int neuron_count = 0;
    SimState final_state;
    std::vector<FrameRecord> frames;  // snapshots, ordered by iteration
    std::vector<double> div_trajectory;  // per snapshot
    std::vector<double> l_total;         // per snapshot, micrometres
    std::vector<std::pair<int, int>> dims_history;
    int x0 = 0;  // origin of the final grid in initial-grid pixel coordinates
    int y0 = 0;
    FrameRecord phi0;
    double runtime_s = 0.0;
    StopReason stop = StopReason::max_iter;
    std::string message;
    std::vector<std::string> log;
};

/// Sides of the grid to grow: any phi >= 0.5 within `margin` pixels of that edge.
struct Expansion {
    bool west = false, east = false, south = false, north = false;
    bool any() const noexcept { return west || east || south || north; }
};
Expansion expansion_sides(const RealGrid& phi, int margin);

struct Domain {
    SplineSpace2D space;
    CollocationOperators ops;
    static Domain unit_mesh(int nu, int nv);
};

/// Pads the triggered sides by `pad` control cells. Field values on the old
/// points are copied, phi/T/c/phi0 are zero on new points, theta is drawn
/// uniformly from `rng`; source_norm is kept. Returns false, leaving everything
/// untouched, when the enlarged grid would exceed max_dim.
bool expand_domain(SimState& s, Domain& d, const Expansion& sides, int pad, int max_dim, Rng& rng);

/// Rejection-sampled neuron centers (physical coordinates) at least 4 r0 apart
/// and 2 r0 from the edges of [0, w] x [0, h]. Returns empty on failure.
std::vector<Point> place_neurons(int count, double w, double h, double r0, Rng& rng, int attempts = 20000);

/// Pixel coordinates of a physical point (inverse of the Greville maps).
Point physical_to_pixel(const SplineSpace2D& space, Point p);

using LogSink = std::function<void(const RunLogEntry&)>;

CaseResult run_case(const SimConfig& config, const LogSink& sink = {});

struct BatchItem {
    std::optional<CaseResult> result;
    std::string error;
};

std::vector<BatchItem> run_batch(const std::vector<SimConfig>& configs, int parallelism = 1);

FrameArchive to_archive(const CaseResult& r);

}  // namespace neurogrow
