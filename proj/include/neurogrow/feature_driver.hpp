#pragma once

// Growth controller: measures each neuron of the phase field, maps its total
// neurite length to a culture stage, tunes tip detection to the stage's tip
// count, steers tips with external cues and writes the resulting growth cones
// into per-point control fields.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "neurogrow/morphometry.hpp"
#include "neurogrow/phase_field.hpp"
#include "neurogrow/profile.hpp"

namespace neurogrow {

using Rng = std::mt19937_64;

struct DriverOptions {
    double um_per_grid = 1.0;
    double d_cue = 10.0;
    int l_gc = 5;
    TipOptions tips;
    TraceOptions trace;
    double zeta_lo = 0.1;
    double zeta_hi = 0.9;
    int zeta_iterations = 10;
    int cue_draws = 50;
    double tip_match_radius = 10.0;
    int bootstrap_band = 2;
};

/// Normal(mu, sigma) draw of the turning-angle magnitude, before clamping.
double sample_turning_magnitude(const ProfileRow& row, Rng& rng);
/// Signed turning angle in degrees: magnitude clamped to [0, 90], sign uniform.
double sample_turning_angle(const ProfileRow& row, Rng& rng);

/// Bisection on zeta_tip until the tip count falls in the row's n_e quartiles.
/// The closest result is returned with `flagged` set when the range is missed.
TipSet constrain_tip_count(const RealGrid& phi, const ProfileRow& row, const DriverOptions& opts = {});

struct CuePlacement {
    Point cue;
    double theta_t = 0.0;  // degrees, signed
    double projected_tau = 1.0;
    int draws = 0;
    bool accepted = false;    // projected tau inside the quartiles
    bool degenerate = false;  // tip == root, direction drawn at random
};

/// Cue at distance d_cue from the tip, rotated by a sampled turning angle from
/// the root->tip direction, redrawn until the tortuosity of the neurite
/// extended to the cue, (l_neu + d_cue) / |cue - root|, is within the quartiles.
CuePlacement place_external_cue(Point tip, Point root, double l_neu, const ProfileRow& row, Rng& rng,
                                double d_cue = 10.0, int max_draws = 50);
CuePlacement place_external_cue(const NeuriteTrace& trace, const ProfileRow& row, Rng& rng, double d_cue = 10.0,
                                int max_draws = 50);

struct GrowthCone {
    Pixel center;
    std::vector<Pixel> zone;        // l_gc x l_gc square clipped to the grid
    std::vector<Pixel> activation;  // zone pixels on the cue side of the tip
};

GrowthCone build_growth_cone(Pixel tip, Point cue, int nx, int ny, int l_gc = 5);
std::vector<GrowthCone> build_growth_cones(const std::vector<Pixel>& tips, const std::vector<Point>& cues, int nx,
                                           int ny, int l_gc = 5);

/// Index of the tip farthest from P_initial (lowest index on ties); -1 when empty.
int select_axon_tip(const std::vector<Point>& tips, Point p_initial);

struct NeuronReport {
    int id = 0;
    Pixel p_initial;
    double l_total_um = 0.0;
    int div_index = 0;
    double div = 0.0;
    bool terminal = false;
    int n_tips = 0;
    double zeta_tip = 0.0;
    bool tip_flag = false;
    bool bootstrap = false;
    int axon_tip = -1;
    std::vector<Pixel> tips;
    std::vector<Point> cues;
    std::vector<NeuriteTrace> traces;
};

struct DriveResult {
    ControlFields controls;
    int div_index = 0;
    double div = 0.0;
    bool terminal = false;
    double l_total_um = 0.0;
    int n_tips = 0;
    std::vector<NeuronReport> neurons;
    std::vector<std::string> log;
};

class FeatureDriver {
public:
    /// `seeds` are the initial neuron centers in pixel coordinates; they identify
    /// neurons across invocations and serve as P_initial.
    FeatureDriver(MorphometricProfile profile, ModelParams params, DriverOptions opts, std::vector<Point> seeds,
                  std::uint64_t seed);

    DriveResult drive(const RealGrid& phi);
    DriveResult drive(const SimState& state) { return drive(state.phi_grid()); }

    /// Moves every stored pixel coordinate after the grid grew on the west/south sides.
    void shift(int dx, int dy);

    const MorphometricProfile& profile() const noexcept { return profile_; }
    const std::vector<Point>& seeds() const noexcept { return seeds_; }
    long calls() const noexcept { return calls_; }

private:
    struct TipMemory {
        Point apex;
        Point cue;
        double ref_d = 0.0;
        double target = 0.0;  // grid units grown before the next cue refresh
    };

    void drive_neuron(const RealGrid& phi, const LabelMap& lm, int label, int id, Pixel p_initial, DriveResult& out);

    MorphometricProfile profile_;
    ModelParams params_;
    DriverOptions opts_;
    std::vector<Point> seeds_;
    std::uint64_t seed_;
    long calls_ = 0;
    std::map<int, int> div_index_;
    std::map<int, std::vector<TipMemory>> memory_;
    std::map<int, Point> axon_;
};

}  // namespace neurogrow
