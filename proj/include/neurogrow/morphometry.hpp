#pragma once

// Image-domain analysis of a phase field: 8-connected components, quasi-Euclidean
// geodesic distance, generation-labelled neurite tracing, box-filter tip
// detection and per-neurite shape measures. Everything works in pixel space,
// pixel (x, y) being the field value at Greville point (x, y).

#include <limits>
#include <vector>

#include "neurogrow/grid.hpp"

namespace neurogrow {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LabelMap {
    LabelGrid labels;  // 0 = background, components numbered from 1
    int n_neu = 0;
    std::vector<Point> centroids;  // centroids[k] belongs to label k + 1
    std::vector<int> areas;
};

LabelMap label_components(const Mask& mask);
LabelMap connected_components(const RealGrid& phi, double threshold = 0.5);

Mask threshold_mask(const RealGrid& phi, double threshold = 0.5);
Mask component_mask(const LabelMap& lm, int label);

struct GeodesicField {
    RealGrid d;  // kInf off the reachable part of the mask
    Pixel source;
};

/// Shortest 8-neighbor path lengths (costs 1 and sqrt 2) inside the mask.
GeodesicField geodesic_distance(const Mask& mask, Pixel source);
/// Multi-source variant: every listed pixel inside the mask starts at distance 0.
RealGrid geodesic_distance(const Mask& mask, const std::vector<Pixel>& sources);

/// Mask pixel nearest to p (Euclidean, lowest index on ties); throws DomainError on an empty mask.
Pixel nearest_mask_pixel(const Mask& mask, Point p);

enum class Generation { primary = 1, secondary = 2, tertiary = 3 };

struct NeuriteTrace {
    std::vector<Pixel> path;  // tip first, root last
    Generation generation = Generation::primary;
    double l_neu = 0.0;

    Pixel tip() const { return path.front(); }
    Pixel root() const { return path.back(); }
};

struct TraceOptions {
    double zeta_soma = 20.0;
    double min_length = 3.0;  // shorter traces are treated as interface roughness
    int generations = 3;
};

struct TraceSet {
    std::vector<NeuriteTrace> traces;
    double l_total = 0.0;
    Pixel p_initial;
    RealGrid d_geo;  // first-generation geodesic field from p_initial
};

/// Traces the neurites of the component of `neuron` containing p_initial.
TraceSet trace_neurites(const Mask& neuron, Pixel p_initial, const TraceOptions& opts = {});
/// Thresholds phi at 0.5 and traces from the pixel nearest p_initial.
TraceSet trace_neurites(const RealGrid& phi, Point p_initial, double zeta_soma = 20.0);

/// I = phi convolved with an l_kl x l_kl box (zero padded), zeroed where phi < 0.5.
RealGrid box_convolve(const RealGrid& phi, int l_kl = 20);

struct TipOptions {
    double zeta_tip = 0.4;
    int gamma_tip = 10;
    int l_kl = 20;
};

struct Tip {
    Point position;  // centroid of the low-intensity region
    Pixel apex;      // region pixel of minimum intensity: the extremity of the neurite
    int area = 0;
};

struct TipSet {
    std::vector<Tip> tips;
    double zeta_tip = 0.4;
    bool flagged = false;  // tuning could not meet the requested range

    int n_tips() const noexcept { return int(tips.size()); }
};

/// Tips of every component; each component is scored against its own intensity
/// maximum with the other components removed from the field.
TipSet detect_tips(const RealGrid& phi, const TipOptions& opts = {});
/// Same as detect_tips with a precomputed intensity field.
TipSet detect_tips_from_intensity(const RealGrid& phi, const RealGrid& intensity, const TipOptions& opts);

/// l_neu divided by the tip-root chord; DomainError when the endpoints coincide.
double tortuosity(const NeuriteTrace& trace);

/// Unsigned direction changes (degrees) between consecutive segments of the
/// polyline resampled at a fixed arclength step.
std::vector<double> turning_angles(const std::vector<Point>& polyline, double resample_step = 5.0);
std::vector<double> turning_angles(const NeuriteTrace& trace, double resample_step = 5.0);

std::vector<Point> to_points(const std::vector<Pixel>& path);

struct MorphoFeatures {
    double l_total = 0.0;
    std::vector<double> tortuosity;
    double l_seg = 0.0;
    int n_e = 0;
    std::vector<double> turning_angles;
};

MorphoFeatures measure_features(const TraceSet& traces, const TipSet& tips, double resample_step = 5.0);

}  // namespace neurogrow
