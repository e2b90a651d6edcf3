#pragma once

// Frame blobs, per-case archives and the packed training dataset.
//
// Blob layout: 8-byte magic "NGFRAME1", int32 nx, int32 ny, then nx*ny
// little-endian float32 values in row-major order (x fastest).
//
// Archive directory: header.json, phi0.bin, theta0.bin and frame_0000.bin,
// frame_0001.bin, ... one per recorded frame.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "neurogrow/grid.hpp"

namespace neurogrow {

using FloatGrid = Grid<float>;

inline constexpr char kFrameMagic[8] = {'N', 'G', 'F', 'R', 'A', 'M', 'E', '1'};

void write_blob(const std::filesystem::path& path, const FloatGrid& g);
FloatGrid read_blob(const std::filesystem::path& path);

FloatGrid to_float(const RealGrid& g);
RealGrid to_real(const FloatGrid& g);

struct FrameRecord {
    long iteration = 0;
    int x0 = 0;  // position of pixel (0, 0) in the coordinates of the initial grid
    int y0 = 0;
    FloatGrid phi;

    int nx() const noexcept { return phi.nx(); }
    int ny() const noexcept { return phi.ny(); }
    friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct FrameArchive {
    std::string case_id;
    std::uint64_t seed = 0;
    int neuron_count = 0;
    std::vector<std::pair<int, int>> dims_history;
    FrameRecord phi0;   // initial phase field, origin (0, 0)
    FrameRecord theta;  // orientation field on the final canvas
    std::vector<FrameRecord> frames;

    friend bool operator==(const FrameArchive&, const FrameArchive&) = default;
};

void write_archive(const FrameArchive& archive, const std::filesystem::path& dir);
FrameArchive read_archive(const std::filesystem::path& dir);
/// Header only: frames carry iteration, dims and origin but no pixel data.
FrameArchive read_archive_header(const std::filesystem::path& dir);

/// Places a frame on a canvas of the given size and origin, zero elsewhere.
FloatGrid embed(const FrameRecord& frame, int nx, int ny, int x0, int y0);

/// Area-weighted average resampling onto tx x ty pixels.
FloatGrid downsample_area(const FloatGrid& src, int tx, int ty);
/// Nearest-neighbor resampling (pixel centers).
FloatGrid downsample_nearest(const FloatGrid& src, int tx, int ty);
/// 1 where value >= cut (ties go to 1), else 0.
FloatGrid binarize(const FloatGrid& g, float cut = 0.5f);

struct FrameSelection {
    std::vector<int> indices;
    bool flagged = false;  // fewer snapshots than requested
};

/// k evenly spaced indices out of n, always ending at n - 1: floor((j+1) n / k) - 1.
FrameSelection select_frames(int n, int k = 60);
std::vector<FrameRecord> extract_frames(const std::vector<FrameRecord>& snapshots, int k = 60,
                                        bool* flagged = nullptr);

/// Training cases for a 75/25 split: round-half-up of 0.75 n, kept within [1, n-1] for n >= 2.
int train_count(int n);

struct DatasetManifest {
    std::vector<std::string> cases;  // in packed order: training cases first
    int n_train = 0;
    int frames = 60;
    int height = 300;
    int width = 300;
    int channels = 3;
    long max_iteration = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<long>> iterations;  // per packed case, iteration of each frame

    std::vector<std::size_t> input_shape() const;
    std::vector<std::size_t> target_shape() const;
    std::string to_json_text() const;
};

/// Shuffles the cases with the seed, splits them and fixes the frame selection.
/// Throws ConfigError listing cases whose frame counts differ or fall short of k.
DatasetManifest plan_dataset(const std::vector<FrameArchive>& headers, std::uint64_t seed, int k = 60,
                             int size = 300);

/// Writes the [phi0, theta0, iter] input planes (HWC order) and the binary target
/// for frame `f` of a case into caller buffers of size*size*3 and size*size floats.
void render_sample(const FrameArchive& archive, const std::vector<int>& frame_indices, int f,
                   const DatasetManifest& manifest, float* inputs, float* targets);

struct Dataset {
    DatasetManifest manifest;
    std::vector<float> inputs;   // input_shape()
    std::vector<float> targets;  // target_shape()
};

Dataset assemble_dataset(const std::vector<FrameArchive>& archives, std::uint64_t seed, int k = 60, int size = 300);

/// Streams the dataset of all archives under `cases_dir` to `<stem>_inputs.npy`
/// and `<stem>_targets.npy` next to the manifest written at `manifest_path`.
DatasetManifest export_dataset(const std::filesystem::path& cases_dir, const std::filesystem::path& manifest_path,
                               std::uint64_t seed, int k = 60, int size = 300);

/// Archive directories (those holding header.json) directly under dir, sorted by name.
std::vector<std::filesystem::path> list_archives(const std::filesystem::path& dir);

/// NumPy .npy v1.0 header for a little-endian float32 C-order array.
std::string npy_header(const std::vector<std::size_t>& shape);

}  // namespace neurogrow
