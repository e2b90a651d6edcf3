#include "neurogrow/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace neurogrow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
T to_le(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
}

template <class T>
void put(std::ostream& os, T v) {
    v = to_le(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return to_le(v);
}

void write_floats(std::ostream& os, const float* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data), std::streamsize(n * sizeof(float)));
    } else {
        for (std::size_t i = 0; i < n; ++i) put(os, data[i]);
    }
}

std::string frame_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04zu.bin", i);
    return buf;
}

json frame_meta(const FrameRecord& f) {
    return {{"iteration", f.iteration}, {"nx", f.nx()}, {"ny", f.ny()}, {"x0", f.x0}, {"y0", f.y0}};
}

FrameRecord meta_frame(const json& j) {
    FrameRecord f;
    f.iteration = j.at("iteration").get<long>();
    f.x0 = j.at("x0").get<int>();
    f.y0 = j.at("y0").get<int>();
    f.phi = FloatGrid(j.at("nx").get<int>(), j.at("ny").get<int>(), 0.0f);
    return f;
}

void load_into(FrameRecord& f, const fs::path& path) {
    FloatGrid g = read_blob(path);
    if (g.nx() != f.nx() || g.ny() != f.ny())
        throw ConfigError("blob " + path.string() + " dims disagree with the archive header");
    f.phi = std::move(g);
}

// Overlap weights of target cells [i n/t, (i+1) n/t) with unit source cells.
std::vector<std::vector<std::pair<int, double>>> area_weights(int n, int t) {
    std::vector<std::vector<std::pair<int, double>>> w(t);
    const double scale = double(n) / t;
    for (int i = 0; i < t; ++i) {
        const double a = i * scale, b = (i + 1) * scale;
        for (int s = int(std::floor(a)); s < n && s < b; ++s) {
            const double o = std::min(b, double(s + 1)) - std::max(a, double(s));
            if (o > 1e-12) w[i].push_back({s, o / scale});
        }
    }
    return w;
}

}  // namespace

void write_blob(const fs::path& path, const FloatGrid& g) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    os.write(kFrameMagic, sizeof kFrameMagic);
    put<std::int32_t>(os, g.nx());
    put<std::int32_t>(os, g.ny());
    write_floats(os, g.data().data(), g.size());
    if (!os) throw ConfigError("write failed for " + path.string());
}

FloatGrid read_blob(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + path.string());
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kFrameMagic, sizeof magic) != 0)
        throw ConfigError(path.string() + " is not a frame blob");
    const auto nx = get<std::int32_t>(is);
    const auto ny = get<std::int32_t>(is);
    if (!is || nx < 0 || ny < 0) throw ConfigError(path.string() + ": bad dimensions");
    FloatGrid g(nx, ny);
    for (auto& v : g.data()) v = get<float>(is);
    if (!is) throw ConfigError(path.string() + ": truncated blob");
    return g;
}

FloatGrid to_float(const RealGrid& g) {
    FloatGrid out(g.nx(), g.ny());
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = float(g[k]);
    return out;
}

RealGrid to_real(const FloatGrid& g) {
    RealGrid out(g.nx(), g.ny());
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = g[k];
    return out;
}

void write_archive(const FrameArchive& a, const fs::path& dir) {
    fs::create_directories(dir);
    json h;
    h["case_id"] = a.case_id;
    h["seed"] = a.seed;
    h["neuron_count"] = a.neuron_count;
    h["dims_history"] = json::array();
    for (const auto& [nx, ny] : a.dims_history) h["dims_history"].push_back({nx, ny});
    h["phi0"] = frame_meta(a.phi0);
    h["theta0"] = frame_meta(a.theta);
    h["frame_count"] = a.frames.size();
    h["frames"] = json::array();
    for (const auto& f : a.frames) h["frames"].push_back(frame_meta(f));
    std::ofstream os(dir / "header.json");
    if (!os) throw ConfigError("cannot write archive header in " + dir.string());
    os << h.dump(2) << '\n';

    write_blob(dir / "phi0.bin", a.phi0.phi);
    write_blob(dir / "theta0.bin", a.theta.phi);
    for (std::size_t i = 0; i < a.frames.size(); ++i) write_blob(dir / frame_name(i), a.frames[i].phi);
}

FrameArchive read_archive_header(const fs::path& dir) {
    std::ifstream is(dir / "header.json");
    if (!is) throw ConfigError("no archive header in " + dir.string());
    FrameArchive a;
    try {
        const json h = json::parse(is);
        a.case_id = h.at("case_id").get<std::string>();
        a.seed = h.at("seed").get<std::uint64_t>();
        a.neuron_count = h.at("neuron_count").get<int>();
        for (const auto& d : h.at("dims_history")) a.dims_history.emplace_back(d.at(0).get<int>(), d.at(1).get<int>());
        a.phi0 = meta_frame(h.at("phi0"));
        a.theta = meta_frame(h.at("theta0"));
        for (const auto& f : h.at("frames")) a.frames.push_back(meta_frame(f));
        if (h.at("frame_count").get<std::size_t>() != a.frames.size())
            throw ConfigError(dir.string() + ": frame count disagrees with the frame list");
    } catch (const json::exception& e) {
        throw ConfigError("malformed archive header in " + dir.string() + ": " + e.what());
    }
    return a;
}

FrameArchive read_archive(const fs::path& dir) {
    FrameArchive a = read_archive_header(dir);
    load_into(a.phi0, dir / "phi0.bin");
    load_into(a.theta, dir / "theta0.bin");
    for (std::size_t i = 0; i < a.frames.size(); ++i) load_into(a.frames[i], dir / frame_name(i));
    return a;
}

FloatGrid embed(const FrameRecord& f, int nx, int ny, int x0, int y0) {
    FloatGrid out(nx, ny, 0.0f);
    const int ox = f.x0 - x0, oy = f.y0 - y0;
    for (int y = 0; y < f.ny(); ++y)
        for (int x = 0; x < f.nx(); ++x)
            if (out.contains(x + ox, y + oy)) out(x + ox, y + oy) = f.phi(x, y);
    return out;
}

FloatGrid downsample_area(const FloatGrid& src, int tx, int ty) {
    if (src.nx() < 1 || src.ny() < 1 || tx < 1 || ty < 1) throw DomainError("resampling needs nonempty grids");
    if (src.nx() == tx && src.ny() == ty) return src;
    const auto wx = area_weights(src.nx(), tx);
    const auto wy = area_weights(src.ny(), ty);
    std::vector<double> rows(std::size_t(src.ny()) * tx, 0.0);
    for (int y = 0; y < src.ny(); ++y)
        for (int i = 0; i < tx; ++i) {
            double s = 0.0;
            for (const auto& [x, w] : wx[i]) s += w * src(x, y);
            rows[std::size_t(y) * tx + i] = s;
        }
    FloatGrid out(tx, ty);
    for (int j = 0; j < ty; ++j)
        for (int i = 0; i < tx; ++i) {
            double s = 0.0;
            for (const auto& [y, w] : wy[j]) s += w * rows[std::size_t(y) * tx + i];
            out(i, j) = float(s);
        }
    return out;
}

FloatGrid downsample_nearest(const FloatGrid& src, int tx, int ty) {
    if (src.nx() < 1 || src.ny() < 1 || tx < 1 || ty < 1) throw DomainError("resampling needs nonempty grids");
    FloatGrid out(tx, ty);
    for (int j = 0; j < ty; ++j) {
        const int y = std::min(src.ny() - 1, int((j + 0.5) * src.ny() / ty));
        for (int i = 0; i < tx; ++i) {
            const int x = std::min(src.nx() - 1, int((i + 0.5) * src.nx() / tx));
            out(i, j) = src(x, y);
        }
    }
    return out;
}

FloatGrid binarize(const FloatGrid& g, float cut) {
    FloatGrid out(g.nx(), g.ny());
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = g[k] >= cut ? 1.0f : 0.0f;
    return out;
}

FrameSelection select_frames(int n, int k) {
    FrameSelection s;
    if (n <= 0 || k <= 0) return s;
    if (n < k) {
        s.indices.resize(n);
        std::iota(s.indices.begin(), s.indices.end(), 0);
        s.flagged = true;
        return s;
    }
    for (int j = 0; j < k; ++j) s.indices.push_back(int((long(j) + 1) * n / k) - 1);
    return s;
}

std::vector<FrameRecord> extract_frames(const std::vector<FrameRecord>& snapshots, int k, bool* flagged) {
    const FrameSelection s = select_frames(int(snapshots.size()), k);
    if (flagged) *flagged = s.flagged;
    std::vector<FrameRecord> out;
    for (int i : s.indices) out.push_back(snapshots[i]);
    return out;
}

int train_count(int n) {
    if (n < 2) return n;
    const int t = int(std::floor(0.75 * n + 0.5));
    return std::clamp(t, 1, n - 1);
}

std::vector<std::size_t> DatasetManifest::input_shape() const {
    return {cases.size(), std::size_t(frames), std::size_t(height), std::size_t(width), std::size_t(channels)};
}

std::vector<std::size_t> DatasetManifest::target_shape() const {
    return {cases.size(), std::size_t(frames), std::size_t(height), std::size_t(width), 1};
}

std::string DatasetManifest::to_json_text() const {
    json j;
    j["cases"] = cases;
    j["split"] = {{"train", std::vector<std::string>(cases.begin(), cases.begin() + n_train)},
                  {"test", std::vector<std::string>(cases.begin() + n_train, cases.end())}};
    j["n_train"] = n_train;
    j["n_test"] = int(cases.size()) - n_train;
    j["channels"] = {"phi0", "theta0", "iter"};
    j["target"] = "phi(iter) >= 0.5";
    j["input_shape"] = input_shape();
    j["target_shape"] = target_shape();
    j["max_iteration"] = max_iteration;
    j["seed"] = seed;
    j["iterations"] = iterations;
    return j.dump(2);
}

DatasetManifest plan_dataset(const std::vector<FrameArchive>& headers, std::uint64_t seed, int k, int size) {
    std::string offenders;
    for (const auto& a : headers) {
        if (int(a.frames.size()) < k)
            offenders += " " + a.case_id + " (" + std::to_string(a.frames.size()) + " frames)";
    }
    if (!offenders.empty())
        throw ConfigError("cases with fewer than " + std::to_string(k) + " frames:" + offenders);
    if (headers.empty()) throw ConfigError("no cases to assemble");
    std::set<std::string> ids;
    for (const auto& a : headers)
        if (!ids.insert(a.case_id).second) throw ConfigError("duplicate case id " + a.case_id);

    std::vector<int> order(headers.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    DatasetManifest m;
    m.frames = k;
    m.height = m.width = size;
    m.seed = seed;
    m.n_train = train_count(int(headers.size()));
    for (int c : order) {
        const auto& a = headers[c];
        m.cases.push_back(a.case_id);
        std::vector<long> its;
        for (int i : select_frames(int(a.frames.size()), k).indices) {
            its.push_back(a.frames[i].iteration);
            m.max_iteration = std::max(m.max_iteration, a.frames[i].iteration);
        }
        m.iterations.push_back(std::move(its));
    }
    return m;
}

void render_sample(const FrameArchive& a, const std::vector<int>& frame_indices, int f, const DatasetManifest& m,
                   float* inputs, float* targets) {
    const int s = m.width;
    const FrameRecord& canvas = a.theta;
    const int cx = canvas.nx(), cy = canvas.ny();
    const FloatGrid phi0 = downsample_area(embed(a.phi0, cx, cy, canvas.x0, canvas.y0), s, s);
    const FloatGrid theta = downsample_nearest(canvas.phi, s, s);
    const FrameRecord& fr = a.frames.at(frame_indices.at(f));
    const FloatGrid target = binarize(downsample_area(embed(fr, cx, cy, canvas.x0, canvas.y0), s, s));
    const float iter = m.max_iteration > 0 ? float(double(fr.iteration) / double(m.max_iteration)) : 0.0f;
    for (std::size_t p = 0; p < std::size_t(s) * s; ++p) {
        inputs[3 * p + 0] = std::clamp(phi0[p], 0.0f, 1.0f);
        inputs[3 * p + 1] = std::clamp(theta[p], 0.0f, 1.0f);
        inputs[3 * p + 2] = iter;
        targets[p] = target[p];
    }
}

Dataset assemble_dataset(const std::vector<FrameArchive>& archives, std::uint64_t seed, int k, int size) {
    Dataset d;
    d.manifest = plan_dataset(archives, seed, k, size);
    const std::size_t plane = std::size_t(size) * size;
    d.inputs.assign(archives.size() * k * plane * 3, 0.0f);
    d.targets.assign(archives.size() * k * plane, 0.0f);
    for (std::size_t c = 0; c < d.manifest.cases.size(); ++c) {
        const auto it = std::find_if(archives.begin(), archives.end(),
                                     [&](const FrameArchive& a) { return a.case_id == d.manifest.cases[c]; });
        const auto idx = select_frames(int(it->frames.size()), k).indices;
        for (int f = 0; f < k; ++f) {
            const std::size_t s = c * k + f;
            render_sample(*it, idx, f, d.manifest, d.inputs.data() + s * plane * 3, d.targets.data() + s * plane);
        }
    }
    return d;
}

std::vector<fs::path> list_archives(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " is not a directory");
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && fs::exists(e.path() / "header.json")) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::string npy_header(const std::vector<std::size_t>& shape) {
    std::ostringstream dict;
    dict << "{'descr': '<f4', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) dict << (i ? ", " : "") << shape[i];
    if (shape.size() == 1) dict << ',';
    dict << "), }";
    std::string body = dict.str();
    const std::size_t pre = 10;  // magic, version, header length
    std::size_t total = pre + body.size() + 1;
    body.append((64 - total % 64) % 64, ' ');
    body.push_back('\n');
    std::string out("\x93NUMPY\x01\x00", 8);
    const auto len = static_cast<std::uint16_t>(body.size());
    out.push_back(char(len & 0xff));
    out.push_back(char(len >> 8));
    return out + body;
}

DatasetManifest export_dataset(const fs::path& cases_dir, const fs::path& manifest_path, std::uint64_t seed, int k,
                               int size) {
    const auto dirs = list_archives(cases_dir);
    std::vector<FrameArchive> headers;
    for (const auto& d : dirs) headers.push_back(read_archive_header(d));
    const DatasetManifest m = plan_dataset(headers, seed, k, size);

    const fs::path stem = manifest_path.parent_path() / manifest_path.stem();
    const fs::path in_path = stem.string() + "_inputs.npy";
    const fs::path tg_path = stem.string() + "_targets.npy";
    if (!manifest_path.parent_path().empty()) fs::create_directories(manifest_path.parent_path());
    std::ofstream in(in_path, std::ios::binary), tg(tg_path, std::ios::binary);
    if (!in || !tg) throw ConfigError("cannot write dataset arrays next to " + manifest_path.string());
    in << npy_header(m.input_shape());
    tg << npy_header(m.target_shape());

    const std::size_t plane = std::size_t(size) * size;
    std::vector<float> ibuf(plane * 3), tbuf(plane);
    for (const auto& id : m.cases) {
        const auto pos = std::find_if(headers.begin(), headers.end(), [&](const FrameArchive& a) { return a.case_id == id; });
        const FrameArchive a = read_archive(dirs[pos - headers.begin()]);
        const auto idx = select_frames(int(a.frames.size()), k).indices;
        for (int f = 0; f < k; ++f) {
            render_sample(a, idx, f, m, ibuf.data(), tbuf.data());
            write_floats(in, ibuf.data(), ibuf.size());
            write_floats(tg, tbuf.data(), tbuf.size());
        }
    }
    if (!in || !tg) throw ConfigError("dataset write failed");

    json j = json::parse(m.to_json_text());
    j["inputs_file"] = in_path.filename().string();
    j["targets_file"] = tg_path.filename().string();
    std::ofstream mo(manifest_path);
    if (!mo) throw ConfigError("cannot write " + manifest_path.string());
    mo << j.dump(2) << '\n';
    return m;
}

}  // namespace neurogrow
