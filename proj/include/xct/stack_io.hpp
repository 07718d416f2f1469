#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "xct/acquisition.hpp"
#include "xct/errors.hpp"
#include "xct/image.hpp"
#include "xct/volume.hpp"

namespace xct {

namespace fs = std::filesystem;

// --- raw pixel buffers --------------------------------------------------
//
// Frames are stored as raw little-endian floats, one concatenated file per
// stack, with a text header carrying the dimensions. dtype f32le is the
// default; f64le exists for oracle fixtures whose tolerances are tighter
// than float precision.

inline void append_pixels(std::ofstream& out, const Image& img, const std::string& dtype) {
    if (dtype == "f32le") {
        std::vector<float> buf(img.size());
        for (std::size_t i = 0; i < img.size(); ++i) buf[i] = static_cast<float>(img[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    } else if (dtype == "f64le") {
        out.write(reinterpret_cast<const char*>(img.data.data()),
                  static_cast<std::streamsize>(img.size() * sizeof(double)));
    } else {
        throw io_error("unsupported dtype '" + dtype + "' (expected f32le or f64le)");
    }
}

inline Image read_pixels(std::ifstream& in, int rows, int cols, const std::string& dtype) {
    Image img(rows, cols);
    if (dtype == "f32le") {
        std::vector<float> buf(img.size());
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) throw io_error("truncated pixel data");
        for (std::size_t i = 0; i < img.size(); ++i) img[i] = buf[i];
    } else if (dtype == "f64le") {
        in.read(reinterpret_cast<char*>(img.data.data()),
                static_cast<std::streamsize>(img.size() * sizeof(double)));
        if (!in) throw io_error("truncated pixel data");
    } else {
        throw io_error("unsupported dtype '" + dtype + "' (expected f32le or f64le)");
    }
    return img;
}

inline void write_image_file(const fs::path& path, const Image& img, const std::string& dtype) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    append_pixels(out, img, dtype);
}

inline Image read_image_file(const fs::path& path, int rows, int cols, const std::string& dtype) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read " + path.string());
    return read_pixels(in, rows, cols, dtype);
}

// --- key=value metadata -------------------------------------------------

using KeyValues = std::map<std::string, std::string>;

inline void write_key_values(const fs::path& path, const KeyValues& kv) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

inline KeyValues read_key_values(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read " + path.string());
    KeyValues kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw io_error(path.string() + ": malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

inline const std::string& require_field(const KeyValues& kv, const std::string& key,
                                        const fs::path& path) {
    auto it = kv.find(key);
    if (it == kv.end()) throw io_error(path.string() + ": missing field '" + key + "'");
    return it->second;
}

inline long field_int(const KeyValues& kv, const std::string& key, const fs::path& path) {
    const std::string& s = require_field(kv, key, path);
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw io_error(path.string() + ": field '" + key + "' is not an integer: '" + s + "'");
    }
}

inline double field_double(const KeyValues& kv, const std::string& key, const fs::path& path) {
    const std::string& s = require_field(kv, key, path);
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw io_error(path.string() + ": field '" + key + "' is not a number: '" + s + "'");
    }
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// --- projection stacks ----------------------------------------------------
//
// A run directory holds <prefix>_stack.meta, <prefix>_frames.bin and
// <prefix>_timing.tsv. The timing sidecar is the temporal record the
// correction stages depend on: one row per stored frame with the projection
// index it belongs to, its angle, the cumulative irradiation time, the
// frame count of its projection, and the measured quality factor.

struct SidecarRow {
    int index = 0; // projection index
    double angle_deg = 0.0;
    double cumulative_time_s = 0.0;
    int frames_averaged = 1;
    double qef_measured = 0.0;
};

struct StoredStack {
    std::string kind; // "raw" or "corrected"
    std::vector<Image> frames;
    std::vector<SidecarRow> timing;
    double pixel_pitch_um = 0.0;
    double detector_max = 0.0;
    std::string dtype = "f32le";
};

inline void save_stack(const fs::path& dir, const std::string& prefix, const StoredStack& stack) {
    fs::create_directories(dir);
    if (stack.frames.size() != stack.timing.size())
        throw io_error("save_stack: timing rows must match frame count");
    KeyValues kv;
    kv["format"] = "xct-stack";
    kv["kind"] = stack.kind;
    kv["rows"] = std::to_string(stack.frames.empty() ? 0 : stack.frames.front().rows);
    kv["cols"] = std::to_string(stack.frames.empty() ? 0 : stack.frames.front().cols);
    kv["count"] = std::to_string(stack.frames.size());
    kv["dtype"] = stack.dtype;
    kv["pixel_pitch_um"] = format_double(stack.pixel_pitch_um);
    kv["detector_max"] = format_double(stack.detector_max);
    kv["data"] = prefix + "_frames.bin";
    kv["timing"] = prefix + "_timing.tsv";
    write_key_values(dir / (prefix + "_stack.meta"), kv);

    std::ofstream data(dir / (prefix + "_frames.bin"), std::ios::binary);
    if (!data) throw io_error("cannot write frame data in " + dir.string());
    for (const Image& f : stack.frames) append_pixels(data, f, stack.dtype);

    std::ofstream tsv(dir / (prefix + "_timing.tsv"));
    if (!tsv) throw io_error("cannot write timing sidecar in " + dir.string());
    tsv << "# index\tangle_deg\tcumulative_time_s\tframes_averaged\tqef_measured\n";
    for (const SidecarRow& r : stack.timing)
        tsv << r.index << "\t" << format_double(r.angle_deg) << "\t"
            << format_double(r.cumulative_time_s) << "\t" << r.frames_averaged << "\t"
            << format_double(r.qef_measured) << "\n";
}

inline StoredStack load_stack(const fs::path& dir, const std::string& prefix) {
    const fs::path meta_path = dir / (prefix + "_stack.meta");
    const KeyValues kv = read_key_values(meta_path);
    StoredStack out;
    out.kind = require_field(kv, "kind", meta_path);
    const int rows = static_cast<int>(field_int(kv, "rows", meta_path));
    const int cols = static_cast<int>(field_int(kv, "cols", meta_path));
    const long count = field_int(kv, "count", meta_path);
    out.dtype = require_field(kv, "dtype", meta_path);
    out.pixel_pitch_um = field_double(kv, "pixel_pitch_um", meta_path);
    out.detector_max = field_double(kv, "detector_max", meta_path);
    if (rows < 1 || cols < 1 || count < 0) throw io_error(meta_path.string() + ": bad dimensions");

    const fs::path data_path = dir / require_field(kv, "data", meta_path);
    std::ifstream data(data_path, std::ios::binary);
    if (!data) throw io_error("cannot read " + data_path.string());
    out.frames.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) out.frames.push_back(read_pixels(data, rows, cols, out.dtype));

    const fs::path tsv_path = dir / require_field(kv, "timing", meta_path);
    std::ifstream tsv(tsv_path);
    if (!tsv) throw io_error("cannot read " + tsv_path.string());
    std::string line;
    double prev_time = -1.0;
    while (std::getline(tsv, line)) {
        if (line.empty() || line[0] == '#') continue;
        SidecarRow r;
        std::istringstream ss(line);
        if (!(ss >> r.index >> r.angle_deg >> r.cumulative_time_s >> r.frames_averaged >>
              r.qef_measured))
            throw io_error(tsv_path.string() + ": malformed row '" + line + "'");
        if (!(r.cumulative_time_s > prev_time))
            throw io_error(tsv_path.string() + ": cumulative_time_s must be strictly increasing");
        prev_time = r.cumulative_time_s;
        out.timing.push_back(r);
    }
    if (out.timing.size() != out.frames.size())
        throw io_error(tsv_path.string() + ": row count does not match frame count");
    return out;
}

// --- reference sets -------------------------------------------------------

inline void save_references(const fs::path& dir, const ReferencePair& start,
                            const ReferencePair& end, const std::string& dtype) {
    fs::create_directories(dir);
    KeyValues kv;
    kv["rows"] = std::to_string(start.dark.rows);
    kv["cols"] = std::to_string(start.dark.cols);
    kv["dtype"] = dtype;
    kv["n_frames"] = std::to_string(start.n_frames);
    kv["t_mid_start_s"] = format_double(start.t_mid_s);
    kv["t_mid_end_s"] = format_double(end.t_mid_s);
    write_key_values(dir / "refs.meta", kv);
    write_image_file(dir / "ref_dark_start.bin", start.dark, dtype);
    write_image_file(dir / "ref_flat_start.bin", start.flat, dtype);
    write_image_file(dir / "ref_dark_end.bin", end.dark, dtype);
    write_image_file(dir / "ref_flat_end.bin", end.flat, dtype);
}

inline std::pair<ReferencePair, ReferencePair> load_references(const fs::path& dir) {
    const fs::path meta_path = dir / "refs.meta";
    if (!fs::exists(meta_path))
        throw io_error("missing reference set: expected refs.meta, ref_dark_start.bin, "
                       "ref_flat_start.bin, ref_dark_end.bin, ref_flat_end.bin in " +
                       dir.string());
    const KeyValues kv = read_key_values(meta_path);
    const int rows = static_cast<int>(field_int(kv, "rows", meta_path));
    const int cols = static_cast<int>(field_int(kv, "cols", meta_path));
    const std::string dtype = require_field(kv, "dtype", meta_path);
    ReferencePair start, end;
    start.n_frames = end.n_frames = static_cast<int>(field_int(kv, "n_frames", meta_path));
    start.t_mid_s = field_double(kv, "t_mid_start_s", meta_path);
    end.t_mid_s = field_double(kv, "t_mid_end_s", meta_path);
    start.dark = read_image_file(dir / "ref_dark_start.bin", rows, cols, dtype);
    start.flat = read_image_file(dir / "ref_flat_start.bin", rows, cols, dtype);
    end.dark = read_image_file(dir / "ref_dark_end.bin", rows, cols, dtype);
    end.flat = read_image_file(dir / "ref_flat_end.bin", rows, cols, dtype);
    return {start, end};
}

// --- ground-truth record (simulation oracle) -------------------------------

inline void save_truth(const fs::path& dir, const GroundTruth& truth, const std::string& dtype,
                       bool write_ideal) {
    fs::create_directories(dir);
    KeyValues kv;
    kv["rows"] = std::to_string(truth.df0_ref.rows);
    kv["cols"] = std::to_string(truth.df0_ref.cols);
    kv["dtype"] = dtype;
    kv["ideal_count"] = std::to_string(write_ideal ? truth.ideal_transmission.size() : 0);
    write_key_values(dir / "truth.meta", kv);
    write_image_file(dir / "truth_df0.bin", truth.df0_ref, dtype);
    write_image_file(dir / "truth_ff0.bin", truth.ff0_ref, dtype);
    write_image_file(dir / "truth_kd.bin", truth.kd_eff, dtype);
    write_image_file(dir / "truth_kf.bin", truth.kf_eff, dtype);
    std::ofstream defects(dir / "truth_defects.tsv");
    defects << "# kind\trow\tcol\n";
    for (const auto& [r, c] : truth.hot_pixels) defects << "hot\t" << r << "\t" << c << "\n";
    for (const auto& [r, c] : truth.dead_pixels) defects << "dead\t" << r << "\t" << c << "\n";
    if (write_ideal) {
        std::ofstream data(dir / "truth_ideal.bin", std::ios::binary);
        for (const Image& t : truth.ideal_transmission) append_pixels(data, t, dtype);
    }
}

inline GroundTruth load_truth(const fs::path& dir) {
    const fs::path meta_path = dir / "truth.meta";
    const KeyValues kv = read_key_values(meta_path);
    const int rows = static_cast<int>(field_int(kv, "rows", meta_path));
    const int cols = static_cast<int>(field_int(kv, "cols", meta_path));
    const std::string dtype = require_field(kv, "dtype", meta_path);
    GroundTruth truth;
    truth.df0_ref = read_image_file(dir / "truth_df0.bin", rows, cols, dtype);
    truth.ff0_ref = read_image_file(dir / "truth_ff0.bin", rows, cols, dtype);
    truth.kd_eff = read_image_file(dir / "truth_kd.bin", rows, cols, dtype);
    truth.kf_eff = read_image_file(dir / "truth_kf.bin", rows, cols, dtype);
    std::ifstream defects(dir / "truth_defects.tsv");
    std::string line;
    while (std::getline(defects, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string kind;
        int r, c;
        if (!(ss >> kind >> r >> c)) throw io_error("truth_defects.tsv: malformed row");
        if (kind == "hot")
            truth.hot_pixels.emplace_back(r, c);
        else
            truth.dead_pixels.emplace_back(r, c);
    }
    const long ideal_count = field_int(kv, "ideal_count", meta_path);
    if (ideal_count > 0) {
        std::ifstream data(dir / "truth_ideal.bin", std::ios::binary);
        if (!data) throw io_error("cannot read truth_ideal.bin");
        for (long i = 0; i < ideal_count; ++i)
            truth.ideal_transmission.push_back(read_pixels(data, rows, cols, dtype));
    }
    return truth;
}

// --- reconstructed volumes --------------------------------------------------
//
// z-major raw little-endian float32 plus a text sidecar with dimensions,
// voxel size and origin.

inline void save_volume(const fs::path& dir, const Volume& vol) {
    fs::create_directories(dir);
    KeyValues kv;
    kv["nx"] = std::to_string(vol.nx);
    kv["ny"] = std::to_string(vol.ny);
    kv["nz"] = std::to_string(vol.nz);
    kv["voxel_x_mm"] = format_double(vol.voxel_mm[0]);
    kv["voxel_y_mm"] = format_double(vol.voxel_mm[1]);
    kv["voxel_z_mm"] = format_double(vol.voxel_mm[2]);
    kv["origin_x_mm"] = format_double(vol.origin_mm[0]);
    kv["origin_y_mm"] = format_double(vol.origin_mm[1]);
    kv["origin_z_mm"] = format_double(vol.origin_mm[2]);
    kv["dtype"] = "f32le";
    kv["order"] = "z-major";
    kv["data"] = "volume.bin";
    write_key_values(dir / "volume.meta", kv);
    std::ofstream out(dir / "volume.bin", std::ios::binary);
    if (!out) throw io_error("cannot write volume.bin");
    std::vector<float> buf(vol.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(vol.data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

inline Volume load_volume(const fs::path& dir) {
    const fs::path meta_path = dir / "volume.meta";
    const KeyValues kv = read_key_values(meta_path);
    Volume vol(static_cast<int>(field_int(kv, "nx", meta_path)),
               static_cast<int>(field_int(kv, "ny", meta_path)),
               static_cast<int>(field_int(kv, "nz", meta_path)),
               field_double(kv, "voxel_x_mm", meta_path));
    vol.voxel_mm = {field_double(kv, "voxel_x_mm", meta_path),
                    field_double(kv, "voxel_y_mm", meta_path),
                    field_double(kv, "voxel_z_mm", meta_path)};
    vol.origin_mm = {field_double(kv, "origin_x_mm", meta_path),
                     field_double(kv, "origin_y_mm", meta_path),
                     field_double(kv, "origin_z_mm", meta_path)};
    std::ifstream in(dir / require_field(kv, "data", meta_path), std::ios::binary);
    if (!in) throw io_error("cannot read volume data");
    std::vector<float> buf(vol.data.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw io_error("volume.bin: truncated data");
    for (std::size_t i = 0; i < buf.size(); ++i) vol.data[i] = buf[i];
    return vol;
}

// --- slice export -----------------------------------------------------------
//
// 16-bit binary PGM (big-endian sample order per the format); the applied
// window is recorded in a header comment.

inline void write_pgm16(const fs::path& path, const Image& img, double win_min, double win_max) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out << "P5\n# window_min=" << format_double(win_min) << " window_max=" << format_double(win_max)
        << "\n"
        << img.cols << " " << img.rows << "\n65535\n";
    const double scale = win_max > win_min ? 65535.0 / (win_max - win_min) : 0.0;
    std::vector<unsigned char> buf(img.size() * 2);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double t = (img[i] - win_min) * scale;
        const unsigned val = static_cast<unsigned>(std::clamp(t, 0.0, 65535.0));
        buf[2 * i] = static_cast<unsigned char>(val >> 8);
        buf[2 * i + 1] = static_cast<unsigned char>(val & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline Image volume_slice(const Volume& vol, int axis, int index) {
    if (axis == 2) { // axial: z fixed
        Image img(vol.ny, vol.nx);
        for (int iy = 0; iy < vol.ny; ++iy)
            for (int ix = 0; ix < vol.nx; ++ix) img.at(iy, ix) = vol.at(ix, iy, index);
        return img;
    }
    if (axis == 1) { // coronal: y fixed
        Image img(vol.nz, vol.nx);
        for (int iz = 0; iz < vol.nz; ++iz)
            for (int ix = 0; ix < vol.nx; ++ix) img.at(iz, ix) = vol.at(ix, index, iz);
        return img;
    }
    Image img(vol.nz, vol.ny); // sagittal: x fixed
    for (int iz = 0; iz < vol.nz; ++iz)
        for (int iy = 0; iy < vol.ny; ++iy) img.at(iz, iy) = vol.at(index, iy, iz);
    return img;
}

inline void export_slices(const fs::path& dir, const Volume& vol, int per_axis) {
    double lo = vol.data.empty() ? 0.0 : vol.data[0];
    double hi = lo;
    for (double v : vol.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const char* names[3] = {"sagittal", "coronal", "axial"};
    const int dims[3] = {vol.nx, vol.ny, vol.nz};
    for (int axis = 0; axis < 3; ++axis) {
        const int n = std::max(1, std::min(per_axis, dims[axis]));
        for (int k = 0; k < n; ++k) {
            const int index = static_cast<int>((k + 0.5) * dims[axis] / n);
            char name[64];
            std::snprintf(name, sizeof(name), "slice_%s_%03d.pgm", names[axis], index);
            write_pgm16(dir / name, volume_slice(vol, axis, index), lo, hi);
        }
    }
}

} // namespace xct
