#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "xct/degradation.hpp"
#include "xct/errors.hpp"
#include "xct/geometry.hpp"
#include "xct/phantom.hpp"
#include "xct/preprocess.hpp"

namespace xct {

using json = nlohmann::json;

// Aggregated pipeline configuration. A named preset seeds geometry,
// detector and scan blocks; any field present in the file overrides it.
struct PipelineConfig {
    std::string preset; // "", "chip" or "insect"

    double sdd_mm = 750.0;
    double object_to_sensor_mm = 190.0;

    DetectorSpec detector{256, 320, 5.2, 4095.0};
    ScanConfig scan{0.6, 360.0, 25.0, 100.0, "none"};

    struct PhantomBlock {
        std::string kind = "uniform_sphere";
        int grid_size = 64;
        double mu_mm_inv = 0.05;
        double radius_fraction = 0.4;
        double extent_mm = 0.0; // 0: auto, 75% of the magnified detector width
        double projector_step_fraction = 0.5;
        bool operator==(const PhantomBlock&) const = default;
    } phantom;

    struct DegradationBlock {
        double df0_mean = 200.0;
        double df0_sigma = 8.0;
        double ff0_mean = 1400.0;
        double ff0_sigma = 40.0;
        double gain_sigma = 0.03;
        double kd_per_s = 2e-5;
        double kf_per_s = 5e-6;
        double kd_scatter_frac = 0.3;
        double kf_scatter_frac = 0.3;
        int hot_pixels = 0;
        int dead_pixels = 0;
        bool noise = true;
        double edge_alpha_px2 = 0.0;
        bool operator==(const DegradationBlock&) const = default;
    } degradation;

    struct AcquisitionBlock {
        std::string mode = "fixed"; // "fixed" or "adaptive"
        int frames_per_angle = 1;
        int n_ref = 16;
        double center_offset_px = 0.0;   // injected axis offset (simulation)
        double detector_tilt_deg = 0.0;  // injected detector tilt (simulation)
        bool operator==(const AcquisitionBlock&) const = default;
    } acquisition;

    QefPolicy qef;
    double defect_k_mad = 5.0;

    struct FilterBlock {
        std::string kind = "ram-lak";
        int padding = 0;
        bool operator==(const FilterBlock&) const = default;
    } filter;

    struct GridBlock {
        int nx = 0, ny = 0, nz = 0; // 0: auto (detector width / magnification)
        double voxel_mm = 0.0;
        bool operator==(const GridBlock&) const = default;
    } grid;

    struct AlignBlock {
        bool enabled = true;
        bool manual = false; // when set, tilt_deg/center_offset_px are used as-is
        double tilt_deg = 0.0;
        double center_offset_px = 0.0;
        double tilt_range_deg = 3.0;
        double tilt_step_deg = 0.05;
        double offset_range_px = 50.0;
        double offset_step_px = 0.25;
        int max_pairs = 5;
        bool operator==(const AlignBlock&) const = default;
    } align;

    struct IoBlock {
        std::string run_dir = "run";
        std::string dtype = "f32le";
        bool write_ideal = true;
        int slices_per_axis = 1;
        bool operator==(const IoBlock&) const = default;
    } io;

    std::uint64_t seed = 12345;
    int threads = 1;
    int slabs = 0;

    bool operator==(const PipelineConfig& o) const {
        return preset == o.preset && sdd_mm == o.sdd_mm &&
               object_to_sensor_mm == o.object_to_sensor_mm && detector.rows == o.detector.rows &&
               detector.cols == o.detector.cols &&
               detector.pixel_pitch_um == o.detector.pixel_pitch_um &&
               detector.max_value == o.detector.max_value &&
               scan.angular_step_deg == o.scan.angular_step_deg &&
               scan.angular_range_deg == o.scan.angular_range_deg &&
               scan.tube_voltage_kv == o.scan.tube_voltage_kv &&
               scan.tube_current_ua == o.scan.tube_current_ua &&
               scan.filter_description == o.scan.filter_description && phantom == o.phantom &&
               degradation == o.degradation && acquisition == o.acquisition &&
               qef.threshold == o.qef.threshold && qef.band_row_begin == o.qef.band_row_begin &&
               qef.band_row_end == o.qef.band_row_end && qef.n_min == o.qef.n_min &&
               qef.n_max == o.qef.n_max && qef.growth_step == o.qef.growth_step &&
               defect_k_mad == o.defect_k_mad && filter == o.filter && grid == o.grid &&
               align == o.align && io == o.io && seed == o.seed && threads == o.threads &&
               slabs == o.slabs;
    }

    ConeBeamGeometry geometry() const {
        return ConeBeamGeometry::from_object_to_sensor(sdd_mm, object_to_sensor_mm);
    }

    double phantom_extent_mm() const {
        if (phantom.extent_mm > 0.0) return phantom.extent_mm;
        return 0.75 * detector.width_mm() / magnification(geometry());
    }

    Phantom make_configured_phantom() const {
        return make_phantom(phantom.kind, phantom.grid_size, phantom.mu_mm_inv,
                            phantom.radius_fraction, phantom_extent_mm());
    }

    DegradationParams degradation_params() const {
        DegradationParams p;
        p.df0_mean = degradation.df0_mean;
        p.df0_sigma = degradation.df0_sigma;
        p.ff0_mean = degradation.ff0_mean;
        p.ff0_sigma = degradation.ff0_sigma;
        p.gain_sigma = degradation.gain_sigma;
        p.kd_per_s = degradation.kd_per_s;
        p.kf_per_s = degradation.kf_per_s;
        p.kd_scatter_frac = degradation.kd_scatter_frac;
        p.kf_scatter_frac = degradation.kf_scatter_frac;
        p.hot_pixel_count = degradation.hot_pixels;
        p.dead_pixel_count = degradation.dead_pixels;
        p.noise = degradation.noise;
        p.edge_alpha_px2 = degradation.edge_alpha_px2;
        return p;
    }

    void validate() const {
        geometry().validate();
        detector.validate();
        scan.validate();
        qef.validate();
        if (acquisition.mode != "fixed" && acquisition.mode != "adaptive")
            throw config_error("acquisition.mode must be 'fixed' or 'adaptive'");
        if (acquisition.frames_per_angle < 1)
            throw config_error("acquisition.frames_per_angle must be >= 1");
        if (acquisition.n_ref < 1) throw config_error("acquisition.n_ref must be >= 1");
        if (!(defect_k_mad > 0.0)) throw config_error("defects.k_mad must be positive");
        if (io.dtype != "f32le" && io.dtype != "f64le")
            throw config_error("io.dtype must be 'f32le' or 'f64le'");
        if (io.run_dir.empty()) throw config_error("io.run_dir must be set");
        if (threads < 0) throw config_error("threads must be >= 0");
        if (slabs < 0) throw config_error("slabs must be >= 0");
        filter_kind_from_string_checked(filter.kind);
        phantom_kind_from_string(phantom.kind);
        if (qef.band_row_end > detector.rows)
            throw config_error("qef.band_rows exceeds the detector height");
    }

  private:
    static void filter_kind_from_string_checked(const std::string& s) {
        if (s != "ram-lak" && s != "hann") throw config_error("filter.kind must be 'ram-lak' or 'hann'");
    }
};

namespace detail {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

inline int line_of_byte(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

} // namespace detail

inline json config_to_json(const PipelineConfig& c) {
    json j;
    if (!c.preset.empty()) j["preset"] = c.preset;
    j["geometry"] = {{"sdd_mm", c.sdd_mm}, {"object_to_sensor_mm", c.object_to_sensor_mm}};
    j["detector"] = {{"rows", c.detector.rows},
                     {"cols", c.detector.cols},
                     {"pixel_pitch_um", c.detector.pixel_pitch_um},
                     {"max_value", c.detector.max_value}};
    j["scan"] = {{"angular_step_deg", c.scan.angular_step_deg},
                 {"angular_range_deg", c.scan.angular_range_deg},
                 {"tube_voltage_kv", c.scan.tube_voltage_kv},
                 {"tube_current_ua", c.scan.tube_current_ua},
                 {"filter_description", c.scan.filter_description}};
    j["phantom"] = {{"kind", c.phantom.kind},
                    {"grid_size", c.phantom.grid_size},
                    {"mu_mm_inv", c.phantom.mu_mm_inv},
                    {"radius_fraction", c.phantom.radius_fraction},
                    {"extent_mm", c.phantom.extent_mm},
                    {"projector_step_fraction", c.phantom.projector_step_fraction}};
    j["degradation"] = {{"df0_mean", c.degradation.df0_mean},
                        {"df0_sigma", c.degradation.df0_sigma},
                        {"ff0_mean", c.degradation.ff0_mean},
                        {"ff0_sigma", c.degradation.ff0_sigma},
                        {"gain_sigma", c.degradation.gain_sigma},
                        {"kd_per_s", c.degradation.kd_per_s},
                        {"kf_per_s", c.degradation.kf_per_s},
                        {"kd_scatter_frac", c.degradation.kd_scatter_frac},
                        {"kf_scatter_frac", c.degradation.kf_scatter_frac},
                        {"hot_pixels", c.degradation.hot_pixels},
                        {"dead_pixels", c.degradation.dead_pixels},
                        {"noise", c.degradation.noise},
                        {"edge_alpha_px2", c.degradation.edge_alpha_px2}};
    j["acquisition"] = {{"mode", c.acquisition.mode},
                        {"frames_per_angle", c.acquisition.frames_per_angle},
                        {"n_ref", c.acquisition.n_ref},
                        {"center_offset_px", c.acquisition.center_offset_px},
                        {"detector_tilt_deg", c.acquisition.detector_tilt_deg}};
    j["qef"] = {{"threshold", c.qef.threshold},
                {"band_row_begin", c.qef.band_row_begin},
                {"band_row_end", c.qef.band_row_end},
                {"n_min", c.qef.n_min},
                {"n_max", c.qef.n_max},
                {"growth_step", c.qef.growth_step}};
    j["defects"] = {{"k_mad", c.defect_k_mad}};
    j["filter"] = {{"kind", c.filter.kind}, {"padding", c.filter.padding}};
    j["grid"] = {{"nx", c.grid.nx}, {"ny", c.grid.ny}, {"nz", c.grid.nz}, {"voxel_mm", c.grid.voxel_mm}};
    j["align"] = {{"enabled", c.align.enabled},
                  {"manual", c.align.manual},
                  {"tilt_deg", c.align.tilt_deg},
                  {"center_offset_px", c.align.center_offset_px},
                  {"tilt_range_deg", c.align.tilt_range_deg},
                  {"tilt_step_deg", c.align.tilt_step_deg},
                  {"offset_range_px", c.align.offset_range_px},
                  {"offset_step_px", c.align.offset_step_px},
                  {"max_pairs", c.align.max_pairs}};
    j["io"] = {{"run_dir", c.io.run_dir},
               {"dtype", c.io.dtype},
               {"write_ideal", c.io.write_ideal},
               {"slices_per_axis", c.io.slices_per_axis}};
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["slabs"] = c.slabs;
    return j;
}

inline PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    detail::read_field(j, "preset", c.preset);
    if (!c.preset.empty()) {
        const ScanPreset p = preset_by_name(c.preset);
        c.sdd_mm = p.geometry.sdd_mm;
        c.object_to_sensor_mm = p.geometry.object_to_sensor_mm();
        c.detector = p.detector;
        c.scan = p.scan;
    }
    if (j.contains("geometry")) {
        const json& g = j.at("geometry");
        detail::read_field(g, "sdd_mm", c.sdd_mm);
        if (g.contains("sod_mm")) c.object_to_sensor_mm = c.sdd_mm - g.at("sod_mm").get<double>();
        detail::read_field(g, "object_to_sensor_mm", c.object_to_sensor_mm);
    }
    if (j.contains("detector")) {
        const json& d = j.at("detector");
        detail::read_field(d, "rows", c.detector.rows);
        detail::read_field(d, "cols", c.detector.cols);
        detail::read_field(d, "pixel_pitch_um", c.detector.pixel_pitch_um);
        detail::read_field(d, "max_value", c.detector.max_value);
    }
    if (j.contains("scan")) {
        const json& s = j.at("scan");
        detail::read_field(s, "angular_step_deg", c.scan.angular_step_deg);
        detail::read_field(s, "angular_range_deg", c.scan.angular_range_deg);
        detail::read_field(s, "tube_voltage_kv", c.scan.tube_voltage_kv);
        detail::read_field(s, "tube_current_ua", c.scan.tube_current_ua);
        detail::read_field(s, "filter_description", c.scan.filter_description);
    }
    if (j.contains("phantom")) {
        const json& p = j.at("phantom");
        detail::read_field(p, "kind", c.phantom.kind);
        detail::read_field(p, "grid_size", c.phantom.grid_size);
        detail::read_field(p, "mu_mm_inv", c.phantom.mu_mm_inv);
        detail::read_field(p, "radius_fraction", c.phantom.radius_fraction);
        detail::read_field(p, "extent_mm", c.phantom.extent_mm);
        detail::read_field(p, "projector_step_fraction", c.phantom.projector_step_fraction);
    }
    if (j.contains("degradation")) {
        const json& d = j.at("degradation");
        detail::read_field(d, "df0_mean", c.degradation.df0_mean);
        detail::read_field(d, "df0_sigma", c.degradation.df0_sigma);
        detail::read_field(d, "ff0_mean", c.degradation.ff0_mean);
        detail::read_field(d, "ff0_sigma", c.degradation.ff0_sigma);
        detail::read_field(d, "gain_sigma", c.degradation.gain_sigma);
        detail::read_field(d, "kd_per_s", c.degradation.kd_per_s);
        detail::read_field(d, "kf_per_s", c.degradation.kf_per_s);
        detail::read_field(d, "kd_scatter_frac", c.degradation.kd_scatter_frac);
        detail::read_field(d, "kf_scatter_frac", c.degradation.kf_scatter_frac);
        detail::read_field(d, "hot_pixels", c.degradation.hot_pixels);
        detail::read_field(d, "dead_pixels", c.degradation.dead_pixels);
        detail::read_field(d, "noise", c.degradation.noise);
        detail::read_field(d, "edge_alpha_px2", c.degradation.edge_alpha_px2);
    }
    if (j.contains("acquisition")) {
        const json& a = j.at("acquisition");
        detail::read_field(a, "mode", c.acquisition.mode);
        detail::read_field(a, "frames_per_angle", c.acquisition.frames_per_angle);
        detail::read_field(a, "n_ref", c.acquisition.n_ref);
        detail::read_field(a, "center_offset_px", c.acquisition.center_offset_px);
        detail::read_field(a, "detector_tilt_deg", c.acquisition.detector_tilt_deg);
    }
    if (j.contains("qef")) {
        const json& q = j.at("qef");
        detail::read_field(q, "threshold", c.qef.threshold);
        detail::read_field(q, "band_row_begin", c.qef.band_row_begin);
        detail::read_field(q, "band_row_end", c.qef.band_row_end);
        detail::read_field(q, "n_min", c.qef.n_min);
        detail::read_field(q, "n_max", c.qef.n_max);
        detail::read_field(q, "growth_step", c.qef.growth_step);
    }
    if (j.contains("defects")) detail::read_field(j.at("defects"), "k_mad", c.defect_k_mad);
    if (j.contains("filter")) {
        detail::read_field(j.at("filter"), "kind", c.filter.kind);
        detail::read_field(j.at("filter"), "padding", c.filter.padding);
    }
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        detail::read_field(g, "nx", c.grid.nx);
        detail::read_field(g, "ny", c.grid.ny);
        detail::read_field(g, "nz", c.grid.nz);
        detail::read_field(g, "voxel_mm", c.grid.voxel_mm);
    }
    if (j.contains("align")) {
        const json& a = j.at("align");
        detail::read_field(a, "enabled", c.align.enabled);
        detail::read_field(a, "manual", c.align.manual);
        detail::read_field(a, "tilt_deg", c.align.tilt_deg);
        detail::read_field(a, "center_offset_px", c.align.center_offset_px);
        detail::read_field(a, "tilt_range_deg", c.align.tilt_range_deg);
        detail::read_field(a, "tilt_step_deg", c.align.tilt_step_deg);
        detail::read_field(a, "offset_range_px", c.align.offset_range_px);
        detail::read_field(a, "offset_step_px", c.align.offset_step_px);
        detail::read_field(a, "max_pairs", c.align.max_pairs);
    }
    if (j.contains("io")) {
        const json& io = j.at("io");
        detail::read_field(io, "run_dir", c.io.run_dir);
        detail::read_field(io, "dtype", c.io.dtype);
        detail::read_field(io, "write_ideal", c.io.write_ideal);
        detail::read_field(io, "slices_per_axis", c.io.slices_per_axis);
    }
    detail::read_field(j, "seed", c.seed);
    detail::read_field(j, "threads", c.threads);
    detail::read_field(j, "slabs", c.slabs);
    return c;
}

inline std::string serialize_config(const PipelineConfig& c) { return config_to_json(c).dump(2) + "\n"; }

inline PipelineConfig parse_config(const std::string& text, const std::string& origin = "config") {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error(origin + ":" + std::to_string(detail::line_of_byte(text, e.byte)) +
                           ": " + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const json::exception& e) {
        throw config_error(origin + ": " + e.what());
    }
}

inline PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

// FNV-1a over the canonical serialization; recorded in run manifests so a
// volume can be traced back to the exact configuration that produced it.
inline std::string config_hash(const PipelineConfig& c) {
    const std::string s = serialize_config(c);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace xct
