#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "xct/errors.hpp"

namespace xct {

// Physical description of the sensor as used by the scan: array size,
// pixel pitch and the raw-count ceiling.
struct DetectorSpec {
    int rows = 0;
    int cols = 0;
    double pixel_pitch_um = 0.0;
    double max_value = 0.0;

    void validate() const {
        if (rows < 1 || cols < 1) throw config_error("detector: rows and cols must be >= 1");
        if (!(pixel_pitch_um > 0.0)) throw config_error("detector: pixel_pitch_um must be positive");
        if (!(max_value > 0.0)) throw config_error("detector: max_value must be positive");
    }

    double pitch_mm() const { return pixel_pitch_um * 1e-3; }
    double width_mm() const { return cols * pitch_mm(); }
    double height_mm() const { return rows * pitch_mm(); }
};

// Source/object/detector distances along the beam axis. The source-to-
// detector distance is fixed for the whole scan; the object moves along
// the axis, so constructors accept either the source-to-object distance
// or the object-to-sensor distance.
struct ConeBeamGeometry {
    double sdd_mm = 0.0; // source to detector
    double sod_mm = 0.0; // source to object (rotation axis)

    static ConeBeamGeometry from_sod(double sdd_mm, double sod_mm) {
        ConeBeamGeometry g{sdd_mm, sod_mm};
        g.validate();
        return g;
    }

    static ConeBeamGeometry from_object_to_sensor(double sdd_mm, double object_to_sensor_mm) {
        ConeBeamGeometry g{sdd_mm, sdd_mm - object_to_sensor_mm};
        g.validate();
        return g;
    }

    double object_to_sensor_mm() const { return sdd_mm - sod_mm; }

    void validate() const {
        if (!(sod_mm > 0.0)) throw config_error("geometry: source-to-object distance must be positive");
        if (!(sod_mm <= sdd_mm)) throw config_error("geometry: SOD must not exceed SDD");
    }
};

inline double magnification(const ConeBeamGeometry& g) { return g.sdd_mm / g.sod_mm; }

inline double voxel_size_um(const ConeBeamGeometry& g, const DetectorSpec& d) {
    return d.pixel_pitch_um / magnification(g);
}

// Ratio of expected propagation-fringe widths at two object-to-detector
// distances; fringe width grows with the square root of the distance.
inline double fringe_scale_ratio(double z1_mm, double z2_mm) {
    if (!(z1_mm > 0.0) || !(z2_mm > 0.0))
        throw std::domain_error("fringe_scale_ratio: distances must be positive");
    return std::sqrt(z2_mm / z1_mm);
}

// Acquisition parameters. Tube settings and filtration are carried as
// metadata only; nothing downstream models the spectrum.
struct ScanConfig {
    double angular_step_deg = 0.0;
    double angular_range_deg = 360.0;
    double tube_voltage_kv = 0.0;
    double tube_current_ua = 0.0;
    std::string filter_description;

    void validate() const {
        if (!(angular_step_deg > 0.0)) throw config_error("scan: angular_step_deg must be positive");
        if (!(angular_range_deg > 0.0)) throw config_error("scan: angular_range_deg must be positive");
        const double n = angular_range_deg / angular_step_deg;
        if (std::abs(n - std::round(n)) > 1e-9 * n)
            throw config_error("scan: angular_range_deg must be an integer multiple of angular_step_deg");
        if (std::round(n) < 1.0) throw config_error("scan: at least one projection required");
    }

    int num_projections() const {
        return static_cast<int>(std::llround(angular_range_deg / angular_step_deg));
    }
};

// Angular positions k*step for k = 0..N-1, starting at 0 degrees.
inline std::vector<double> projection_angles_deg(const ScanConfig& scan) {
    scan.validate();
    const int n = scan.num_projections();
    std::vector<double> angles(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) angles[static_cast<std::size_t>(k)] = k * scan.angular_step_deg;
    return angles;
}

struct ScanPreset {
    std::string name;
    ConeBeamGeometry geometry;
    DetectorSpec detector;
    ScanConfig scan;
    bool phase_contrast = false;
};

// The two published acquisitions: an encapsulated integrated circuit close
// to the sensor, and an insect head far from it for phase contrast. Both
// with the sensor 75 cm from the tube and a 1280x1024 array of 5.2 um
// pixels, stepping 0.6 degrees.
inline ScanPreset preset_chip() {
    ScanPreset p;
    p.name = "chip";
    p.geometry = ConeBeamGeometry::from_object_to_sensor(750.0, 25.0);
    p.detector = DetectorSpec{1024, 1280, 5.2, 4095.0};
    p.scan = ScanConfig{0.6, 360.0, 35.0, 250.0, "aluminum 20 um"};
    p.phase_contrast = false;
    return p;
}

inline ScanPreset preset_insect() {
    ScanPreset p;
    p.name = "insect";
    p.geometry = ConeBeamGeometry::from_object_to_sensor(750.0, 190.0);
    p.detector = DetectorSpec{1024, 1280, 5.2, 4095.0};
    p.scan = ScanConfig{0.6, 360.0, 25.0, 100.0, "none"};
    p.phase_contrast = true;
    return p;
}

inline ScanPreset preset_by_name(const std::string& name) {
    if (name == "chip") return preset_chip();
    if (name == "insect") return preset_insect();
    throw config_error("unknown preset '" + name + "' (expected 'chip' or 'insect')");
}

} // namespace xct
