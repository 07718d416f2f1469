#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "xct/degradation.hpp"
#include "xct/geometry.hpp"
#include "xct/image.hpp"
#include "xct/phantom.hpp"
#include "xct/preprocess.hpp"
#include "xct/projector.hpp"

namespace xct {

// Raw frames in acquisition order with their angular position and the
// cumulative irradiation time after each exposure. Exposures are 1 s, so
// frame k of a run ends at k seconds of accumulated dose; the projection
// index groups frames that will be averaged together.
struct FrameStack {
    std::vector<Image> frames;
    std::vector<double> cumulative_time_s;
    std::vector<double> angle_deg;
    std::vector<int> projection_index;

    std::size_t size() const { return frames.size(); }

    void validate() const {
        if (frames.size() != cumulative_time_s.size() || frames.size() != angle_deg.size() ||
            frames.size() != projection_index.size())
            throw io_error("frame stack: column lengths differ");
        for (std::size_t i = 1; i < cumulative_time_s.size(); ++i)
            if (!(cumulative_time_s[i] > cumulative_time_s[i - 1]))
                throw io_error("frame stack: cumulative time must be strictly increasing");
        for (const Image& f : frames)
            if (!f.same_shape(frames.front())) throw io_error("frame stack: frame dimensions differ");
    }
};

// Averaged dark/flat pair. Flats and darks are interleaved so both averages
// represent the sensor at the same irradiation midpoint t_mid_s; with the
// linear drift model the averaged map then equals the instantaneous map at
// t_mid_s exactly, which is what makes the two-point slope fit exact.
struct ReferencePair {
    Image dark;
    Image flat;
    double t_mid_s = 0.0;
    int n_frames = 0;
};

struct GroundTruth {
    Image df0_ref;  // noiseless dark map at the start-reference midpoint
    Image ff0_ref;  // noiseless flat map at the start-reference midpoint
    Image kd_eff;   // slopes of the measured reference maps, relative time
    Image kf_eff;
    std::vector<Image> ideal_transmission; // per projection, after edge enhancement
    std::vector<std::pair<int, int>> hot_pixels;
    std::vector<std::pair<int, int>> dead_pixels;
};

struct ProjectionRecord {
    int index = 0;
    double angle_deg = 0.0;
    double t_mid_s = 0.0; // midpoint of the averaged frames' times
    int n_frames = 0;
    double qef = 0.0;
};

struct AcquisitionResult {
    FrameStack stack;
    ReferencePair refs_start;
    ReferencePair refs_end;
    GroundTruth truth;
    std::vector<ProjectionRecord> records;
    bool controller_saturated = false;
};

struct AcquisitionOptions {
    std::vector<int> schedule; // fixed mode: frames per angle
    bool adaptive = false;
    QefPolicy policy;    // adaptive mode
    double k_mad = 5.0;  // defect threshold used by the controller
    int n_ref = 16;      // reference frames per set
    double edge_alpha_px2 = 0.0;
    double projector_step_fraction = 0.5;
    double center_offset_px = 0.0;
    double detector_tilt_deg = 0.0;
    int threads = 1;
    bool keep_ideal = true;  // store ground-truth transmission per projection
    bool keep_frames = true; // false: controller-style runs that only need the records
};

// Interleaved reference acquisition: flat (advancing dose by 1 s) then dark
// at the same dose, n times. Returns averaged maps.
inline ReferencePair acquire_references(const DegradationModel& model, int n_frames,
                                        double& t_cursor_s, std::uint64_t seed, int threads = 1) {
    if (n_frames < 1) throw config_error("references: need at least one frame");
    const Image full(model.df0.rows, model.df0.cols, 1.0);
    const Image none(model.df0.rows, model.df0.cols, 0.0);
    ReferencePair out;
    out.dark = Image(model.df0.rows, model.df0.cols, 0.0);
    out.flat = Image(model.df0.rows, model.df0.cols, 0.0);
    double t_sum = 0.0;
    for (int k = 0; k < n_frames; ++k) {
        t_cursor_s += 1.0;
        const Image flat =
            simulate_frame(full, model, t_cursor_s, hash_seed(seed, 0xF1A7ULL, k), threads);
        const Image dark =
            simulate_frame(none, model, t_cursor_s, hash_seed(seed, 0xDA26ULL, k), threads);
        for (std::size_t i = 0; i < out.flat.size(); ++i) {
            out.flat[i] += flat[i];
            out.dark[i] += dark[i];
        }
        t_sum += t_cursor_s;
    }
    const double inv = 1.0 / n_frames;
    for (std::size_t i = 0; i < out.flat.size(); ++i) {
        out.flat[i] *= inv;
        out.dark[i] *= inv;
    }
    out.t_mid_s = t_sum / n_frames;
    out.n_frames = n_frames;
    return out;
}

// Full simulated scan: start references, one-second frames per angular
// position (fixed schedule or Q_ef-adaptive), end references, and the
// ground-truth record for oracle tests.
inline AcquisitionResult simulate_acquisition(const Phantom& phantom, const ConeBeamGeometry& geom,
                                              const DetectorSpec& det, const ScanConfig& scan,
                                              const DegradationModel& model,
                                              const AcquisitionOptions& opt, std::uint64_t seed) {
    geom.validate();
    det.validate();
    model.validate();
    const std::vector<double> angles = projection_angles_deg(scan);
    if (!opt.adaptive && opt.schedule.size() != angles.size())
        throw config_error("acquisition: schedule length must equal the number of angles");
    if (opt.adaptive) opt.policy.validate();

    ProjectorOptions popt;
    popt.step_fraction = opt.projector_step_fraction;
    popt.center_offset_px = opt.center_offset_px;
    popt.detector_tilt_deg = opt.detector_tilt_deg;
    popt.threads = opt.threads;
    if (!phantom.is_empty()) check_fov(phantom, geom, det, opt.center_offset_px);

    AcquisitionResult out;
    double t_cursor = 0.0;

    out.refs_start = acquire_references(model, opt.n_ref, t_cursor, hash_seed(seed, 1), opt.threads);
    const DefectMask mask = detect_defects(out.refs_start.dark, out.refs_start.flat, opt.k_mad);

    const double t_ref_start = out.refs_start.t_mid_s;
    QefPolicy policy = opt.policy;
    int current_n = opt.adaptive ? 0 : 1; // adaptive: set from the first measurement
    std::uint64_t frame_counter = 0;

    for (std::size_t i = 0; i < angles.size(); ++i) {
        Image ideal = forward_project_view(phantom, geom, det, angles[i], popt);
        if (opt.edge_alpha_px2 > 0.0) ideal = apply_edge_enhancement(ideal, opt.edge_alpha_px2);

        Image sum(det.rows, det.cols, 0.0);
        double t_sum = 0.0;
        int n = 0;
        auto acquire_one = [&]() {
            t_cursor += 1.0;
            Image f = simulate_frame(ideal, model, t_cursor,
                                     hash_seed(seed, 0xACF0ULL, frame_counter++), opt.threads);
            for (std::size_t p = 0; p < sum.size(); ++p) sum[p] += f[p];
            t_sum += t_cursor;
            ++n;
            if (opt.keep_frames) {
                out.stack.frames.push_back(std::move(f));
                out.stack.cumulative_time_s.push_back(t_cursor);
                out.stack.angle_deg.push_back(angles[i]);
                out.stack.projection_index.push_back(static_cast<int>(i));
            }
        };

        double qef = 0.0;
        if (!opt.adaptive) {
            const int want = opt.schedule[i];
            if (want < 1) throw config_error("acquisition: schedule entries must be >= 1");
            while (n < want) acquire_one();
            const Image avg = sum * (1.0 / n);
            try {
                qef = compute_qef(repair_defects(avg, mask), policy);
            } catch (const degenerate_band_error&) {
                qef = std::numeric_limits<double>::quiet_NaN(); // constant synthetic band
            }
        } else {
            if (current_n == 0) {
                // first position: size N from a single-frame measurement
                acquire_one();
                const double q1 = compute_qef(repair_defects(sum, mask), policy);
                current_n = std::max(policy.n_min, required_initial_frames(q1, policy));
            }
            while (n < current_n) acquire_one();
            for (;;) {
                const Image avg = sum * (1.0 / n);
                qef = compute_qef(repair_defects(avg, mask), policy);
                if (qef >= policy.threshold || n >= policy.n_max) break;
                const AdaptDecision d = adapt_num_frames(qef, n, policy);
                while (n < d.n) acquire_one();
            }
            if (qef < policy.threshold && n >= policy.n_max) out.controller_saturated = true;
            current_n = n;
        }

        ProjectionRecord rec;
        rec.index = static_cast<int>(i);
        rec.angle_deg = angles[i];
        rec.t_mid_s = t_sum / n;
        rec.n_frames = n;
        rec.qef = qef;
        out.records.push_back(rec);
        if (opt.keep_ideal) out.truth.ideal_transmission.push_back(std::move(ideal));
    }

    out.refs_end = acquire_references(model, opt.n_ref, t_cursor, hash_seed(seed, 2), opt.threads);

    // ground truth: the noiseless reference maps at the start midpoint and
    // the slopes a perfect two-point fit of the measured references yields
    out.truth.df0_ref = Image(det.rows, det.cols);
    out.truth.ff0_ref = Image(det.rows, det.cols);
    out.truth.kd_eff = Image(det.rows, det.cols);
    out.truth.kf_eff = Image(det.rows, det.cols);
    for (std::size_t p = 0; p < out.truth.df0_ref.size(); ++p) {
        const double dark0 = model.df0[p] * (1.0 + model.kd[p] * t_ref_start);
        const double photon0 =
            model.gain[p] * (model.ff0[p] - model.df0[p]) * (1.0 + model.kf[p] * t_ref_start);
        out.truth.df0_ref[p] = dark0;
        out.truth.ff0_ref[p] = dark0 + photon0;
        out.truth.kd_eff[p] = model.kd[p] / (1.0 + model.kd[p] * t_ref_start);
        const double photon_slope = model.gain[p] * (model.ff0[p] - model.df0[p]) * model.kf[p];
        out.truth.kf_eff[p] = (model.df0[p] * model.kd[p] + photon_slope) / out.truth.ff0_ref[p];
    }
    out.truth.hot_pixels = model.hot_pixels;
    out.truth.dead_pixels = model.dead_pixels;
    return out;
}

// Assembles the preprocessing reference set from the two averaged pairs;
// times are re-zeroed on the start midpoint. Maps are defect-repaired so
// the FF > DF invariant holds at defective sites.
inline ReferenceSet build_reference_set(const ReferencePair& start, const ReferencePair& end,
                                        const DefectMask& mask) {
    ReferenceSet refs;
    refs.df0 = repair_defects(start.dark, mask);
    refs.ff0 = repair_defects(start.flat, mask);
    refs.df_end = repair_defects(end.dark, mask);
    refs.ff_end = repair_defects(end.flat, mask);
    refs.t_end_s = end.t_mid_s - start.t_mid_s;
    refs.validate();
    return refs;
}

} // namespace xct
