#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "xct/errors.hpp"
#include "xct/image.hpp"

namespace xct {

// Averaged dark/flat reference maps from the start and end of the run.
// t_end_s is the cumulative irradiation time of the end set measured from
// the start set, so the start maps sit at t = 0 by construction.
struct ReferenceSet {
    Image df0;
    Image ff0;
    Image df_end;
    Image ff_end;
    double t_end_s = 0.0;

    void validate() const {
        if (!df0.same_shape(ff0) || !df0.same_shape(df_end) || !df0.same_shape(ff_end))
            throw calibration_error("reference set: map dimensions differ");
        if (!(t_end_s > 0.0)) throw calibration_error("reference set: t_end_s must be positive");
    }
};

struct DefectMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> mask;
    int hot_count = 0;
    int dead_count = 0;

    DefectMask() = default;
    DefectMask(int rows_, int cols_)
        : rows(rows_), cols(cols_), mask(static_cast<std::size_t>(rows_) * cols_, 0) {}

    bool at(int r, int c) const { return mask[static_cast<std::size_t>(r) * cols + c] != 0; }
    void set(int r, int c) { mask[static_cast<std::size_t>(r) * cols + c] = 1; }

    std::size_t masked_count() const {
        std::size_t n = 0;
        for (auto v : mask) n += v;
        return n;
    }
    double fraction() const {
        return mask.empty() ? 0.0 : static_cast<double>(masked_count()) / mask.size();
    }
};

// Q_ef regulation policy: quality floor, the unshadowed measurement band,
// and the frame-count bounds of the controller.
struct QefPolicy {
    double threshold = 30.0;
    int band_row_begin = 0;
    int band_row_end = 50; // exclusive; top 50 rows, full width
    int n_min = 1;
    int n_max = 64;
    double growth_step = 1.1;

    void validate() const {
        if (!(threshold > 0.0)) throw config_error("qef: threshold must be positive");
        if (n_min < 1 || n_min > n_max) throw config_error("qef: need 1 <= n_min <= n_max");
        if (band_row_begin < 0 || band_row_end <= band_row_begin)
            throw config_error("qef: empty measurement band");
        if (!(growth_step > 1.0)) throw config_error("qef: growth_step must exceed 1");
    }
};

struct DriftSlopes {
    Image kd; // per-pixel, 1/s
    Image kf;
    double kd_scalar = 0.0; // robust summaries (medians over valid pixels)
    double kf_scalar = 0.0;
};

struct AveragedFrames {
    Image mean;
    Image variance; // unbiased, per pixel
    bool variance_defined = false;
};

// Pixelwise mean and unbiased variance of a stack of frames.
inline AveragedFrames average_frames(const std::vector<Image>& frames) {
    if (frames.empty()) throw std::invalid_argument("average_frames: no frames");
    const Image& first = frames.front();
    for (const Image& f : frames)
        if (!f.same_shape(first)) throw std::invalid_argument("average_frames: dimension mismatch");

    AveragedFrames out;
    out.mean = Image(first.rows, first.cols);
    out.variance = Image(first.rows, first.cols);
    const std::size_t n = frames.size();
    for (std::size_t i = 0; i < out.mean.size(); ++i) {
        double s = 0.0;
        for (const Image& f : frames) s += f[i];
        out.mean[i] = s / static_cast<double>(n);
    }
    if (n >= 2) {
        for (std::size_t i = 0; i < out.mean.size(); ++i) {
            double s = 0.0;
            for (const Image& f : frames) {
                const double d = f[i] - out.mean[i];
                s += d * d;
            }
            out.variance[i] = s / static_cast<double>(n - 1);
        }
        out.variance_defined = true;
    }
    return out;
}

// Empirical quality factor: mean over std of an irradiated band that the
// object never shadows. For Poisson-limited data this approximates
// sqrt(mean counts) and tracks SNR without needing a ground truth.
inline double compute_qef(const Image& img, int band_row_begin, int band_row_end) {
    if (band_row_begin < 0 || band_row_end > img.rows || band_row_end <= band_row_begin)
        throw std::invalid_argument("compute_qef: band outside image");
    const std::size_t n = static_cast<std::size_t>(band_row_end - band_row_begin) * img.cols;
    double s = 0.0;
    for (int r = band_row_begin; r < band_row_end; ++r)
        for (int c = 0; c < img.cols; ++c) s += img.at(r, c);
    const double mean = s / static_cast<double>(n);
    double ss = 0.0;
    for (int r = band_row_begin; r < band_row_end; ++r)
        for (int c = 0; c < img.cols; ++c) {
            const double d = img.at(r, c) - mean;
            ss += d * d;
        }
    const double stddev = n >= 2 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    if (!(stddev > 0.0)) throw degenerate_band_error("compute_qef: degenerate band (zero std)");
    return mean / stddev;
}

inline double compute_qef(const Image& img, const QefPolicy& policy) {
    return compute_qef(img, policy.band_row_begin, std::min(policy.band_row_end, img.rows));
}

// Initial frame count from a single-frame quality measurement: averaging N
// frames scales Q_ef by sqrt(N), so N = (threshold / q_single)^2.
inline int required_initial_frames(double q_single, const QefPolicy& policy) {
    if (!(q_single > 0.0)) throw std::invalid_argument("required_initial_frames: q_single <= 0");
    const double n = std::ceil((policy.threshold / q_single) * (policy.threshold / q_single));
    const double clamped = std::clamp(n, static_cast<double>(policy.n_min),
                                      static_cast<double>(policy.n_max));
    return static_cast<int>(clamped);
}

struct AdaptDecision {
    int n = 0;
    bool saturated = false;
};

// Nondecreasing frame-count controller. Below threshold the count grows by
// the inverse-square rule (never less than growth_step); above threshold it
// holds, so delivered quality stays uniform without oscillation.
inline AdaptDecision adapt_num_frames(double measured_qef, int current_n, const QefPolicy& policy) {
    if (current_n < policy.n_min || current_n > policy.n_max)
        throw std::invalid_argument("adapt_num_frames: current_n outside policy bounds");
    if (measured_qef >= policy.threshold) return {current_n, false};
    const double ratio = policy.threshold / measured_qef;
    const double factor = std::max(policy.growth_step, ratio * ratio);
    const int grown = static_cast<int>(std::ceil(current_n * factor));
    const int n = std::min(policy.n_max, std::max(grown, current_n));
    return {n, n == policy.n_max && n <= current_n};
}

// Hot pixels stand out of the averaged dark frame, dead pixels sink below
// the averaged flat frame. Thresholds are median +- k * 1.4826 * MAD, robust
// against the very defects being flagged. Inputs must be averages; single
// frames still carry radiation events.
inline DefectMask detect_defects(const Image& dark_avg, const Image& flat_avg, double k_mad = 5.0) {
    if (!dark_avg.same_shape(flat_avg))
        throw std::invalid_argument("detect_defects: dimension mismatch");
    DefectMask out(dark_avg.rows, dark_avg.cols);
    const double dark_med = image_median(dark_avg);
    const double dark_mad = image_mad(dark_avg, dark_med);
    const double flat_med = image_median(flat_avg);
    const double flat_mad = image_mad(flat_avg, flat_med);
    const double hot_thresh = dark_med + k_mad * 1.4826 * dark_mad;
    const double dead_thresh = flat_med - k_mad * 1.4826 * flat_mad;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) {
            const bool hot = dark_avg.at(r, c) > hot_thresh;
            const bool dead = flat_avg.at(r, c) < dead_thresh;
            if (hot) ++out.hot_count;
            if (dead && !hot) ++out.dead_count;
            if (hot || dead) out.set(r, c);
        }
    if (out.fraction() >= 0.5)
        throw calibration_error("detect_defects: more than half the sensor flagged; calibration invalid");
    return out;
}

// Replaces each masked pixel by the mean of its valid 8-neighbors,
// sweeping until clusters fill in from their rims. Values are recomputed
// from unmasked content only, so the repair is idempotent.
inline Image repair_defects(const Image& img, const DefectMask& mask) {
    if (img.rows != mask.rows || img.cols != mask.cols)
        throw std::invalid_argument("repair_defects: mask dimension mismatch");
    const std::size_t masked = mask.masked_count();
    if (masked == img.size()) throw calibration_error("repair_defects: fully masked image");
    if (masked == 0) return img;

    Image out = img;
    std::vector<std::uint8_t> invalid(mask.mask);
    std::vector<std::pair<int, int>> pending;
    pending.reserve(masked);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c)
            if (mask.at(r, c)) pending.emplace_back(r, c);

    while (!pending.empty()) {
        std::vector<std::pair<int, int>> still_pending;
        std::vector<std::pair<std::size_t, double>> resolved;
        for (const auto& [r, c] : pending) {
            double sum = 0.0;
            int count = 0;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const int rr = r + dr, cc = c + dc;
                    if (!img.in_bounds(rr, cc)) continue;
                    const std::size_t nidx = static_cast<std::size_t>(rr) * img.cols + cc;
                    if (invalid[nidx]) continue;
                    sum += out[nidx];
                    ++count;
                }
            if (count > 0)
                resolved.emplace_back(static_cast<std::size_t>(r) * img.cols + c, sum / count);
            else
                still_pending.emplace_back(r, c);
        }
        // pixels repaired in one sweep become valid neighbors for the next
        for (const auto& [idx, v] : resolved) {
            out[idx] = v;
            invalid[idx] = 0;
        }
        if (resolved.empty())
            throw calibration_error("repair_defects: isolated masked region cannot be filled");
        pending = std::move(still_pending);
    }
    return out;
}

// Per-pixel drift slopes from the two reference sets. Pixels whose start
// reference sits below floor_counts fall back to the robust scalar summary;
// negative slopes clamp to zero.
inline DriftSlopes estimate_drift_slopes(const ReferenceSet& refs, double floor_counts = 1.0) {
    refs.validate();
    DriftSlopes out;
    out.kd = Image(refs.df0.rows, refs.df0.cols);
    out.kf = Image(refs.df0.rows, refs.df0.cols);
    std::vector<double> kd_valid, kf_valid;
    kd_valid.reserve(out.kd.size());
    kf_valid.reserve(out.kf.size());
    std::vector<std::uint8_t> kd_fallback(out.kd.size(), 0), kf_fallback(out.kf.size(), 0);
    for (std::size_t i = 0; i < out.kd.size(); ++i) {
        if (refs.df0[i] >= floor_counts) {
            const double k = std::max(0.0, (refs.df_end[i] / refs.df0[i] - 1.0) / refs.t_end_s);
            out.kd[i] = k;
            kd_valid.push_back(k);
        } else {
            kd_fallback[i] = 1;
        }
        if (refs.ff0[i] >= floor_counts) {
            const double k = std::max(0.0, (refs.ff_end[i] / refs.ff0[i] - 1.0) / refs.t_end_s);
            out.kf[i] = k;
            kf_valid.push_back(k);
        } else {
            kf_fallback[i] = 1;
        }
    }
    out.kd_scalar = kd_valid.empty() ? 0.0 : vector_median(std::move(kd_valid));
    out.kf_scalar = kf_valid.empty() ? 0.0 : vector_median(std::move(kf_valid));
    for (std::size_t i = 0; i < out.kd.size(); ++i) {
        if (kd_fallback[i]) out.kd[i] = out.kd_scalar;
        if (kf_fallback[i]) out.kf[i] = out.kf_scalar;
    }
    return out;
}

struct FlatFieldResult {
    Image ic;
    int fallback_count = 0; // pixels where the denominator collapsed
};

// Interpolated flat-field correction: both reference fields drift linearly
// with cumulative irradiation time, so the correction uses the references
// advanced to the projection's own acquisition time,
//   IC = (CC - DF0*(1 + KD*t)) / (FF0*(1 + KF*t) - DF0*(1 + KD*t)).
// At t = 0 this is the ordinary static flat-field. Output is nominally in
// [0, 1] but deliberately not clamped: phase-contrast overshoot survives.
inline FlatFieldResult flat_field_correct(const Image& cc, double t_s, const ReferenceSet& refs,
                                          const DriftSlopes& slopes, double denom_eps = 1e-6) {
    if (!cc.same_shape(refs.df0))
        throw std::invalid_argument("flat_field_correct: dimension mismatch");
    FlatFieldResult out;
    out.ic = Image(cc.rows, cc.cols);
    DefectMask collapsed(cc.rows, cc.cols);
    for (std::size_t i = 0; i < out.ic.size(); ++i) {
        const double dark_t = refs.df0[i] * (1.0 + slopes.kd[i] * t_s);
        const double flat_t = refs.ff0[i] * (1.0 + slopes.kf[i] * t_s);
        const double denom = flat_t - dark_t;
        if (denom > denom_eps) {
            out.ic[i] = (cc[i] - dark_t) / denom;
        } else {
            collapsed.mask[i] = 1;
            ++out.fallback_count;
        }
    }
    if (out.fallback_count > 0) out.ic = repair_defects(out.ic, collapsed);
    return out;
}

} // namespace xct
