#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "xct/errors.hpp"
#include "xct/image.hpp"
#include "xct/parallel.hpp"

namespace xct {

// In-plane rotation between the rotation-axis image and the detector
// vertical, plus the horizontal distance between the axis projection and
// the detector center column.
struct AlignmentEstimate {
    double tilt_deg = 0.0;
    double center_offset_px = 0.0;
    double confidence = 0.0; // peak normalized cross-correlation

    void validate() const {
        if (!(std::abs(tilt_deg) < 10.0))
            throw calibration_error("alignment: |tilt| >= 10 degrees, mechanical setup is broken");
        if (!std::isfinite(tilt_deg) || !std::isfinite(center_offset_px))
            throw calibration_error("alignment: non-finite estimate");
    }
};

struct AlignSearchParams {
    double tilt_range_deg = 3.0;
    double tilt_step_deg = 0.05;
    double offset_range_px = 50.0;
    double offset_step_px = 0.25;
    int max_pairs = 5;
    double confidence_floor = 0.1;
    int threads = 1;
};

// Bilinear rotation about the image center; angle follows the convention
// of AlignmentEstimate.tilt_deg, out-of-range pixels take `fill`.
inline Image rotate_image(const Image& img, double angle_deg, double fill) {
    if (angle_deg == 0.0) return img;
    Image out(img.rows, img.cols);
    const double a = angle_deg * 0.017453292519943295;
    const double ca = std::cos(a), sa = std::sin(a);
    const double cr = (img.rows - 1) * 0.5, cc = (img.cols - 1) * 0.5;
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            const double pr = r - cr, pc = c - cc;
            const double sr = cr + (ca * pr - sa * pc);
            const double sc = cc + (sa * pr + ca * pc);
            out.at(r, c) = bilinear_sample(img, sr, sc, fill);
        }
    return out;
}

inline Image mirror_columns(const Image& img) {
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) out.at(r, c) = img.at(r, img.cols - 1 - c);
    return out;
}

namespace detail {

// Rotation with per-row valid column spans, so the correlation loops run
// over contiguous pixels with no per-pixel bounds tests.
struct RotatedWithSpans {
    Image img;
    std::vector<std::pair<int, int>> span; // [lo, hi) per row
};

inline RotatedWithSpans rotate_with_spans(const Image& src, double angle_deg) {
    RotatedWithSpans out;
    out.img = Image(src.rows, src.cols, 0.0);
    out.span.assign(static_cast<std::size_t>(src.rows), {0, 0});
    const double a = angle_deg * 0.017453292519943295;
    const double ca = std::cos(a), sa = std::sin(a);
    const double cr = (src.rows - 1) * 0.5, cc = (src.cols - 1) * 0.5;
    for (int r = 0; r < src.rows; ++r) {
        int lo = src.cols, hi = 0;
        for (int c = 0; c < src.cols; ++c) {
            const double pr = r - cr, pc = c - cc;
            const double sr = cr + (ca * pr - sa * pc);
            const double sc = cc + (sa * pr + ca * pc);
            const int r0 = static_cast<int>(std::floor(sr));
            const int c0 = static_cast<int>(std::floor(sc));
            if (r0 < 0 || c0 < 0 || r0 + 1 >= src.rows || c0 + 1 >= src.cols) continue;
            const double fr = sr - r0, fc = sc - c0;
            out.img.at(r, c) = src.at(r0, c0) * (1 - fr) * (1 - fc) +
                               src.at(r0, c0 + 1) * (1 - fr) * fc +
                               src.at(r0 + 1, c0) * fr * (1 - fc) +
                               src.at(r0 + 1, c0 + 1) * fr * fc;
            lo = std::min(lo, c);
            hi = std::max(hi, c + 1);
        }
        out.span[static_cast<std::size_t>(r)] = {lo, hi};
    }
    return out;
}

// NCC of a against b shifted right by dx columns (content-wise), over the
// pixels where both rotations are valid and the shifted sample lands inside
// b's valid span.
inline double ncc_shifted(const RotatedWithSpans& a, const RotatedWithSpans& b, double dx,
                          long min_overlap) {
    double sa = 0, saa = 0, sb = 0, sbb = 0, sab = 0;
    long n = 0;
    const int cols = a.img.cols;
    for (int r = 0; r < a.img.rows; ++r) {
        const auto [alo, ahi] = a.span[static_cast<std::size_t>(r)];
        const auto [blo, bhi] = b.span[static_cast<std::size_t>(r)];
        if (ahi - alo < 2 || bhi - blo < 2) continue;
        // need c in a's span and c - dx in [blo, bhi-1)
        int c_lo = std::max(alo, static_cast<int>(std::ceil(blo + dx)));
        int c_hi = std::min({ahi, cols, static_cast<int>(std::floor(bhi - 1 + dx)) + 1});
        if (c_hi <= c_lo) continue;
        const double cs0 = c_lo - dx;
        const int base = static_cast<int>(std::floor(cs0));
        const double w = cs0 - base;
        const double* arow = &a.img.data[static_cast<std::size_t>(r) * cols];
        const double* brow = &b.img.data[static_cast<std::size_t>(r) * cols];
        for (int c = c_lo; c < c_hi; ++c) {
            const int cb = base + (c - c_lo);
            if (cb < blo || cb + 1 >= bhi) continue;
            const double av = arow[c];
            const double bv = brow[cb] * (1.0 - w) + brow[cb + 1] * w;
            sa += av;
            saa += av * av;
            sb += bv;
            sbb += bv * bv;
            sab += av * bv;
            ++n;
        }
    }
    if (n < min_overlap) return -std::numeric_limits<double>::infinity();
    const double nn = static_cast<double>(n);
    const double cov = sab - sa * sb / nn;
    const double va = saa - sa * sa / nn;
    const double vb = sbb - sb * sb / nn;
    if (va <= 0 || vb <= 0) return -std::numeric_limits<double>::infinity();
    return cov / std::sqrt(va * vb);
}

inline double parabola_peak(double xm, double step, double sm, double s0, double sp) {
    const double denom = sm - 2.0 * s0 + sp;
    if (!(denom < 0.0)) return xm; // not a local maximum shape
    return xm + 0.5 * step * (sm - sp) / denom;
}

struct PairEstimate {
    double tilt_deg, offset_px, score;
};

// Registers the horizontally mirrored opposed view against the direct one
// over the (tilt, offset) grid. A detector tilt phi appears as a 2*phi
// rotation between the two images and an axis offset d as a 2*d shift. The
// rotation is split evenly between the two images so both sides see the
// same single resampling blur; an asymmetric warp biases the flat peak of
// smooth scenes measurably.
inline PairEstimate register_opposed_pair(const Image& direct, const Image& opposed_mirrored,
                                          const AlignSearchParams& par) {
    const int n_tilt = static_cast<int>(std::round(2.0 * par.tilt_range_deg / par.tilt_step_deg)) + 1;
    const int n_off = static_cast<int>(std::round(2.0 * par.offset_range_px / par.offset_step_px)) + 1;
    std::vector<double> score(static_cast<std::size_t>(n_tilt) * n_off,
                              -std::numeric_limits<double>::infinity());

    // candidates whose valid overlap falls below a quarter of the frame are
    // ruled out; slivers of matching texture otherwise win spuriously
    const long min_overlap =
        static_cast<long>(direct.rows) * static_cast<long>(direct.cols) / 4;

    parallel_for_chunks(0, n_tilt, par.threads, [&](std::int64_t t0, std::int64_t t1) {
        for (std::int64_t it = t0; it < t1; ++it) {
            const double tilt = -par.tilt_range_deg + static_cast<double>(it) * par.tilt_step_deg;
            const RotatedWithSpans rot_a = rotate_with_spans(direct, -tilt);
            const RotatedWithSpans rot_b = rotate_with_spans(opposed_mirrored, tilt);
            for (int io = 0; io < n_off; ++io) {
                const double off = -par.offset_range_px + io * par.offset_step_px;
                score[static_cast<std::size_t>(it) * n_off + io] =
                    ncc_shifted(rot_a, rot_b, 2.0 * off, min_overlap);
            }
        }
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < score.size(); ++i)
        if (score[i] > score[best]) best = i;
    const int bt = static_cast<int>(best) / n_off;
    const int bo = static_cast<int>(best) % n_off;

    PairEstimate est;
    est.tilt_deg = -par.tilt_range_deg + bt * par.tilt_step_deg;
    est.offset_px = -par.offset_range_px + bo * par.offset_step_px;
    est.score = score[best];
    auto sc = [&](int it, int io) { return score[static_cast<std::size_t>(it) * n_off + io]; };
    if (bt > 0 && bt + 1 < n_tilt && std::isfinite(sc(bt - 1, bo)) && std::isfinite(sc(bt + 1, bo)))
        est.tilt_deg = parabola_peak(est.tilt_deg, par.tilt_step_deg, sc(bt - 1, bo), sc(bt, bo),
                                     sc(bt + 1, bo));
    if (bo > 0 && bo + 1 < n_off && std::isfinite(sc(bt, bo - 1)) && std::isfinite(sc(bt, bo + 1)))
        est.offset_px = parabola_peak(est.offset_px, par.offset_step_px, sc(bt, bo - 1), sc(bt, bo),
                                      sc(bt, bo + 1));
    return est;
}

} // namespace detail

// Finds opposed view pairs (theta, theta + 180) and averages their
// registration results. Throws when the angle list has no opposed pairs.
inline AlignmentEstimate estimate_alignment(const std::vector<Image>& projections,
                                            const std::vector<double>& angles_deg,
                                            const AlignSearchParams& par = {}) {
    if (projections.size() != angles_deg.size() || projections.empty())
        throw std::invalid_argument("estimate_alignment: stack and angle list mismatch");

    double step = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < angles_deg.size(); ++i)
        step = std::min(step, std::abs(angles_deg[i] - angles_deg[i - 1]));
    const double tol = std::isfinite(step) ? 0.5 * step + 1e-9 : 1e-9;

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < angles_deg.size() && pairs.size() < 512; ++i) {
        if (angles_deg[i] >= 180.0) continue;
        const double want = angles_deg[i] + 180.0;
        std::size_t bestj = angles_deg.size();
        double bestd = tol;
        for (std::size_t j = 0; j < angles_deg.size(); ++j) {
            const double d = std::abs(angles_deg[j] - want);
            if (d <= bestd) {
                bestd = d;
                bestj = j;
            }
        }
        if (bestj < angles_deg.size()) pairs.emplace_back(i, bestj);
    }
    if (pairs.empty())
        throw config_error("estimate_alignment: no opposed projection pairs in the stack; "
                           "supply the tilt and center offset in the alignment config instead");

    const std::size_t use = std::min<std::size_t>(static_cast<std::size_t>(par.max_pairs),
                                                  pairs.size());
    double tilt_sum = 0.0, off_sum = 0.0, conf_sum = 0.0;
    for (std::size_t k = 0; k < use; ++k) {
        const auto& [i, j] = pairs[k * pairs.size() / use];
        const Image mirrored = mirror_columns(projections[j]);
        const detail::PairEstimate e = detail::register_opposed_pair(projections[i], mirrored, par);
        tilt_sum += e.tilt_deg;
        off_sum += e.offset_px;
        conf_sum += e.score;
    }
    AlignmentEstimate out;
    out.tilt_deg = tilt_sum / static_cast<double>(use);
    out.center_offset_px = off_sum / static_cast<double>(use);
    out.confidence = conf_sum / static_cast<double>(use);
    out.validate();
    return out;
}

// Rotates every projection by -tilt_deg about the image center, bilinear,
// filling exposed corners with full transmission. Zero tilt is an exact
// no-op; correcting twice by theta/2 is not identical to once by theta
// because each resampling loses a little, which is why skipping the
// correction is exposed as a pipeline flag.
inline std::vector<Image> correct_tilt(const std::vector<Image>& projections, double tilt_deg,
                                       int threads = 1) {
    if (!(std::abs(tilt_deg) < 10.0))
        throw std::invalid_argument("correct_tilt: |tilt| must be below 10 degrees");
    if (tilt_deg == 0.0) return projections;
    std::vector<Image> out(projections.size());
    parallel_for_chunks(0, static_cast<std::int64_t>(projections.size()), threads,
                        [&](std::int64_t a, std::int64_t b) {
                            for (std::int64_t i = a; i < b; ++i)
                                out[static_cast<std::size_t>(i)] = rotate_image(
                                    projections[static_cast<std::size_t>(i)], -tilt_deg, 1.0);
                        });
    return out;
}

// Diagnostic view of one detector row across all angles (angle-ascending).
inline Image build_sinogram(const std::vector<Image>& projections,
                            const std::vector<double>& angles_deg, int row) {
    if (projections.empty() || projections.size() != angles_deg.size())
        throw std::invalid_argument("build_sinogram: stack and angle list mismatch");
    if (row < 0 || row >= projections.front().rows)
        throw std::invalid_argument("build_sinogram: row out of range");
    std::vector<std::size_t> order(projections.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return angles_deg[a] < angles_deg[b]; });
    Image out(static_cast<int>(projections.size()), projections.front().cols);
    for (std::size_t k = 0; k < order.size(); ++k)
        for (int c = 0; c < out.cols; ++c) out.at(static_cast<int>(k), c) =
            projections[order[k]].at(row, c);
    return out;
}

} // namespace xct
