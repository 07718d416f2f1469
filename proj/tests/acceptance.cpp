// Acceptance suite: one self-contained check per criterion, each printing a
// single PASS/FAIL line. Run with no arguments for the full battery or with
// --only N for a single criterion. Exit code 0 when everything passes.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "support/helpers.hpp"
#include "xct/acquisition.hpp"
#include "xct/align.hpp"
#include "xct/fdk.hpp"
#include "xct/geometry.hpp"
#include "xct/phantom.hpp"
#include "xct/preprocess.hpp"
#include "xct/projector.hpp"

using namespace xct;

namespace {

int checks_failed = 0;

void expect(bool ok, const char* what, double got, double want, double tol) {
    if (!ok) {
        std::fprintf(stderr, "    failed: %s (got %.6g, want %.6g within %.2g)\n", what, got,
                     want, tol);
        ++checks_failed;
    }
}

void expect(bool ok, const char* what) {
    if (!ok) {
        std::fprintf(stderr, "    failed: %s\n", what);
        ++checks_failed;
    }
}

const ConeBeamGeometry kInsectGeom = ConeBeamGeometry::from_object_to_sensor(750.0, 190.0);

// ---------------------------------------------------------------- 1
void criterion_geometry() {
    const DetectorSpec det{1024, 1280, 5.2, 4095.0};
    const double m = magnification(kInsectGeom);
    expect(std::abs(m - 1.339) < 5e-4, "magnification at 190 mm object-to-sensor", m, 1.339, 5e-4);
    const double vox = voxel_size_um(kInsectGeom, det);
    expect(std::abs(vox - 3.88) < 5e-3, "voxel size at 190 mm", vox, 3.88, 5e-3);
    expect(std::abs(vox - 3.9) < 0.02, "voxel size rounds to the published 3.9 um", vox, 3.9, 0.02);

    const ConeBeamGeometry chip = ConeBeamGeometry::from_object_to_sensor(750.0, 25.0);
    const double vox_chip = voxel_size_um(chip, det);
    expect(std::abs(vox_chip - 5.03) < 5e-3,
           "voxel size at 25 mm (documented approximation of the published 5.2 um)", vox_chip,
           5.03, 5e-3);
}

// ---------------------------------------------------------------- 2
void criterion_flatfield_exactness() {
    const DetectorSpec det{64, 64, 120.0, 65535.0};
    DegradationParams par;
    par.noise = false;
    par.kd_per_s = 2e-5;
    par.kf_per_s = 5e-6;
    par.kd_scatter_frac = 0.4;
    par.kf_scatter_frac = 0.4;
    par.gain_sigma = 0.04;
    par.hot_pixel_count = 6;
    par.dead_pixel_count = 6;
    const DegradationModel model = make_degradation_model(det, par, 2001);

    // a ten-hour run: references at both ends, frames at 20 times between
    double t_cursor = 0.0;
    const ReferencePair start = acquire_references(model, 8, t_cursor, 11);
    const double t_total = 36000.0;

    const Phantom sphere = make_phantom(PhantomKind::uniform_sphere, 32, 0.05, 0.3, 6.0);
    const Image truth = forward_project_view(sphere, kInsectGeom, det, 0.0);

    std::vector<double> times;
    std::vector<Image> frames;
    for (int k = 0; k < 20; ++k) {
        const double t = t_cursor + (t_total - t_cursor - 16.0) * (k + 1) / 21.0;
        times.push_back(t);
        frames.push_back(simulate_frame(truth, model, t, hash_seed(77, static_cast<std::uint64_t>(k))));
    }
    t_cursor = t_total - 8.0;
    const ReferencePair end = acquire_references(model, 8, t_cursor, 12);

    const DefectMask mask = detect_defects(start.dark, start.flat, 5.0);
    const ReferenceSet refs = build_reference_set(start, end, mask);
    const DriftSlopes slopes = estimate_drift_slopes(refs);

    double worst = 0.0;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const Image repaired = repair_defects(frames[k], mask);
        const FlatFieldResult r =
            flat_field_correct(repaired, times[k] - start.t_mid_s, refs, slopes);
        for (int row = 0; row < det.rows; ++row)
            for (int col = 0; col < det.cols; ++col)
                if (!mask.at(row, col))
                    worst = std::max(worst, std::abs(r.ic.at(row, col) - truth.at(row, col)));
    }
    expect(worst < 1e-9, "max correction error over 20 times in a 10 h run", worst, 0.0, 1e-9);
}

// ---------------------------------------------------------------- 3
void criterion_sqrt_n() {
    DegradationModel m;
    m.df0 = Image(32, 32, 200.0);
    m.ff0 = Image(32, 32, 1400.0);
    m.gain = Image(32, 32, 1.0);
    m.kd = Image(32, 32, 0.0);
    m.kf = Image(32, 32, 0.0);
    m.ceiling = 65535.0;
    const Image full(32, 32, 1.0);

    const int trials = 500;
    std::uint64_t seed = 0;
    // sigma_1 pooled over pixels from 500 single frames
    std::vector<std::vector<double>> singles(static_cast<std::size_t>(trials));
    for (int i = 0; i < trials; ++i)
        singles[static_cast<std::size_t>(i)] =
            simulate_frame(full, m, 0.0, hash_seed(31, seed++)).data;
    auto pooled_std = [&](const std::vector<std::vector<double>>& samples) {
        const std::size_t npx = samples.front().size();
        double var_sum = 0.0;
        for (std::size_t p = 0; p < npx; ++p) {
            double s = 0.0, s2 = 0.0;
            for (const auto& frame : samples) {
                s += frame[p];
                s2 += frame[p] * frame[p];
            }
            const double n = static_cast<double>(samples.size());
            var_sum += (s2 - s * s / n) / (n - 1.0);
        }
        return std::sqrt(var_sum / static_cast<double>(npx));
    };
    const double sigma1 = pooled_std(singles);

    for (int n_avg : {4, 16, 64}) {
        std::vector<std::vector<double>> means(static_cast<std::size_t>(trials));
        for (int i = 0; i < trials; ++i) {
            std::vector<double> acc(full.size(), 0.0);
            for (int k = 0; k < n_avg; ++k) {
                const Image f = simulate_frame(full, m, 0.0, hash_seed(37, seed++));
                for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += f[p];
            }
            for (double& v : acc) v /= n_avg;
            means[static_cast<std::size_t>(i)] = std::move(acc);
        }
        const double got = pooled_std(means);
        const double want = sigma1 / std::sqrt(static_cast<double>(n_avg));
        expect(std::abs(got - want) < 0.1 * want, "std of N-frame averages vs sigma1/sqrt(N)", got,
               want, 0.1 * want);
    }
}

// ---------------------------------------------------------------- 4
void criterion_aging_trend() {
    const DetectorSpec det{64, 96, 120.0, 65535.0};
    DegradationParams par;
    par.noise = true;
    par.df0_mean = 200.0;
    par.df0_sigma = 0.0;
    par.ff0_mean = 1400.0;
    par.ff0_sigma = 0.0;
    par.gain_sigma = 0.0;
    par.kd_per_s = 2e-5;
    par.kd_scatter_frac = 0.3;
    par.kf_per_s = 5e-6;
    par.kf_scatter_frac = 0.3;
    const DegradationModel model = make_degradation_model(det, par, 404);
    const Image full(det.rows, det.cols, 1.0);

    std::uint64_t seed = 0;
    std::vector<double> times;
    std::vector<double> std5, std23;
    for (int j = 0; j < 10; ++j) {
        const double t = 3600.0 * (j + 0.5);
        times.push_back(t);
        for (int n_avg : {5, 23}) {
            Image acc(det.rows, det.cols, 0.0);
            for (int k = 0; k < n_avg; ++k) {
                const Image f = simulate_frame(full, model, t, hash_seed(51, seed++));
                for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f[i];
            }
            for (double& v : acc.data) v /= n_avg;
            (n_avg == 5 ? std5 : std23).push_back(image_std(acc));
        }
    }
    const double rho5 = testsupport::spearman(times, std5);
    const double rho23 = testsupport::spearman(times, std23);
    expect(rho5 > 0.9, "aging trend of the 5-frame curve (spearman)", rho5, 1.0, 0.1);
    expect(rho23 > 0.9, "aging trend of the 23-frame curve (spearman)", rho23, 1.0, 0.1);
    bool below = true;
    for (std::size_t j = 0; j < times.size(); ++j) below &= std23[j] < std5[j];
    expect(below, "the 23-frame curve sits below the 5-frame curve at every time point");
}

// ---------------------------------------------------------------- 5
void criterion_controller() {
    const DetectorSpec det{256, 320, 100.0, 65535.0};
    // ghosting-dominated aging: the per-pixel drift scatter grows the band's
    // fixed-pattern spread, which frame averaging cannot remove, so the
    // controller must raise N as the run progresses; the rates are sized so
    // the 600-projection run ends well before the achievable quality floor
    // crosses the threshold
    DegradationParams par;
    par.noise = true;
    par.df0_mean = 300.0;
    par.df0_sigma = 1.0;
    par.ff0_mean = 1500.0;
    par.ff0_sigma = 2.0;
    par.gain_sigma = 0.001;
    par.kd_per_s = 1e-4;
    par.kd_scatter_frac = 0.10;
    par.kf_per_s = 5e-6;
    par.kf_scatter_frac = 0.1;
    const DegradationModel model = make_degradation_model(det, par, 5150);
    const Phantom empty = make_phantom(PhantomKind::uniform_sphere, 16, 0.0, 0.4, 5.0);

    AcquisitionOptions opt;
    opt.adaptive = true;
    opt.policy.threshold = 85.0;
    opt.policy.band_row_begin = 0;
    opt.policy.band_row_end = 50;
    opt.policy.n_min = 1;
    opt.policy.n_max = 64;
    opt.n_ref = 16;
    opt.keep_ideal = false;
    opt.keep_frames = false; // the records are the test surface, not the frames
    const ScanConfig scan{0.6, 360.0, 25.0, 100.0, "none"};
    const AcquisitionResult res =
        simulate_acquisition(empty, kInsectGeom, det, scan, model, opt, 606);

    expect(res.records.size() == 600, "600 delivered projections");
    expect(!res.controller_saturated, "controller stayed below n_max");

    // sampling std of the quality-factor estimator over the band
    const std::size_t band_px = 50u * 320u;
    const double q_rel_std = std::sqrt(1.0 / (2.0 * static_cast<double>(band_px)));
    bool above = true, nondecreasing = true;
    double worst_margin = 1e300;
    for (std::size_t i = 0; i < res.records.size(); ++i) {
        const double bound = opt.policy.threshold - 3.0 * q_rel_std * res.records[i].qef;
        worst_margin = std::min(worst_margin, res.records[i].qef - bound);
        above &= res.records[i].qef >= bound;
        if (i > 0) nondecreasing &= res.records[i].n_frames >= res.records[i - 1].n_frames;
    }
    expect(above, "every delivered Q_ef >= threshold - 3 estimator stds");
    expect(nondecreasing, "frame count sequence is nondecreasing");
    expect(res.records.back().n_frames > res.records.front().n_frames,
           "frame count grew to compensate the aging");
    std::fprintf(stderr, "    controller: N %d -> %d, worst margin %.3f\n",
                 res.records.front().n_frames, res.records.back().n_frames, worst_margin);
}

// ---------------------------------------------------------------- 6
void criterion_defects() {
    const DetectorSpec det{256, 256, 100.0, 4095.0};
    DegradationParams par;
    par.noise = true;
    par.hot_pixel_count = 100;
    par.dead_pixel_count = 100;
    const DegradationModel model = make_degradation_model(det, par, 99);
    double t_cursor = 0.0;
    const ReferencePair refs = acquire_references(model, 30, t_cursor, 99);
    const DefectMask mask = detect_defects(refs.dark, refs.flat, 5.0);

    int found = 0;
    for (const auto& [r, c] : model.hot_pixels) found += mask.at(r, c) ? 1 : 0;
    for (const auto& [r, c] : model.dead_pixels) found += mask.at(r, c) ? 1 : 0;
    const double recall = found / 200.0;
    const double fp_rate =
        (static_cast<double>(mask.masked_count()) - found) / static_cast<double>(mask.mask.size());
    expect(recall >= 0.99, "defect recall over 200 injected pixels", recall, 1.0, 0.01);
    expect(fp_rate <= 0.001, "false positive rate", fp_rate, 0.0, 0.001);

    const Image repaired = repair_defects(refs.flat, mask);
    const Image twice = repair_defects(repaired, mask);
    bool idempotent = true;
    for (std::size_t i = 0; i < repaired.size(); ++i) idempotent &= repaired[i] == twice[i];
    expect(idempotent, "repair is idempotent");
}

// ---------------------------------------------------------------- 7
void criterion_drift_slopes() {
    const DetectorSpec det{64, 64, 120.0, 65535.0};
    DegradationParams par;
    par.kd_per_s = 3e-5;
    par.kf_per_s = 8e-6;
    par.kd_scatter_frac = 0.3;
    par.kf_scatter_frac = 0.3;
    par.gain_sigma = 0.04;

    // noiseless: per-pixel recovery to 1e-9 relative
    par.noise = false;
    {
        const DegradationModel model = make_degradation_model(det, par, 55);
        double t_cursor = 0.0;
        const ReferencePair start = acquire_references(model, 8, t_cursor, 1);
        t_cursor = 7200.0;
        const ReferencePair end = acquire_references(model, 8, t_cursor, 2);
        const ReferenceSet refs = build_reference_set(start, end, DefectMask(det.rows, det.cols));
        const DriftSlopes slopes = estimate_drift_slopes(refs);

        double worst = 0.0;
        for (std::size_t p = 0; p < slopes.kd.size(); ++p) {
            const double kd_true = model.kd[p] / (1.0 + model.kd[p] * start.t_mid_s);
            const double photon = model.gain[p] * (model.ff0[p] - model.df0[p]);
            const double ff_mid = model.df0[p] * (1.0 + model.kd[p] * start.t_mid_s) +
                                  photon * (1.0 + model.kf[p] * start.t_mid_s);
            const double kf_true = (model.df0[p] * model.kd[p] + photon * model.kf[p]) / ff_mid;
            worst = std::max(worst, std::abs(slopes.kd[p] - kd_true) / kd_true);
            worst = std::max(worst, std::abs(slopes.kf[p] - kf_true) / kf_true);
        }
        expect(worst < 1e-9, "noiseless per-pixel slope recovery", worst, 0.0, 1e-9);
    }

    // with shot noise and 50-frame references: scalar summaries within 5%
    par.noise = true;
    {
        const DegradationModel model = make_degradation_model(det, par, 56);
        double t_cursor = 0.0;
        const ReferencePair start = acquire_references(model, 50, t_cursor, 3);
        t_cursor = 36000.0;
        const ReferencePair end = acquire_references(model, 50, t_cursor, 4);
        const DefectMask mask = detect_defects(start.dark, start.flat, 5.0);
        const ReferenceSet refs = build_reference_set(start, end, mask);
        const DriftSlopes slopes = estimate_drift_slopes(refs);

        std::vector<double> kd_true_v, kf_true_v;
        for (std::size_t p = 0; p < model.df0.size(); ++p) {
            kd_true_v.push_back(model.kd[p] / (1.0 + model.kd[p] * start.t_mid_s));
            const double photon = model.gain[p] * (model.ff0[p] - model.df0[p]);
            const double ff_mid = model.df0[p] * (1.0 + model.kd[p] * start.t_mid_s) +
                                  photon * (1.0 + model.kf[p] * start.t_mid_s);
            kf_true_v.push_back((model.df0[p] * model.kd[p] + photon * model.kf[p]) / ff_mid);
        }
        const double kd_true = vector_median(std::move(kd_true_v));
        const double kf_true = vector_median(std::move(kf_true_v));
        expect(std::abs(slopes.kd_scalar - kd_true) < 0.05 * kd_true, "noisy dark slope summary",
               slopes.kd_scalar, kd_true, 0.05 * kd_true);
        expect(std::abs(slopes.kf_scalar - kf_true) < 0.05 * kf_true, "noisy flat slope summary",
               slopes.kf_scalar, kf_true, 0.05 * kf_true);
    }
}

// ---------------------------------------------------------------- 8
void criterion_alignment() {
    const DetectorSpec det{65, 97, 120.0, 4095.0};
    const Phantom blob = testsupport::textured_phantom(40, 7.0, 99);
    ProjectorOptions po;
    po.use_grid = true;
    std::vector<double> angles;
    for (int k = 0; k < 24; ++k) angles.push_back(k * 15.0);
    std::vector<Image> stack;
    for (double a : angles) stack.push_back(forward_project_view(blob, kInsectGeom, det, a, po));

    AlignSearchParams par; // full production grid: +-3 deg at 0.05, +-50 px at 0.25
    par.max_pairs = 1;

    for (double tilt : {0.5, 1.0, 2.0}) {
        std::vector<Image> warped;
        for (const Image& p : stack) warped.push_back(rotate_image(p, tilt, 1.0));
        const AlignmentEstimate est = estimate_alignment(warped, angles, par);
        expect(std::abs(est.tilt_deg - tilt) < 0.1, "tilt recovery", est.tilt_deg, tilt, 0.1);
    }
    for (double off : {1.5, 3.5}) {
        std::vector<Image> warped;
        for (const Image& p : stack) warped.push_back(testsupport::shift_columns(p, off, 1.0));
        const AlignmentEstimate est = estimate_alignment(warped, angles, par);
        expect(std::abs(est.center_offset_px - off) < 0.25, "center offset recovery",
               est.center_offset_px, off, 0.25);
    }
}

// ---------------------------------------------------------------- 9
void criterion_fdk() {
    const DetectorSpec det{97, 97, 165.0, 1.0};
    const double mu = 0.05;
    const Phantom sphere = make_phantom(PhantomKind::uniform_sphere, 64, mu, 0.3, 12.0);
    std::vector<double> angles;
    for (int k = 0; k < 360; ++k) angles.push_back(k * 1.0);
    const auto stack = forward_project(sphere, kInsectGeom, det, angles);
    const GridSpec grid{64, 64, 64, 12.0 / 64.0};
    FilterSpec filter;
    filter.padding = 1024;
    const Volume vol =
        fdk_reconstruct(stack, angles, kInsectGeom, det, AlignmentEstimate{}, grid, filter);

    double sum_in = 0, rmse = 0, bg = 0;
    long n_in = 0, n_bg = 0;
    const double radius = sphere.outer_radius_mm();
    for (int iz = 0; iz < 64; ++iz)
        for (int iy = 0; iy < 64; ++iy)
            for (int ix = 0; ix < 64; ++ix) {
                const double x = vol.coord_x(ix), y = vol.coord_y(iy), z = vol.coord_z(iz);
                const double r = std::sqrt(x * x + y * y + z * z);
                const double v = vol.at(ix, iy, iz);
                if (r < 0.7 * radius) {
                    sum_in += v;
                    rmse += (v - mu) * (v - mu);
                    ++n_in;
                } else if (r > 1.3 * radius && r < 5.4) {
                    bg += std::abs(v);
                    ++n_bg;
                }
            }
    const double mean_in = sum_in / n_in;
    rmse = std::sqrt(rmse / n_in);
    const double bg_mean = bg / n_bg;
    expect(std::abs(mean_in - mu) < 0.05 * mu, "sphere interior mean", mean_in, mu, 0.05 * mu);
    expect(rmse < 0.05 * mu, "sphere interior rmse", rmse, 0.0, 0.05 * mu);
    expect(bg_mean < 0.05 * mu, "background mean abs", bg_mean, 0.0, 0.05 * mu);

    // point impulse localization
    {
        const DetectorSpec pdet{49, 49, 220.0, 1.0};
        const Phantom point = make_phantom(PhantomKind::point_impulse, 33, 3.0, 0.25, 6.6);
        std::vector<double> pangles;
        for (int k = 0; k < 60; ++k) pangles.push_back(k * 6.0);
        const auto pstack = forward_project(point, kInsectGeom, pdet, pangles);
        const GridSpec pgrid{33, 33, 33, 0.2};
        const Volume pv = fdk_reconstruct(pstack, pangles, kInsectGeom, pdet, AlignmentEstimate{},
                                          pgrid, FilterSpec{});
        int bx = 0, by = 0, bz = 0;
        double best = -1e300;
        for (int iz = 0; iz < 33; ++iz)
            for (int iy = 0; iy < 33; ++iy)
                for (int ix = 0; ix < 33; ++ix)
                    if (pv.at(ix, iy, iz) > best) {
                        best = pv.at(ix, iy, iz);
                        bx = ix;
                        by = iy;
                        bz = iz;
                    }
        const bool localized =
            std::abs(bx - 16) <= 1 && std::abs(by - 16) <= 1 && std::abs(bz - 16) <= 1;
        expect(localized, "point impulse localized within one voxel");
    }

    // central slice against the independent fan-beam oracle
    {
        std::vector<std::vector<double>> rows(stack.size());
        for (std::size_t v = 0; v < stack.size(); ++v) {
            rows[v].resize(static_cast<std::size_t>(det.cols));
            for (int c = 0; c < det.cols; ++c)
                rows[v][static_cast<std::size_t>(c)] = stack[v].at(48, c);
        }
        testsupport::FanGeometry fg{kInsectGeom.sod_mm, kInsectGeom.sdd_mm, det.pitch_mm(), 0.0};
        testsupport::FanGrid fgr{64, 12.0 / 64.0};
        const auto oracle = testsupport::fan_fbp_oracle(rows, angles, fg, fgr);
        double slice_rmse = 0.0;
        for (int iy = 0; iy < 64; ++iy)
            for (int ix = 0; ix < 64; ++ix) {
                const double d = vol.at(ix, iy, 32) -
                                 oracle[static_cast<std::size_t>(iy)][static_cast<std::size_t>(ix)];
                slice_rmse += d * d;
            }
        slice_rmse = std::sqrt(slice_rmse / (64.0 * 64.0));
        expect(slice_rmse < 0.02 * mu, "central slice vs fan-beam oracle rmse", slice_rmse, 0.0,
               0.02 * mu);
    }
}

// ---------------------------------------------------------------- 10
void criterion_end_to_end() {
    const DetectorSpec det{97, 97, 165.0, 65535.0};
    const double mu = 0.05;
    const Phantom nested = make_phantom(PhantomKind::nested_spheres, 64, mu, 0.3, 12.0);
    DegradationParams par;
    par.noise = true;
    par.df0_mean = 300.0;
    par.ff0_mean = 1500.0;
    par.kd_per_s = 3e-3; // the dark level roughly quadruples over the run
    par.kf_per_s = 1e-4;
    par.hot_pixel_count = 20;
    par.dead_pixel_count = 20;
    const DegradationModel model = make_degradation_model(det, par, 1010);

    AcquisitionOptions opt;
    opt.schedule.assign(240, 4);
    opt.n_ref = 16;
    const ScanConfig scan{1.5, 360.0, 25.0, 100.0, "none"};
    const AcquisitionResult res =
        simulate_acquisition(nested, kInsectGeom, det, scan, model, opt, 313);

    const DefectMask mask = detect_defects(res.refs_start.dark, res.refs_start.flat, 5.0);
    const ReferenceSet refs = build_reference_set(res.refs_start, res.refs_end, mask);
    const DriftSlopes slopes = estimate_drift_slopes(refs);

    auto correct_stack = [&](bool interpolated) {
        std::vector<Image> out;
        std::size_t frame = 0;
        for (std::size_t p = 0; p < res.records.size(); ++p) {
            std::vector<Image> group;
            while (frame < res.stack.frames.size() &&
                   res.stack.projection_index[frame] == static_cast<int>(p))
                group.push_back(res.stack.frames[frame++]);
            const Image avg = repair_defects(average_frames(group).mean, mask);
            const double t_rel =
                interpolated ? res.records[p].t_mid_s - res.refs_start.t_mid_s : 0.0;
            out.push_back(flat_field_correct(avg, t_rel, refs, slopes).ic);
        }
        return out;
    };
    std::vector<double> angles;
    for (const auto& rec : res.records) angles.push_back(rec.angle_deg);
    const GridSpec grid{64, 64, 64, 12.0 / 64.0};
    FilterSpec filter;
    filter.kind = FilterKind::hann; // noisy data
    filter.padding = 1024;

    const Volume vol_interp = fdk_reconstruct(correct_stack(true), angles, kInsectGeom, det,
                                              AlignmentEstimate{}, grid, filter);
    const Volume vol_static = fdk_reconstruct(correct_stack(false), angles, kInsectGeom, det,
                                              AlignmentEstimate{}, grid, filter);

    // inner/outer attenuation ratio from the interpolated reconstruction
    const double r_in = nested.inner_radius_mm();
    const double r_out = nested.outer_radius_mm();
    double sum_core = 0, sum_shell = 0, bg_i = 0, bg_s = 0;
    long n_core = 0, n_shell = 0, n_bg = 0;
    for (int iz = 0; iz < 64; ++iz)
        for (int iy = 0; iy < 64; ++iy)
            for (int ix = 0; ix < 64; ++ix) {
                const double x = vol_interp.coord_x(ix), y = vol_interp.coord_y(iy),
                             z = vol_interp.coord_z(iz);
                const double r = std::sqrt(x * x + y * y + z * z);
                if (r < 0.7 * r_in) {
                    sum_core += vol_interp.at(ix, iy, iz);
                    ++n_core;
                } else if (r > 1.25 * r_in && r < 0.85 * r_out) {
                    sum_shell += vol_interp.at(ix, iy, iz);
                    ++n_shell;
                } else if (r > 1.3 * r_out && r < 5.4) {
                    const double vi = vol_interp.at(ix, iy, iz);
                    const double vs = vol_static.at(ix, iy, iz);
                    bg_i += vi * vi;
                    bg_s += vs * vs;
                    ++n_bg;
                }
            }
    const double ratio = (sum_core / n_core) / (sum_shell / n_shell);
    expect(std::abs(ratio - 2.0) < 0.2, "inner/outer attenuation ratio", ratio, 2.0, 0.2);
    const double energy_ratio = bg_s / bg_i;
    expect(energy_ratio >= 2.0, "static correction leaves >= 2x the background artifact energy",
           energy_ratio, 2.0, 0.0);
    std::fprintf(stderr, "    end-to-end: ratio %.3f, artifact energy ratio %.1f\n", ratio,
                 energy_ratio);
}

// ---------------------------------------------------------------- 11
void criterion_edge_enhancement() {
    const DetectorSpec det{97, 97, 165.0, 1.0};
    const double mu = 0.05;
    const Phantom sphere = make_phantom(PhantomKind::uniform_sphere, 64, mu, 0.3, 12.0);
    std::vector<double> angles;
    for (int k = 0; k < 120; ++k) angles.push_back(k * 3.0);
    const auto absorption = forward_project(sphere, kInsectGeom, det, angles);
    std::vector<Image> enhanced;
    const double alpha = edge_alpha_for_distance(0.73, 25.0, 190.0); // ~2 px^2 at 19 cm
    for (const Image& t : absorption) enhanced.push_back(apply_edge_enhancement(t, alpha));

    const GridSpec grid{64, 64, 64, 12.0 / 64.0};
    FilterSpec filter;
    filter.padding = 1024;
    const Volume vol_abs =
        fdk_reconstruct(absorption, angles, kInsectGeom, det, AlignmentEstimate{}, grid, filter);
    const Volume vol_enh =
        fdk_reconstruct(enhanced, angles, kInsectGeom, det, AlignmentEstimate{}, grid, filter);

    // mean gradient magnitude over the boundary shell
    auto boundary_gradient = [&](const Volume& vol) {
        double acc = 0.0;
        long n = 0;
        for (int iz = 1; iz + 1 < 64; ++iz)
            for (int iy = 1; iy + 1 < 64; ++iy)
                for (int ix = 1; ix + 1 < 64; ++ix) {
                    const double x = vol.coord_x(ix), y = vol.coord_y(iy), z = vol.coord_z(iz);
                    const double r = std::sqrt(x * x + y * y + z * z);
                    if (std::abs(r - sphere.outer_radius_mm()) > 1.5 * grid.voxel_mm) continue;
                    const double gx = vol.at(ix + 1, iy, iz) - vol.at(ix - 1, iy, iz);
                    const double gy = vol.at(ix, iy + 1, iz) - vol.at(ix, iy - 1, iz);
                    const double gz = vol.at(ix, iy, iz + 1) - vol.at(ix, iy, iz - 1);
                    acc += std::sqrt(gx * gx + gy * gy + gz * gz);
                    ++n;
                }
        return acc / static_cast<double>(n);
    };
    const double g_abs = boundary_gradient(vol_abs);
    const double g_enh = boundary_gradient(vol_enh);
    const double gain = g_enh / g_abs;
    expect(gain > 1.5, "boundary gradient gain of the phase surrogate", gain, 1.5, 0.0);
    std::fprintf(stderr, "    edge gain: %.2f\n", gain);
}

struct Criterion {
    int id;
    const char* name;
    std::function<void()> fn;
};

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);

    const std::vector<Criterion> criteria = {
        {1, "geometry: published magnification and voxel sizes", criterion_geometry},
        {2, "interpolated flat-field exactness over a 10 h run", criterion_flatfield_exactness},
        {3, "averaging follows the square root law", criterion_sqrt_n},
        {4, "band noise grows with dose; more averages sit lower", criterion_aging_trend},
        {5, "closed-loop Q_ef regulation over 600 projections", criterion_controller},
        {6, "defective pixel detection and idempotent repair", criterion_defects},
        {7, "drift slope recovery", criterion_drift_slopes},
        {8, "tilt and center offset recovery", criterion_alignment},
        {9, "FDK correctness on the sphere, point and fan oracle", criterion_fdk},
        {10, "end-to-end aging run: dynamic beats static correction", criterion_end_to_end},
        {11, "phase-surrogate projections sharpen reconstructed edges",
         criterion_edge_enhancement},
    };

    int failed_criteria = 0;
    for (const Criterion& c : criteria) {
        if (only != 0 && c.id != only) continue;
        const int before = checks_failed;
        c.fn();
        const bool ok = checks_failed == before;
        std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", c.id, c.name);
        std::fflush(stdout);
        if (!ok) ++failed_criteria;
    }
    return failed_criteria == 0 ? 0 : 3;
}
