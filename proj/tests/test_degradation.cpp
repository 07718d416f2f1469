#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "support/helpers.hpp"
#include "xct/acquisition.hpp"
#include "xct/degradation.hpp"

using namespace xct;

namespace {

DegradationModel flat_model(int rows, int cols, double df0, double ff0, double kd, double kf,
                            bool noise) {
    DegradationModel m;
    m.df0 = Image(rows, cols, df0);
    m.ff0 = Image(rows, cols, ff0);
    m.gain = Image(rows, cols, 1.0);
    m.kd = Image(rows, cols, kd);
    m.kf = Image(rows, cols, kf);
    m.ceiling = 65535.0;
    m.noise_enabled = noise;
    m.mean_flat_photon_level = ff0 - df0;
    return m;
}

} // namespace

TEST_CASE("frame model at the calibration points", "[degradation]") {
    const Image full(8, 8, 1.0);
    const Image none(8, 8, 0.0);

    SECTION("noise off, t = 0, full transmission gives the flat frame") {
        DegradationModel m = flat_model(8, 8, 200.0, 1400.0, 2e-5, 5e-6, false);
        // with a non-unit gain the photon term scales, the dark term does not
        m.gain.fill(1.1);
        const Image f = simulate_frame(full, m, 0.0, 1);
        CHECK(f.at(3, 3) == Approx(200.0 + 1.1 * 1200.0).margin(1e-12));
    }
    SECTION("noise off, t = 0, zero transmission gives the dark frame") {
        const DegradationModel m = flat_model(8, 8, 200.0, 1400.0, 2e-5, 5e-6, false);
        const Image f = simulate_frame(none, m, 0.0, 1);
        CHECK(f.at(0, 0) == Approx(200.0).margin(1e-12));
    }
    SECTION("dark contribution doubles when kd * t = 1") {
        const double kd = 2e-5;
        const DegradationModel m = flat_model(8, 8, 200.0, 1400.0, kd, 0.0, false);
        const Image f0 = simulate_frame(full, m, 0.0, 1);
        const Image f1 = simulate_frame(full, m, 1.0 / kd, 1);
        // photon part is unchanged (kf = 0), so the difference is exactly DF0
        CHECK(f1.at(2, 5) - f0.at(2, 5) == Approx(200.0).margin(1e-9));
    }
    SECTION("noise off is exactly linear in t") {
        const DegradationModel m = flat_model(8, 8, 200.0, 1400.0, 2e-5, 5e-6, false);
        const Image fa = simulate_frame(full, m, 100.0, 1);
        const Image fb = simulate_frame(full, m, 300.0, 1);
        const Image fmid = simulate_frame(full, m, 200.0, 1);
        CHECK(0.5 * (fa.at(1, 1) + fb.at(1, 1)) == Approx(fmid.at(1, 1)).margin(1e-9));
    }
    SECTION("same seed reproduces the frame, different seed does not") {
        const DegradationModel m = flat_model(8, 8, 200.0, 1400.0, 2e-5, 5e-6, true);
        const Image a = simulate_frame(full, m, 5.0, 77);
        const Image b = simulate_frame(full, m, 5.0, 77);
        const Image c = simulate_frame(full, m, 5.0, 78);
        bool same = true, differs = false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            same &= a[i] == b[i];
            differs |= a[i] != c[i];
        }
        CHECK(same);
        CHECK(differs);
    }
    SECTION("frame generation is identical under any thread count") {
        const DegradationModel m = flat_model(16, 16, 200.0, 1400.0, 2e-5, 5e-6, true);
        const Image full16(16, 16, 1.0);
        const Image serial = simulate_frame(full16, m, 7.0, 123, 1);
        const Image parallel = simulate_frame(full16, m, 7.0, 123, 4);
        bool same = true;
        for (std::size_t i = 0; i < serial.size(); ++i) same &= serial[i] == parallel[i];
        CHECK(same);
    }
    SECTION("hot pixels pin near the ceiling, dead pixels near zero") {
        DegradationModel m = flat_model(8, 8, 200.0, 1400.0, 0.0, 0.0, true);
        m.ceiling = 4095.0;
        m.hot_pixels = {{2, 2}};
        m.dead_pixels = {{5, 5}};
        const Image f = simulate_frame(full, m, 0.0, 3);
        CHECK(f.at(2, 2) > 0.9 * m.ceiling);
        CHECK(f.at(5, 5) < 20.0);
        CHECK(f.at(2, 2) <= m.ceiling);
    }
    SECTION("values clip to the detector ceiling") {
        DegradationModel m = flat_model(4, 4, 100.0, 9000.0, 0.0, 0.0, true);
        m.ceiling = 4095.0;
        const Image f = simulate_frame(Image(4, 4, 1.0), m, 0.0, 9);
        CHECK(image_max_abs(f) <= 4095.0);
    }
}

TEST_CASE("edge enhancement surrogate", "[degradation]") {
    SECTION("alpha zero is the identity") {
        Image t(6, 6, 0.7);
        t.at(2, 3) = 0.4;
        const Image out = apply_edge_enhancement(t, 0.0);
        bool same = true;
        for (std::size_t i = 0; i < t.size(); ++i) same &= out[i] == t[i];
        CHECK(same);
    }
    SECTION("constant images are unchanged") {
        const Image t(6, 9, 0.8);
        const Image out = apply_edge_enhancement(t, 2.0);
        double max_diff = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i)
            max_diff = std::max(max_diff, std::abs(out[i] - t[i]));
        CHECK(max_diff == 0.0);
    }
    SECTION("a step edge over/undershoots by alpha times the step") {
        // step of height h along columns: the 5-point laplacian at the last
        // high pixel is -h, at the first low pixel +h
        const double h = 0.5, alpha = 0.3;
        Image t(7, 10, 0.0);
        for (int r = 0; r < t.rows; ++r)
            for (int c = 0; c < 5; ++c) t.at(r, c) = h;
        const Image out = apply_edge_enhancement(t, alpha);
        CHECK(out.at(3, 4) == Approx(h + alpha * h));
        CHECK(out.at(3, 5) == Approx(1e-6)); // 0 - alpha*h clamps to the floor
        CHECK(out.at(3, 2) == Approx(h));    // away from the edge nothing changes
    }
    SECTION("alpha follows the sqrt-distance fringe scaling") {
        CHECK(edge_alpha_for_distance(1.0, 25.0, 190.0) == Approx(std::sqrt(190.0 / 25.0)));
    }
}

TEST_CASE("averaging follows the square root law", "[degradation]") {
    // per-pixel std of N-frame averages vs sigma_1 / sqrt(N)
    const DegradationModel m = flat_model(24, 24, 200.0, 1400.0, 0.0, 0.0, true);
    const Image full(24, 24, 1.0);

    const int trials = 400;
    std::vector<double> single;
    single.reserve(trials);
    std::uint64_t seed = 0;
    for (int i = 0; i < trials; ++i)
        single.push_back(simulate_frame(full, m, 0.0, hash_seed(5, seed++)).at(7, 7));
    const double sigma1 = testsupport::sample_std(single);

    for (int n_avg : {4, 16, 64}) {
        std::vector<double> means;
        means.reserve(trials);
        for (int i = 0; i < trials; ++i) {
            double acc = 0.0;
            for (int k = 0; k < n_avg; ++k)
                acc += simulate_frame(full, m, 0.0, hash_seed(6, seed++)).at(7, 7);
            means.push_back(acc / n_avg);
        }
        const double expected = sigma1 / std::sqrt(static_cast<double>(n_avg));
        CHECK(testsupport::sample_std(means) == Approx(expected).epsilon(0.10));
    }
}

TEST_CASE("band noise grows with cumulative irradiation time", "[degradation]") {
    // uniform maps so the spatial band std is pure counting noise
    const DegradationModel m = flat_model(48, 64, 300.0, 1500.0, 3e-4, 1e-4, true);
    const Image full(48, 64, 1.0);
    const int n_avg = 5;
    std::vector<double> times, stds;
    std::uint64_t seed = 100;
    for (int j = 0; j < 10; ++j) {
        const double t = 400.0 * j;
        Image acc(48, 64, 0.0);
        for (int k = 0; k < n_avg; ++k) {
            const Image f = simulate_frame(full, m, t, hash_seed(9, seed++));
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f[i];
        }
        for (double& v : acc.data) v /= n_avg;
        times.push_back(t);
        stds.push_back(image_std(acc));
    }
    CHECK(testsupport::spearman(times, stds) > 0.9);
}

TEST_CASE("acquisition bookkeeping and timing", "[acquisition]") {
    const DetectorSpec det{16, 16, 100.0, 65535.0};
    const ConeBeamGeometry geom = ConeBeamGeometry::from_object_to_sensor(750.0, 190.0);
    DegradationParams par;
    par.noise = false;
    par.df0_sigma = 2.0;
    par.ff0_sigma = 10.0;
    const DegradationModel model = make_degradation_model(det, par, 11);
    const Phantom empty = make_phantom(PhantomKind::uniform_sphere, 16, 0.0, 0.4, 5.0);

    SECTION("one angle, one frame lands at one second of beam time") {
        AcquisitionOptions opt;
        opt.schedule = {1};
        opt.n_ref = 2;
        const ScanConfig scan{360.0, 360.0, 0, 0, ""};
        const AcquisitionResult res = simulate_acquisition(empty, geom, det, scan, model, opt, 1);
        REQUIRE(res.stack.frames.size() == 1);
        // the n_ref interleaved flats precede the projections
        CHECK(res.stack.cumulative_time_s[0] == Approx(3.0));
        CHECK(res.stack.cumulative_time_s[0] - res.refs_start.t_mid_s == Approx(1.5));
    }

    SECTION("three angles of two frames each count six seconds") {
        AcquisitionOptions opt;
        opt.schedule = {2, 2, 2};
        opt.n_ref = 1;
        const ScanConfig scan{120.0, 360.0, 0, 0, ""};
        const AcquisitionResult res = simulate_acquisition(empty, geom, det, scan, model, opt, 1);
        REQUIRE(res.stack.frames.size() == 6);
        for (int k = 0; k < 6; ++k)
            CHECK(res.stack.cumulative_time_s[static_cast<std::size_t>(k)] -
                      res.refs_start.t_mid_s ==
                  Approx(k + 1.0)); // 1..6 s after the start references
        CHECK(res.records[1].t_mid_s - res.refs_start.t_mid_s == Approx(3.5));
        CHECK(res.records[1].n_frames == 2);
        res.stack.validate();
    }

    SECTION("schedule must match the angle count") {
        AcquisitionOptions opt;
        opt.schedule = {2, 2};
        const ScanConfig scan{120.0, 360.0, 0, 0, ""};
        CHECK_THROWS_AS(simulate_acquisition(empty, geom, det, scan, model, opt, 1), config_error);
    }

    SECTION("dark-region noise grows between the start and end of a long run") {
        DegradationParams noisy = par;
        noisy.noise = true;
        noisy.kd_per_s = 2e-4;
        const DegradationModel m2 =
            make_degradation_model(DetectorSpec{32, 32, 100.0, 65535.0}, noisy, 21);
        const Image none(32, 32, 0.0);
        const Image early = simulate_frame(none, m2, 0.0, 501);
        const Image late = simulate_frame(none, m2, 3600.0, 502);
        CHECK(image_std(late) > image_std(early));
    }
}

TEST_CASE("interleaved references share one dose midpoint", "[acquisition]") {
    const DetectorSpec det{12, 12, 100.0, 65535.0};
    DegradationParams par;
    par.noise = false;
    par.kd_per_s = 1e-4;
    par.kf_per_s = 5e-5;
    const DegradationModel model = make_degradation_model(det, par, 3);

    double t_cursor = 10.0;
    const ReferencePair refs = acquire_references(model, 5, t_cursor, 17);
    CHECK(t_cursor == Approx(15.0));
    CHECK(refs.t_mid_s == Approx(13.0)); // flats at 11..15 s, darks ride along

    // noiseless averages equal the instantaneous maps at the midpoint
    const Image expect_dark = expected_signal(model, Image(12, 12, 0.0), refs.t_mid_s);
    const Image expect_flat = expected_signal(model, Image(12, 12, 1.0), refs.t_mid_s);
    double dark_err = 0.0, flat_err = 0.0;
    for (std::size_t i = 0; i < expect_dark.size(); ++i) {
        dark_err = std::max(dark_err, std::abs(refs.dark[i] - expect_dark[i]));
        flat_err = std::max(flat_err, std::abs(refs.flat[i] - expect_flat[i]));
    }
    CHECK(dark_err < 1e-9);
    CHECK(flat_err < 1e-9);
}
