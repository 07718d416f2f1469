#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "xct/fdk.hpp"
#include "xct/geometry.hpp"
#include "xct/preprocess.hpp"
#include "xct/rng.hpp"

namespace xct {

// Fast built-in sanity battery for installed binaries; returns the number
// of failed checks. The full acceptance suite lives in the test tree.
inline int run_selftest() {
    int failures = 0;
    auto check = [&](const std::string& name, bool ok) {
        std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name.c_str());
        if (!ok) ++failures;
    };

    {
        const auto g = ConeBeamGeometry::from_object_to_sensor(750.0, 190.0);
        const DetectorSpec det{1024, 1280, 5.2, 4095.0};
        check("magnification of the insect preset is 1.339",
              std::abs(magnification(g) - 1.3392857142857142) < 1e-12);
        check("voxel size of the insect preset rounds to 3.9 um",
              std::abs(voxel_size_um(g, det) - 3.8826666666) < 1e-4);
    }
    {
        ReferenceSet refs;
        refs.df0 = Image(2, 2, 10.0);
        refs.ff0 = Image(2, 2, 110.0);
        refs.df_end = Image(2, 2, 10.0 * 1.2);
        refs.ff_end = Image(2, 2, 110.0 * 1.1);
        refs.t_end_s = 1000.0;
        const DriftSlopes slopes = estimate_drift_slopes(refs);
        Image cc(2, 2, 60.0);
        const double t = 500.0;
        const FlatFieldResult r = flat_field_correct(cc, t, refs, slopes);
        const double expect = (60.0 - 11.0) / (110.0 * 1.05 - 11.0);
        check("interpolated flat-field matches hand arithmetic",
              std::abs(r.ic[0] - expect) < 1e-12);
    }
    {
        const auto h = ramp_filter_response(1024, 1.0, FilterKind::ram_lak);
        Image impulse(1, 400, 0.0);
        impulse.at(0, 200) = 1.0;
        FilterSpec spec;
        spec.padding = 1024;
        const Image q = ramp_filter(impulse, spec, 1.0);
        const double pi2 = 9.869604401089358;
        const bool taps_ok = std::abs(q.at(0, 200) - 0.25) < 1e-5 &&
                             std::abs(q.at(0, 201) + 1.0 / pi2) < 1e-5 &&
                             std::abs(q.at(0, 202)) < 1e-5;
        check("band-limited ramp kernel taps", taps_ok && !h.empty());
    }
    {
        Rng rng(42);
        double sum = 0.0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) sum += sample_poisson(rng, 400.0);
        const double mean = sum / n;
        check("poisson sampler mean", std::abs(mean - 400.0) < 1.0);
    }
    {
        Image img(8, 8, 10.0);
        DefectMask mask(8, 8);
        mask.set(3, 3);
        mask.set(3, 4);
        img.at(3, 3) = 4000.0;
        img.at(3, 4) = 0.0;
        const Image once = repair_defects(img, mask);
        const Image twice = repair_defects(once, mask);
        bool same = true;
        for (std::size_t i = 0; i < once.size(); ++i) same &= once[i] == twice[i];
        check("defect repair is idempotent", same && once.at(3, 3) == 10.0);
    }
    return failures;
}

} // namespace xct
