#pragma once

// Test-only helpers and independent oracles. Nothing in here may call into
// the implementation paths it is used to check: the fan-beam FBP oracle
// builds its own kernel and backprojector, the DFT is the quadratic-time
// textbook sum.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "xct/image.hpp"
#include "xct/phantom.hpp"
#include "xct/rng.hpp"

namespace testsupport {

// A spherical blob of smooth random attenuation. Registration tests need
// azimuthally rich projections; the geometric phantoms are all too
// symmetric to pin a rotation. Project it with use_grid = true (the
// analytic shape no longer matches the map).
inline xct::Phantom textured_phantom(int grid, double extent_mm, std::uint64_t seed,
                                     double mu_max = 0.16) {
    xct::Phantom p = xct::make_phantom(xct::PhantomKind::uniform_sphere, grid, mu_max, 0.4,
                                       extent_mm);
    xct::Rng rng(seed);
    std::vector<double> noise(p.attenuation_map.size());
    for (double& v : noise) v = rng.next_unit();
    const auto id = [grid](int x, int y, int z) {
        return (static_cast<std::size_t>(z) * grid + y) * grid + x;
    };
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<double> s(noise.size(), 0.0);
        for (int z = 1; z + 1 < grid; ++z)
            for (int y = 1; y + 1 < grid; ++y)
                for (int x = 1; x + 1 < grid; ++x)
                    s[id(x, y, z)] = (noise[id(x, y, z)] + noise[id(x - 1, y, z)] +
                                      noise[id(x + 1, y, z)] + noise[id(x, y - 1, z)] +
                                      noise[id(x, y + 1, z)] + noise[id(x, y, z - 1)] +
                                      noise[id(x, y, z + 1)]) /
                                     7.0;
        noise.swap(s);
    }
    const double half = (grid - 1) * 0.5;
    const double radius = p.outer_radius_mm();
    std::size_t i = 0;
    for (int z = 0; z < grid; ++z)
        for (int y = 0; y < grid; ++y)
            for (int x = 0; x < grid; ++x, ++i) {
                const double xm = (x - half) * p.grid_spacing_mm;
                const double ym = (y - half) * p.grid_spacing_mm;
                const double zm = (z - half) * p.grid_spacing_mm;
                const double r = std::sqrt(xm * xm + ym * ym + zm * zm);
                const double window = std::clamp((radius - r) / (0.25 * radius), 0.0, 1.0);
                p.attenuation_map[i] = mu_max * noise[i] * window;
            }
    return p;
}

inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x,
                                                   bool inverse) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t m = 0; m < n; ++m) {
            const double ang = sign * 2.0 * M_PI * static_cast<double>(k * m % n) / static_cast<double>(n);
            acc += x[m] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = inverse ? acc / static_cast<double>(n) : acc;
    }
    return out;
}

inline double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline std::vector<double> ranks_of(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<double>(i);
    return rank;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const std::vector<double> rx = ranks_of(x), ry = ranks_of(y);
    const double mx = mean_of(rx), my = mean_of(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// Horizontal subpixel shift of image content by dx columns (bilinear).
inline xct::Image shift_columns(const xct::Image& img, double dx, double fill) {
    xct::Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c)
            out.at(r, c) = xct::bilinear_sample(img, r, c - dx, fill);
    return out;
}

// --- independent 2D fan-beam filtered backprojection oracle -----------------
//
// Flat equispaced detector, full circular scan, sample-rotates convention.
// Spatial-domain convolution with the truncated band-limited ramp and a
// straightforward pixel-driven backprojection; shares no code with the
// implementation under test.

struct FanGeometry {
    double sod_mm;
    double sdd_mm;
    double pitch_mm;
    double center_offset_px = 0.0;
};

struct FanGrid {
    int n;           // n x n pixels
    double voxel_mm; // centered on the rotation axis
};

inline std::vector<std::vector<double>> fan_fbp_oracle(
    const std::vector<std::vector<double>>& row_transmission, // [view][col]
    const std::vector<double>& angles_deg, const FanGeometry& geom, const FanGrid& grid) {
    const std::size_t nviews = row_transmission.size();
    const int cols = static_cast<int>(row_transmission.front().size());
    const double uc = (cols - 1) * 0.5 + geom.center_offset_px;

    // cosine weight + log transform
    std::vector<std::vector<double>> weighted(nviews, std::vector<double>(cols));
    for (std::size_t v = 0; v < nviews; ++v)
        for (int c = 0; c < cols; ++c) {
            const double u = (c - uc) * geom.pitch_mm;
            const double p = -std::log(std::max(row_transmission[v][c], 1e-6));
            weighted[v][c] = p * geom.sdd_mm / std::sqrt(geom.sdd_mm * geom.sdd_mm + u * u);
        }

    // band-limited ramp kernel, direct linear convolution over the
    // zero-extended row (the shadow is compactly supported, so the data
    // really is zero beyond the detector; extending shrinks the kernel
    // truncation residue)
    const int ext = 2 * cols; // zero samples added on each side
    const int klen = cols + 2 * ext;
    std::vector<double> kernel(static_cast<std::size_t>(2 * klen - 1));
    const double du = geom.pitch_mm;
    for (int k = -(klen - 1); k <= klen - 1; ++k) {
        double h;
        if (k == 0)
            h = 1.0 / (4.0 * du * du);
        else if (k % 2 != 0)
            h = -1.0 / (M_PI * M_PI * k * k * du * du);
        else
            h = 0.0;
        kernel[static_cast<std::size_t>(k + klen - 1)] = h;
    }
    std::vector<std::vector<double>> filtered(nviews, std::vector<double>(cols, 0.0));
    for (std::size_t v = 0; v < nviews; ++v)
        for (int n = 0; n < cols; ++n) {
            double acc = 0.0;
            for (int m = 0; m < cols; ++m)
                acc += kernel[static_cast<std::size_t>(n - m + klen - 1)] * weighted[v][m];
            filtered[v][n] = acc * du;
        }

    // pixel-driven backprojection with the fan distance weight
    std::vector<std::vector<double>> out(static_cast<std::size_t>(grid.n),
                                         std::vector<double>(grid.n, 0.0));
    const double dbeta = 2.0 * M_PI / static_cast<double>(nviews);
    for (std::size_t v = 0; v < nviews; ++v) {
        const double th = angles_deg[v] * M_PI / 180.0;
        const double ct = std::cos(th), st = std::sin(th);
        for (int iy = 0; iy < grid.n; ++iy) {
            const double y = (iy - (grid.n - 1) * 0.5) * grid.voxel_mm;
            for (int ix = 0; ix < grid.n; ++ix) {
                const double x = (ix - (grid.n - 1) * 0.5) * grid.voxel_mm;
                const double xl = x * ct - y * st;
                const double yl = x * st + y * ct;
                const double dist = geom.sod_mm + xl;
                if (dist <= 0.0) continue;
                const double col = yl * geom.sdd_mm / dist / geom.pitch_mm + uc;
                const int c0 = static_cast<int>(std::floor(col));
                if (c0 < 0 || c0 + 1 >= cols) continue;
                const double f = col - c0;
                const double q = filtered[v][static_cast<std::size_t>(c0)] * (1.0 - f) +
                                 filtered[v][static_cast<std::size_t>(c0) + 1] * f;
                out[static_cast<std::size_t>(iy)][static_cast<std::size_t>(ix)] +=
                    q * geom.sod_mm * geom.sdd_mm / (dist * dist);
            }
        }
    }
    for (auto& row : out)
        for (double& f : row) f *= 0.5 * dbeta;
    return out;
}

} // namespace testsupport
