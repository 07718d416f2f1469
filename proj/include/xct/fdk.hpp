#pragma once

#include <cmath>
#include <complex>
#include <iostream>
#include <string>
#include <vector>

#include "xct/align.hpp"
#include "xct/errors.hpp"
#include "xct/fft.hpp"
#include "xct/geometry.hpp"
#include "xct/image.hpp"
#include "xct/parallel.hpp"
#include "xct/volume.hpp"

namespace xct {

enum class FilterKind { ram_lak, hann };

inline FilterKind filter_kind_from_string(const std::string& s) {
    if (s == "ram-lak") return FilterKind::ram_lak;
    if (s == "hann") return FilterKind::hann;
    throw config_error("unknown filter kind '" + s + "' (expected 'ram-lak' or 'hann')");
}

inline std::string to_string(FilterKind k) { return k == FilterKind::ram_lak ? "ram-lak" : "hann"; }

struct FilterSpec {
    FilterKind kind = FilterKind::ram_lak;
    int padding = 0; // 0 selects the next power of two >= 2x row width

    int padded_length(int width) const {
        if (padding == 0) return static_cast<int>(next_power_of_two(2 * static_cast<std::size_t>(width)));
        if (!is_power_of_two(static_cast<std::size_t>(padding)))
            throw config_error("filter: padding must be a power of two");
        if (padding < width) throw config_error("filter: padding must be >= row width");
        return padding;
    }
};

// Beer-Lambert inversion with a positivity floor. Values above 1
// (phase-contrast overshoot) pass through and give small negative line
// integrals.
inline Image log_transform(const Image& ic, double epsilon = 1e-6) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("log_transform: epsilon must be positive");
    Image out(ic.rows, ic.cols);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -std::log(std::max(ic[i], epsilon));
    return out;
}

// Feldkamp pre-weight: each ray scaled by the cosine of its angle to the
// central ray, SDD / sqrt(SDD^2 + u^2 + v^2) in detector-plane coordinates
// measured from the piercing point.
inline Image cosine_weight(const Image& p, const ConeBeamGeometry& geom, const DetectorSpec& det,
                           double center_offset_px = 0.0) {
    if (p.rows != det.rows || p.cols != det.cols)
        throw std::invalid_argument("cosine_weight: image does not match detector");
    Image out(p.rows, p.cols);
    const double pitch = det.pitch_mm();
    const double uc = (det.cols - 1) * 0.5 + center_offset_px;
    const double vc = (det.rows - 1) * 0.5;
    const double d2 = geom.sdd_mm * geom.sdd_mm;
    for (int r = 0; r < p.rows; ++r) {
        const double v = (r - vc) * pitch;
        for (int c = 0; c < p.cols; ++c) {
            const double u = (c - uc) * pitch;
            out.at(r, c) = p.at(r, c) * geom.sdd_mm / std::sqrt(d2 + u * u + v * v);
        }
    }
    return out;
}

// Frequency response of the band-limited ramp: |f| sampled on the padded
// grid up to the detector Nyquist. Its impulse response reproduces the
// closed-form kernel taps (1/4, 0, -1/(pi k)^2, ...) to the aliasing
// residue of the padding length, and the zero DC bin annihilates constant
// rows exactly. The hann variant multiplies on a raised-cosine window that
// reaches zero at Nyquist.
inline std::vector<double> ramp_filter_response(int padded, double du_mm, FilterKind kind) {
    std::vector<double> response(static_cast<std::size_t>(padded));
    const double pi = 3.14159265358979323846;
    for (int k = 0; k < padded; ++k) {
        const int folded = k <= padded / 2 ? k : padded - k;
        response[static_cast<std::size_t>(k)] = static_cast<double>(folded) / (padded * du_mm);
    }
    if (kind == FilterKind::hann) {
        for (int k = 0; k < padded; ++k)
            response[static_cast<std::size_t>(k)] *= 0.5 * (1.0 + std::cos(2.0 * pi * k / padded));
    }
    return response;
}

// Fills the circular pad region by replicating the row's end values, each
// end extending toward the middle of the pad. Physical projections decay
// to zero at the row ends (air), where this matches zero padding exactly;
// rows with nonzero boundaries (including constants, which must map to
// zero) avoid the rect truncation ringing that plain zero padding rings in.
inline void pad_row_replicated(std::vector<std::complex<double>>& buf, const Image& p, int row) {
    const int cols = p.cols;
    const int padded = static_cast<int>(buf.size());
    for (int c = 0; c < cols; ++c) buf[static_cast<std::size_t>(c)] = p.at(row, c);
    const double left = p.at(row, 0);
    const double right = p.at(row, cols - 1);
    const int split = cols + (padded - cols) / 2;
    for (int c = cols; c < split; ++c) buf[static_cast<std::size_t>(c)] = right;
    for (int c = split; c < padded; ++c) buf[static_cast<std::size_t>(c)] = left;
}

// Row-wise ramp filtering by frequency-domain multiplication after
// power-of-two padding.
inline Image ramp_filter(const Image& p, const FilterSpec& spec, double du_mm, int threads = 1) {
    const int padded = spec.padded_length(p.cols);
    const std::vector<double> response = ramp_filter_response(padded, du_mm, spec.kind);
    Image out(p.rows, p.cols);
    parallel_for_chunks(0, p.rows, threads, [&](std::int64_t r0, std::int64_t r1) {
        std::vector<std::complex<double>> buf(static_cast<std::size_t>(padded));
        for (std::int64_t r = r0; r < r1; ++r) {
            pad_row_replicated(buf, p, static_cast<int>(r));
            fft(buf, false);
            for (int k = 0; k < padded; ++k) buf[static_cast<std::size_t>(k)] *= response[static_cast<std::size_t>(k)];
            fft(buf, true);
            for (int c = 0; c < p.cols; ++c) out.at(static_cast<int>(r), c) = buf[static_cast<std::size_t>(c)].real();
        }
    });
    return out;
}

struct BackprojectOptions {
    int threads = 1;
    int slabs = 0; // 0: one slab per thread; results do not depend on the split
};

// Voxel-driven cone-beam backprojection. Every voxel is pushed through the
// view geometry onto the detector (shifted by the center offset), the
// filtered value fetched bilinearly, weighted by the source-distance
// factor, and accumulated; the angular step and fan scale are applied once
// at the end. Voxels projecting off the detector contribute nothing.
inline Volume backproject(const std::vector<Image>& filtered, const std::vector<double>& angles_deg,
                          const ConeBeamGeometry& geom, const DetectorSpec& det,
                          const GridSpec& grid, double center_offset_px = 0.0,
                          const BackprojectOptions& opt = {}) {
    grid.validate();
    Volume vol(grid.nx, grid.ny, grid.nz, grid.voxel_mm);
    if (filtered.empty()) {
        std::cerr << "backproject: empty angle list, returning zero volume\n";
        return vol;
    }
    if (filtered.size() != angles_deg.size())
        throw std::invalid_argument("backproject: stack and angle list mismatch");

    const double deg2rad = 0.017453292519943295;
    const double pitch = det.pitch_mm();
    const double inv_pitch = 1.0 / pitch;
    const double uc = (det.cols - 1) * 0.5 + center_offset_px;
    const double vc = (det.rows - 1) * 0.5;
    const double sod = geom.sod_mm, sdd = geom.sdd_mm;
    const std::size_t nviews = filtered.size();
    std::vector<double> cs(nviews), sn(nviews);
    for (std::size_t k = 0; k < nviews; ++k) {
        cs[k] = std::cos(angles_deg[k] * deg2rad);
        sn[k] = std::sin(angles_deg[k] * deg2rad);
    }

    const int threads = effective_threads(opt.threads);
    const int slabs = opt.slabs > 0 ? opt.slabs : threads;
    parallel_for_chunks(0, grid.nz, slabs, [&](std::int64_t z0, std::int64_t z1) {
        for (std::int64_t iz = z0; iz < z1; ++iz) {
            const double z = vol.coord_z(static_cast<int>(iz));
            for (std::size_t k = 0; k < nviews; ++k) {
                const Image& q = filtered[k];
                const double c = cs[k], s = sn[k];
                for (int iy = 0; iy < grid.ny; ++iy) {
                    const double y = vol.coord_y(iy);
                    double xl = vol.coord_x(0) * c - y * s;
                    double yl = vol.coord_x(0) * s + y * c;
                    const double dxl = grid.voxel_mm * c;
                    const double dyl = grid.voxel_mm * s;
                    double* out_row = &vol.data[vol.index(0, iy, static_cast<int>(iz))];
                    for (int ix = 0; ix < grid.nx; ++ix, xl += dxl, yl += dyl) {
                        const double dist = sod + xl; // source to the voxel's plane
                        if (dist <= 1e-6) continue;
                        const double mag = sdd / dist;
                        const double col = yl * mag * inv_pitch + uc;
                        const double row = z * mag * inv_pitch + vc;
                        const int c0 = static_cast<int>(std::floor(col));
                        const int r0 = static_cast<int>(std::floor(row));
                        if (c0 < 0 || r0 < 0 || c0 + 1 >= det.cols || r0 + 1 >= det.rows) continue;
                        const double fc = col - c0, fr = row - r0;
                        const double val = q.at(r0, c0) * (1 - fr) * (1 - fc) +
                                           q.at(r0, c0 + 1) * (1 - fr) * fc +
                                           q.at(r0 + 1, c0) * fr * (1 - fc) +
                                           q.at(r0 + 1, c0 + 1) * fr * fc;
                        out_row[ix] += val * (sod * sdd) / (dist * dist);
                    }
                }
            }
        }
    });

    // full-scan normalization: delta_beta / 2
    const double dbeta = 2.0 * 3.14159265358979323846 / static_cast<double>(nviews);
    const double scale = 0.5 * dbeta;
    for (double& v : vol.data) v *= scale;
    return vol;
}

struct FdkOptions {
    double log_epsilon = 1e-6;
    bool apply_tilt_correction = true;
    int threads = 1;
    int slabs = 0;
};

// The whole reconstruction chain: optional tilt correction, log transform,
// cosine weighting, row-wise ramp filtering, then backprojection with the
// center offset as a detector shift (no second resampling pass).
inline Volume fdk_reconstruct(const std::vector<Image>& corrected,
                              const std::vector<double>& angles_deg, const ConeBeamGeometry& geom,
                              const DetectorSpec& det, const AlignmentEstimate& alignment,
                              const GridSpec& grid, const FilterSpec& filter,
                              const FdkOptions& opt = {}) {
    std::vector<Image> views = (opt.apply_tilt_correction && alignment.tilt_deg != 0.0)
                                   ? correct_tilt(corrected, alignment.tilt_deg, opt.threads)
                                   : corrected;
    const int padded = filter.padded_length(det.cols);
    const std::vector<double> response = ramp_filter_response(padded, det.pitch_mm(), filter.kind);

    parallel_for_chunks(0, static_cast<std::int64_t>(views.size()), opt.threads,
                        [&](std::int64_t a, std::int64_t b) {
                            std::vector<std::complex<double>> buf(static_cast<std::size_t>(padded));
                            for (std::int64_t k = a; k < b; ++k) {
                                Image& img = views[static_cast<std::size_t>(k)];
                                img = cosine_weight(log_transform(img, opt.log_epsilon), geom, det,
                                                    alignment.center_offset_px);
                                for (int r = 0; r < img.rows; ++r) {
                                    pad_row_replicated(buf, img, r);
                                    fft(buf, false);
                                    for (int f = 0; f < padded; ++f)
                                        buf[static_cast<std::size_t>(f)] *= response[static_cast<std::size_t>(f)];
                                    fft(buf, true);
                                    for (int c = 0; c < img.cols; ++c)
                                        img.at(r, c) = buf[static_cast<std::size_t>(c)].real();
                                }
                            }
                        });

    BackprojectOptions bopt;
    bopt.threads = opt.threads;
    bopt.slabs = opt.slabs;
    return backproject(views, angles_deg, geom, det, grid, alignment.center_offset_px, bopt);
}

} // namespace xct
