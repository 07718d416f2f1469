#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "xct/errors.hpp"
#include "xct/geometry.hpp"

namespace xct {

// Reconstructed attenuation grid in mm^-1. Data is z-major ([iz][iy][ix]);
// origin is the world position of voxel (0,0,0)'s center, with the grid
// centered on the rotation axis by default.
struct Volume {
    int nx = 0, ny = 0, nz = 0;
    std::array<double, 3> voxel_mm{0, 0, 0};
    std::array<double, 3> origin_mm{0, 0, 0};
    std::vector<double> data;

    Volume() = default;
    Volume(int nx_, int ny_, int nz_, double voxel)
        : nx(nx_), ny(ny_), nz(nz_), voxel_mm{voxel, voxel, voxel},
          data(static_cast<std::size_t>(nx_) * ny_ * nz_, 0.0) {
        if (nx_ <= 0 || ny_ <= 0 || nz_ <= 0)
            throw std::invalid_argument("Volume: dimensions must be positive");
        origin_mm = {-(nx - 1) * 0.5 * voxel, -(ny - 1) * 0.5 * voxel, -(nz - 1) * 0.5 * voxel};
    }

    std::size_t size() const { return data.size(); }
    std::size_t index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(iz) * ny + iy) * nx + ix;
    }
    double& at(int ix, int iy, int iz) { return data[index(ix, iy, iz)]; }
    double at(int ix, int iy, int iz) const { return data[index(ix, iy, iz)]; }

    double coord_x(int ix) const { return origin_mm[0] + ix * voxel_mm[0]; }
    double coord_y(int iy) const { return origin_mm[1] + iy * voxel_mm[1]; }
    double coord_z(int iz) const { return origin_mm[2] + iz * voxel_mm[2]; }
};

struct GridSpec {
    int nx = 0, ny = 0, nz = 0;
    double voxel_mm = 0.0;

    void validate() const {
        if (nx <= 0 || ny <= 0 || nz <= 0) throw config_error("grid: dimensions must be positive");
        if (!(voxel_mm > 0.0)) throw config_error("grid: voxel size must be positive");
    }

    // Convention of the scans reproduced here: a cube spanning the
    // magnified detector width with voxel = pixel pitch / magnification.
    static GridSpec default_for(const ConeBeamGeometry& geom, const DetectorSpec& det) {
        GridSpec g;
        const double m = magnification(geom);
        g.voxel_mm = det.pitch_mm() / m;
        g.nx = g.ny = g.nz = det.cols;
        return g;
    }
};

} // namespace xct
