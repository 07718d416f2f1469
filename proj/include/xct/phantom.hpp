#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "xct/errors.hpp"

namespace xct {

enum class PhantomKind { uniform_sphere, nested_spheres, cube, point_impulse };

inline PhantomKind phantom_kind_from_string(const std::string& s) {
    if (s == "uniform_sphere") return PhantomKind::uniform_sphere;
    if (s == "nested_spheres") return PhantomKind::nested_spheres;
    if (s == "cube") return PhantomKind::cube;
    if (s == "point_impulse") return PhantomKind::point_impulse;
    throw config_error("unknown phantom kind '" + s + "'");
}

inline std::string to_string(PhantomKind k) {
    switch (k) {
        case PhantomKind::uniform_sphere: return "uniform_sphere";
        case PhantomKind::nested_spheres: return "nested_spheres";
        case PhantomKind::cube: return "cube";
        case PhantomKind::point_impulse: return "point_impulse";
    }
    return "?";
}

// Analytic test object with a matching rasterized grid. The attenuation
// grid is axis-aligned and centered on the rotation axis; the analytic
// form is what the projector samples, so projections of symmetric
// phantoms are symmetric to rounding, free of voxelization error.
struct Phantom {
    PhantomKind kind = PhantomKind::uniform_sphere;
    int grid_size = 0;
    double mu = 0.0;              // mm^-1
    double radius_fraction = 0.0; // of the grid extent
    double grid_spacing_mm = 0.0;
    std::vector<double> attenuation_map; // z-major: [iz][iy][ix]

    double extent_mm() const { return grid_size * grid_spacing_mm; }
    bool is_empty() const { return mu == 0.0; }

    double outer_radius_mm() const { return radius_fraction * extent_mm(); }
    double inner_radius_mm() const { return 0.5 * outer_radius_mm(); }
    double cube_half_edge_mm() const { return radius_fraction * extent_mm(); }

    // center of the single lit voxel of a point impulse
    double impulse_coord_mm(int axis) const {
        (void)axis;
        return (grid_size / 2 - (grid_size - 1) * 0.5) * grid_spacing_mm;
    }

    double support_radius_mm() const {
        switch (kind) {
            case PhantomKind::uniform_sphere:
            case PhantomKind::nested_spheres: return outer_radius_mm();
            case PhantomKind::cube: return cube_half_edge_mm() * std::sqrt(3.0);
            case PhantomKind::point_impulse:
                return std::abs(impulse_coord_mm(0)) * std::sqrt(3.0) + grid_spacing_mm;
        }
        return 0.0;
    }

    // attenuation at a point given in mm from the grid center
    double mu_at(double x, double y, double z) const {
        switch (kind) {
            case PhantomKind::uniform_sphere: {
                const double r2 = x * x + y * y + z * z;
                const double R = outer_radius_mm();
                return r2 <= R * R ? mu : 0.0;
            }
            case PhantomKind::nested_spheres: {
                const double r2 = x * x + y * y + z * z;
                const double ri = inner_radius_mm();
                if (r2 <= ri * ri) return 2.0 * mu;
                const double ro = outer_radius_mm();
                return r2 <= ro * ro ? mu : 0.0;
            }
            case PhantomKind::cube: {
                const double h = cube_half_edge_mm();
                return (std::abs(x) <= h && std::abs(y) <= h && std::abs(z) <= h) ? mu : 0.0;
            }
            case PhantomKind::point_impulse: {
                const double h = 0.5 * grid_spacing_mm;
                const double cx = impulse_coord_mm(0);
                return (std::abs(x - cx) <= h && std::abs(y - cx) <= h && std::abs(z - cx) <= h) ? mu
                                                                                                : 0.0;
            }
        }
        return 0.0;
    }

    double grid_value(int ix, int iy, int iz) const {
        return attenuation_map[(static_cast<std::size_t>(iz) * grid_size + iy) * grid_size + ix];
    }

    // trilinear sample of the rasterized grid, zero outside
    double mu_trilinear(double x, double y, double z) const {
        const int n = grid_size;
        const double half = (n - 1) * 0.5;
        const double fx = x / grid_spacing_mm + half;
        const double fy = y / grid_spacing_mm + half;
        const double fz = z / grid_spacing_mm + half;
        const int x0 = static_cast<int>(std::floor(fx));
        const int y0 = static_cast<int>(std::floor(fy));
        const int z0 = static_cast<int>(std::floor(fz));
        if (x0 < 0 || y0 < 0 || z0 < 0 || x0 + 1 >= n || y0 + 1 >= n || z0 + 1 >= n) return 0.0;
        const double ax = fx - x0, ay = fy - y0, az = fz - z0;
        double v = 0.0;
        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const double w = (dx ? ax : 1 - ax) * (dy ? ay : 1 - ay) * (dz ? az : 1 - az);
                    v += w * grid_value(x0 + dx, y0 + dy, z0 + dz);
                }
        return v;
    }
};

// Builds the phantom and rasterizes its attenuation grid. extent_mm is the
// physical side length covered by the grid.
inline Phantom make_phantom(PhantomKind kind, int grid_size, double mu, double radius_fraction,
                            double extent_mm) {
    if (grid_size < 8) throw config_error("phantom: grid_size must be >= 8");
    if (!(mu >= 0.0)) throw config_error("phantom: mu must be >= 0");
    if (!(extent_mm > 0.0)) throw config_error("phantom: extent_mm must be positive");
    if (kind != PhantomKind::point_impulse &&
        !(radius_fraction > 0.0 && radius_fraction <= 0.5))
        throw config_error("phantom: radius_fraction must be in (0, 0.5]");

    Phantom p;
    p.kind = kind;
    p.grid_size = grid_size;
    p.mu = mu;
    p.radius_fraction = radius_fraction;
    p.grid_spacing_mm = extent_mm / grid_size;
    p.attenuation_map.assign(static_cast<std::size_t>(grid_size) * grid_size * grid_size, 0.0);

    const double half = (grid_size - 1) * 0.5;
    std::size_t idx = 0;
    for (int iz = 0; iz < grid_size; ++iz)
        for (int iy = 0; iy < grid_size; ++iy)
            for (int ix = 0; ix < grid_size; ++ix, ++idx) {
                const double x = (ix - half) * p.grid_spacing_mm;
                const double y = (iy - half) * p.grid_spacing_mm;
                const double z = (iz - half) * p.grid_spacing_mm;
                p.attenuation_map[idx] = p.mu_at(x, y, z);
            }
    return p;
}

inline Phantom make_phantom(const std::string& kind, int grid_size, double mu,
                            double radius_fraction, double extent_mm) {
    return make_phantom(phantom_kind_from_string(kind), grid_size, mu, radius_fraction, extent_mm);
}

} // namespace xct
