#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace xct {

// Dense 2D image, row-major, double precision. Raw detector counts,
// transmission values and filtered projections all use this container;
// file formats narrow to float32 on write when configured to.
struct Image {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Image() = default;
    Image(int rows_, int cols_, double fill = 0.0)
        : rows(rows_), cols(cols_), data(static_cast<std::size_t>(rows_) * cols_, fill) {
        if (rows_ <= 0 || cols_ <= 0) throw std::invalid_argument("Image: dimensions must be positive");
    }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const { return rows == o.rows && cols == o.cols; }
    bool in_bounds(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline Image operator-(const Image& a, const Image& b) {
    assert(a.same_shape(b));
    Image out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

inline Image operator*(const Image& a, double s) {
    Image out = a;
    for (double& v : out.data) v *= s;
    return out;
}

// --- pixel statistics -------------------------------------------------

inline double image_mean(const Image& img) {
    double s = 0.0;
    for (double v : img.data) s += v;
    return s / static_cast<double>(img.size());
}

// Unbiased (n-1) sample variance over all pixels.
inline double image_variance(const Image& img) {
    const std::size_t n = img.size();
    if (n < 2) return 0.0;
    const double m = image_mean(img);
    double s = 0.0;
    for (double v : img.data) s += (v - m) * (v - m);
    return s / static_cast<double>(n - 1);
}

inline double image_std(const Image& img) { return std::sqrt(image_variance(img)); }

inline double image_max_abs(const Image& img) {
    double m = 0.0;
    for (double v : img.data) m = std::max(m, std::abs(v));
    return m;
}

inline double vector_median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty range");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (v[mid - 1] + hi);
}

inline double image_median(const Image& img) { return vector_median(img.data); }

// Median absolute deviation about the median (unscaled).
inline double image_mad(const Image& img, double median) {
    std::vector<double> dev(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) dev[i] = std::abs(img[i] - median);
    return vector_median(std::move(dev));
}

// Bilinear sample with out-of-bounds fill. Coordinates are fractional
// (row, col) pixel indices.
inline double bilinear_sample(const Image& img, double r, double c, double fill) {
    const int r0 = static_cast<int>(std::floor(r));
    const int c0 = static_cast<int>(std::floor(c));
    if (r0 < 0 || c0 < 0 || r0 + 1 >= img.rows || c0 + 1 >= img.cols) {
        // partial overlap still counts as outside; callers wanting exact
        // edge handling should pad first
        if (r0 == img.rows - 1 && r == static_cast<double>(r0) && c0 >= 0 && c0 + 1 < img.cols) {
            const double fc = c - c0;
            return img.at(r0, c0) * (1 - fc) + img.at(r0, c0 + 1) * fc;
        }
        if (c0 == img.cols - 1 && c == static_cast<double>(c0) && r0 >= 0 && r0 + 1 < img.rows) {
            const double fr = r - r0;
            return img.at(r0, c0) * (1 - fr) + img.at(r0 + 1, c0) * fr;
        }
        if (r0 == img.rows - 1 && c0 == img.cols - 1 && r == static_cast<double>(r0) &&
            c == static_cast<double>(c0))
            return img.at(r0, c0);
        return fill;
    }
    const double fr = r - r0;
    const double fc = c - c0;
    return img.at(r0, c0) * (1 - fr) * (1 - fc) + img.at(r0, c0 + 1) * (1 - fr) * fc +
           img.at(r0 + 1, c0) * fr * (1 - fc) + img.at(r0 + 1, c0 + 1) * fr * fc;
}

} // namespace xct
