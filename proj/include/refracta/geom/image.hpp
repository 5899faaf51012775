#pragma once

#include "refracta/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace refracta {

/// Row-major H x W grid. Pixel (x, y) has its center at (x + 0.5, y + 0.5).
template <class T>
class Image {
public:
    Image() = default;
    Image(int width, int height, const T& fill = T{})
        : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
        if (width < 0 || height < 0) throw ArgumentError("negative image size");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool same_shape(int w, int h) const { return w == width_ && h == height_; }
    template <class U>
    bool same_shape(const Image<U>& o) const {
        return o.width() == width_ && o.height() == height_;
    }

    T& operator()(int x, int y) { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const { return data_[index(x, y)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    friend bool operator==(const Image& a, const Image& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using ImageBuffer = Image<Vec3>;         // linear RGB radiance
using MaskBuffer = Image<std::uint8_t>;  // 0 / 1
using ScalarImage = Image<double>;

inline double luminance(const Vec3& c) { return (c.x() + c.y() + c.z()) / 3.0; }

/// Bilinear lookup at continuous pixel coordinates (pixel centers at +0.5),
/// clamped to the image border. Returns false when (u, v) lies outside the image.
template <class T>
bool sample_bilinear(const Image<T>& img, double u, double v, T& out) {
    if (img.empty() || u < 0.0 || v < 0.0 || u > img.width() || v > img.height()) return false;
    const double x = u - 0.5, y = v - 0.5;
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    auto cx = [&](int i) { return std::clamp(i, 0, img.width() - 1); };
    auto cy = [&](int j) { return std::clamp(j, 0, img.height() - 1); };
    out = (1 - fy) * ((1 - fx) * img(cx(x0), cy(y0)) + fx * img(cx(x0 + 1), cy(y0))) +
          fy * ((1 - fx) * img(cx(x0), cy(y0 + 1)) + fx * img(cx(x0 + 1), cy(y0 + 1)));
    return true;
}

/// Bilinear lookup restricted to pixels where `valid` is set; weights are
/// renormalized over the valid taps. Returns false when no tap is valid.
template <class T>
bool sample_bilinear_masked(const Image<T>& img, const MaskBuffer& valid, double u, double v, T& out) {
    if (img.empty() || u < 0.0 || v < 0.0 || u > img.width() || v > img.height()) return false;
    const double x = u - 0.5, y = v - 0.5;
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    const int xs[2] = {std::clamp(x0, 0, img.width() - 1), std::clamp(x0 + 1, 0, img.width() - 1)};
    const int ys[2] = {std::clamp(y0, 0, img.height() - 1), std::clamp(y0 + 1, 0, img.height() - 1)};
    const double wx[2] = {1 - fx, fx}, wy[2] = {1 - fy, fy};
    double wsum = 0.0;
    T acc = img(xs[0], ys[0]) * 0.0;
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            if (!valid(xs[i], ys[j])) continue;
            const double w = wx[i] * wy[j];
            acc = acc + w * img(xs[i], ys[j]);
            wsum += w;
        }
    if (wsum <= 1e-12) return false;
    out = acc * (1.0 / wsum);
    return true;
}

}  // namespace refracta
