#pragma once

#include "refracta/dual.hpp"
#include "refracta/geom/image.hpp"

#include <algorithm>
#include <cmath>

namespace refracta {

/// Equirectangular radiance map. A direction d maps to
///   u = atan2(d.x, -d.z) / 2pi + 0.5,  v = acos(d.y) / pi
/// so +Y is the top row. Lookups wrap horizontally and clamp vertically.
class EnvironmentMap {
public:
    EnvironmentMap() = default;
    /// Throws ArgumentError unless width == 2 * height and all texels are finite and >= 0.
    explicit EnvironmentMap(ImageBuffer texels);

    static EnvironmentMap constant(const Vec3& value, int height = 8);

    int width() const { return texels_.width(); }
    int height() const { return texels_.height(); }
    const ImageBuffer& texels() const { return texels_; }
    bool empty() const { return texels_.empty(); }

    Vec3 sample(const Vec3& dir) const {
        V3<double> c = sample_t(V3<double>(dir.x(), dir.y(), dir.z()));
        return Vec3(c.x, c.y, c.z);
    }

    /// Bilinear lookup differentiable in the direction when T is a Dual.
    template <class T>
    V3<T> sample_t(const V3<T>& dir) const {
        using std::acos;
        using std::atan2;
        using std::floor;
        T dy = dir.y;
        if (dy > T(1.0)) dy = T(1.0);
        if (dy < T(-1.0)) dy = T(-1.0);
        const T u = atan2(dir.x, -dir.z) * (0.5 / kPi) + 0.5;
        const T v = acos(dy) * (1.0 / kPi);
        const int w = texels_.width(), h = texels_.height();
        const T x = u * double(w) - 0.5;
        T y = v * double(h) - 0.5;
        const double x0 = std::floor(value_of(x));
        const double y0 = std::floor(value_of(y));
        const T fx = x - x0;
        const T fy = y - y0;
        const int ix0 = wrap(static_cast<int>(x0), w), ix1 = wrap(static_cast<int>(x0) + 1, w);
        const int iy0 = std::clamp(static_cast<int>(y0), 0, h - 1);
        const int iy1 = std::clamp(static_cast<int>(y0) + 1, 0, h - 1);
        const Vec3& a = texels_(ix0, iy0);
        const Vec3& b = texels_(ix1, iy0);
        const Vec3& c = texels_(ix0, iy1);
        const Vec3& d = texels_(ix1, iy1);
        const T w00 = (1.0 - fx) * (1.0 - fy), w10 = fx * (1.0 - fy), w01 = (1.0 - fx) * fy, w11 = fx * fy;
        return V3<T>(w00 * a.x() + w10 * b.x() + w01 * c.x() + w11 * d.x(),
                     w00 * a.y() + w10 * b.y() + w01 * c.y() + w11 * d.y(),
                     w00 * a.z() + w10 * b.z() + w01 * c.z() + w11 * d.z());
    }

    /// Unit direction at the center of texel (x, y); inverse of the mapping above.
    Vec3 texel_direction(double x, double y) const;

private:
    static int wrap(int i, int w) {
        i %= w;
        return i < 0 ? i + w : i;
    }

    ImageBuffer texels_;
};

}  // namespace refracta
