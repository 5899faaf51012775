#include "refracta/geom/envmap.hpp"

namespace refracta {

EnvironmentMap::EnvironmentMap(ImageBuffer texels) : texels_(std::move(texels)) {
    if (texels_.height() <= 0 || texels_.width() != 2 * texels_.height())
        throw ArgumentError("environment map must be 2H x H");
    for (const Vec3& c : texels_.data())
        if (!c.allFinite() || (c.array() < 0.0).any())
            throw ArgumentError("environment map radiance must be finite and non-negative");
}

EnvironmentMap EnvironmentMap::constant(const Vec3& value, int height) {
    return EnvironmentMap(ImageBuffer(2 * height, height, value));
}

Vec3 EnvironmentMap::texel_direction(double x, double y) const {
    const double u = (x + 0.5) / width();
    const double v = (y + 0.5) / height();
    const double phi = (u - 0.5) * 2.0 * kPi;
    const double theta = v * kPi;
    // atan2(dx, -dz) = phi, dy = cos(theta)
    return Vec3(std::sin(theta) * std::sin(phi), std::cos(theta), -std::sin(theta) * std::cos(phi));
}

}  // namespace refracta
