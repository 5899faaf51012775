#pragma once

#include "refracta/common.hpp"

#include <optional>

namespace refracta {

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 dir = Vec3::UnitZ();  // unit length
};

/// Pinhole camera. Camera frame is +X right, +Y down, +Z forward; `rotation`
/// and `center` map camera coordinates to world (cam2world).
struct Camera {
    int width = 0;
    int height = 0;
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 center = Vec3::Zero();

    Vec3 forward() const { return rotation.col(2); }
    /// Bottom-to-top direction of the image plane in world coordinates.
    Vec3 up() const { return -rotation.col(1); }

    /// Throws ArgumentError when intrinsics or the rotation are invalid.
    void validate() const;

    friend bool operator==(const Camera& a, const Camera& b) {
        return a.width == b.width && a.height == b.height && a.fx == b.fx && a.fy == b.fy && a.cx == b.cx &&
               a.cy == b.cy && a.rotation == b.rotation && a.center == b.center;
    }
};

struct Projection {
    Vec2 pixel;
    double depth = 0.0;
};

/// Ray through continuous pixel coordinate (u, v); pixel centers are at +0.5.
Ray camera_ray(const Camera& cam, const Vec2& pixel);

inline Ray pixel_center_ray(const Camera& cam, int x, int y) { return camera_ray(cam, Vec2(x + 0.5, y + 0.5)); }

/// Pinhole projection; empty when behind the camera or outside the image.
std::optional<Projection> project(const Camera& cam, const Vec3& world);

/// Camera looking from `eye` at `target`; `world_up` fixes the roll.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up, int width, int height,
               double fov_y_deg);

/// Cosine between the ray through `p` and the optical axis, clamped to [0, 1].
double view_cosine(const Camera& cam, const Vec3& p);

}  // namespace refracta
