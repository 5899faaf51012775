#include "refracta/geom/camera.hpp"

#include <algorithm>
#include <cmath>

namespace refracta {

void Camera::validate() const {
    if (width <= 0 || height <= 0) throw ArgumentError("camera: non-positive image size");
    if (!(fx > 0.0) || !(fy > 0.0)) throw ArgumentError("camera: focal lengths must be positive");
    if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
        throw ArgumentError("camera: principal point outside the image");
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).norm();
    if (ortho > 1e-6 || std::abs(rotation.determinant() - 1.0) > 1e-6)
        throw ArgumentError("camera: rotation is not a proper orthonormal matrix");
}

Ray camera_ray(const Camera& cam, const Vec2& pixel) {
    const Vec3 d((pixel.x() - cam.cx) / cam.fx, (pixel.y() - cam.cy) / cam.fy, 1.0);
    return Ray{cam.center, (cam.rotation * d).normalized()};
}

std::optional<Projection> project(const Camera& cam, const Vec3& world) {
    const Vec3 pc = cam.rotation.transpose() * (world - cam.center);
    if (pc.z() <= 0.0) return std::nullopt;
    const double u = cam.fx * pc.x() / pc.z() + cam.cx;
    const double v = cam.fy * pc.y() / pc.z() + cam.cy;
    if (!(u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height)) return std::nullopt;
    return Projection{Vec2(u, v), pc.z()};
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up, int width, int height,
               double fov_y_deg) {
    const Vec3 z = (target - eye).normalized();
    Vec3 up = world_up.normalized();
    if (std::abs(up.dot(z)) > 1.0 - 1e-9) up = std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 y = (-up + up.dot(z) * z).normalized();
    const Vec3 x = y.cross(z);
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fy = 0.5 * height / std::tan(0.5 * deg2rad(fov_y_deg));
    cam.fx = cam.fy;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.rotation.col(0) = x;
    cam.rotation.col(1) = y;
    cam.rotation.col(2) = z;
    cam.center = eye;
    return cam;
}

double view_cosine(const Camera& cam, const Vec3& p) {
    const Vec3 d = p - cam.center;
    const double n = d.norm();
    if (n <= 0.0) return 0.0;
    return std::clamp(d.dot(cam.forward()) / n, 0.0, 1.0);
}

}  // namespace refracta
