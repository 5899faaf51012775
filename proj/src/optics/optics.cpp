#include "refracta/optics/optics.hpp"

#include "refracta/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace refracta {

namespace {

V3<double> to_v3(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 to_vec(const V3<double>& v) { return {v.x, v.y, v.z}; }

}  // namespace

ImageBuffer RenderOutput::sum() const {
    ImageBuffer s(reflected.width(), reflected.height());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = reflected[i] + transmitted[i];
    return s;
}

std::optional<Vec3> refract(const Vec3& l, const Vec3& n, double eta) {
    if (!(eta > 0.0)) throw ArgumentError("refract: eta must be positive");
    V3<double> out;
    if (!refract_t(to_v3(l), to_v3(n), eta, out)) return std::nullopt;
    return to_vec(out);
}

Vec3 reflect(const Vec3& l, const Vec3& n) { return to_vec(reflect_t(to_v3(l), to_v3(n))); }

double fresnel(const Vec3& l_i, const Vec3& l_t, const Vec3& n, double eta) {
    return fresnel_t(std::abs(l_i.dot(n)), std::abs(l_t.dot(n)), eta);
}

RenderOutput render_layer(const EnvironmentMap& env, const NormalMapPair& normals, const Camera& camera, double ior) {
    if (!(ior > 1.0)) throw ArgumentError("render_layer: ior must exceed 1");
    const int w = normals.width(), h = normals.height();
    if (camera.width != w || camera.height != h) throw ArgumentError("render_layer: camera and normal maps differ in size");
    RenderOutput out{ImageBuffer(w, h, Vec3::Zero()), ImageBuffer(w, h, Vec3::Zero()), MaskBuffer(w, h, 0)};
    parallel_for(normals.valid.size(), [&](std::size_t i) {
        if (!normals.valid[i]) return;
        const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
        const Vec3 li = pixel_center_ray(camera, x, y).dir;
        const TwoBounce<double> s = shade_two_bounce(env, li, to_v3(normals.n1[i]), to_v3(normals.n2[i]), ior);
        out.reflected[i] = to_vec(s.reflected);
        out.transmitted[i] = to_vec(s.transmitted);
        out.tir[i] = s.tir ? 1 : 0;
    });
    return out;
}

ImageBuffer error_map(const ImageBuffer& image, const RenderOutput& out, const MaskBuffer& mask) {
    if (!image.same_shape(out.reflected) || !image.same_shape(mask))
        throw ArgumentError("error_map: image, render and mask sizes differ");
    ImageBuffer err(image.width(), image.height(), Vec3::Zero());
    for (std::size_t i = 0; i < err.size(); ++i)
        if (mask[i]) err[i] = (image[i] - out.reflected[i] - out.transmitted[i]).cwiseAbs();
    return err;
}

namespace {

Vec3 tangent(const Vec3& g, const Vec3& n) { return g - g.dot(n) * n; }

template <int N>
V3<Dual<N>> seed(const Vec3& v, int first_slot) {
    return {Dual<N>::variable(v.x(), first_slot), Dual<N>::variable(v.y(), first_slot + 1),
            Dual<N>::variable(v.z(), first_slot + 2)};
}

template <int N>
V3<Dual<N>> constant(const Vec3& v) {
    return {Dual<N>(v.x()), Dual<N>(v.y()), Dual<N>(v.z())};
}

bool pixel_active(const NormalMapPair& normals, const MaskBuffer* active, std::size_t i, bool tir) {
    if (!normals.valid[i]) return false;
    if (active) return (*active)[i] != 0;
    return !tir;
}

// N = number of dual slots: 6 for both maps, 3 when only one map is free.
template <int N>
RenderLossGrad loss_and_grad_impl(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& normals,
                                  const Camera& camera, double ior, const RenderLossOptions& opts) {
    const int w = normals.width(), h = normals.height();
    RenderLossGrad res{0.0, ImageBuffer(w, h, Vec3::Zero()), ImageBuffer(w, h, Vec3::Zero()), 0};
    std::vector<double> pixel_loss(normals.valid.size(), 0.0);
    std::vector<std::uint8_t> used(normals.valid.size(), 0);
    parallel_for(normals.valid.size(), [&](std::size_t i) {
        if (!normals.valid[i]) return;
        if (opts.active && !(*opts.active)[i]) return;
        const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
        const Vec3 li = pixel_center_ray(camera, x, y).dir;
        using D = Dual<N>;
        V3<D> n1, n2;
        if constexpr (N == 6) {
            n1 = seed<N>(normals.n1[i], 0);
            n2 = seed<N>(normals.n2[i], 3);
        } else {
            n1 = opts.grad_n1 ? seed<N>(normals.n1[i], 0) : constant<N>(normals.n1[i]);
            n2 = opts.grad_n2 ? seed<N>(normals.n2[i], 0) : constant<N>(normals.n2[i]);
        }
        const TwoBounce<D> s = shade_two_bounce(env, li, n1, n2, ior);
        if (!pixel_active(normals, opts.active, i, s.tir)) return;
        const V3<D> pred = s.reflected + s.transmitted;
        const D rx = image[i].x() - pred.x, ry = image[i].y() - pred.y, rz = image[i].z() - pred.z;
        const D l = rx * rx + ry * ry + rz * rz;
        pixel_loss[i] = l.v;
        used[i] = 1;
        if constexpr (N == 6) {
            res.grad_n1[i] = tangent(Vec3(l.d[0], l.d[1], l.d[2]), normals.n1[i]);
            res.grad_n2[i] = tangent(Vec3(l.d[3], l.d[4], l.d[5]), normals.n2[i]);
        } else {
            const Vec3 g(l.d[0], l.d[1], l.d[2]);
            if (opts.grad_n1) res.grad_n1[i] = tangent(g, normals.n1[i]);
            if (opts.grad_n2) res.grad_n2[i] = tangent(g, normals.n2[i]);
        }
    });
    res.loss = deterministic_sum(pixel_loss.size(), [&](std::size_t i) { return pixel_loss[i]; }, 0.0);
    res.active_pixels = static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
    return res;
}

}  // namespace

RenderLossGrad render_loss_and_grad(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& normals,
                                    const Camera& camera, double ior, const RenderLossOptions& opts) {
    if (!(ior > 1.0)) throw ArgumentError("render_loss_and_grad: ior must exceed 1");
    if (!image.same_shape(normals.valid) || camera.width != image.width() || camera.height != image.height())
        throw ArgumentError("render_loss_and_grad: image, normals and camera differ in size");
    if (opts.active && !opts.active->same_shape(normals.valid))
        throw ArgumentError("render_loss_and_grad: active mask size differs");
    if (opts.grad_n1 && opts.grad_n2) return loss_and_grad_impl<6>(image, env, normals, camera, ior, opts);
    return loss_and_grad_impl<3>(image, env, normals, camera, ior, opts);
}

double render_loss(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& normals,
                   const Camera& camera, double ior, const MaskBuffer* active) {
    if (!image.same_shape(normals.valid) || camera.width != image.width() || camera.height != image.height())
        throw ArgumentError("render_loss: image, normals and camera differ in size");
    const int w = normals.width();
    std::vector<double> pixel_loss(normals.valid.size(), 0.0);
    parallel_for(normals.valid.size(), [&](std::size_t i) {
        if (!normals.valid[i]) return;
        if (active && !(*active)[i]) return;
        const Vec3 li = pixel_center_ray(camera, static_cast<int>(i % w), static_cast<int>(i / w)).dir;
        const TwoBounce<double> s = shade_two_bounce(env, li, to_v3(normals.n1[i]), to_v3(normals.n2[i]), ior);
        if (!pixel_active(normals, active, i, s.tir)) return;
        pixel_loss[i] = (image[i] - to_vec(s.reflected) - to_vec(s.transmitted)).squaredNorm();
    });
    return deterministic_sum(pixel_loss.size(), [&](std::size_t i) { return pixel_loss[i]; }, 0.0);
}

AngleStats angle_stats(const ImageBuffer& a, const ImageBuffer& b, const MaskBuffer& mask) {
    std::vector<double> angles;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) angles.push_back(angle_deg(a[i].normalized(), b[i].normalized()));
    AngleStats s;
    s.count = angles.size();
    if (angles.empty()) return s;
    double sum = 0.0;
    for (double v : angles) sum += v;
    s.mean_deg = sum / static_cast<double>(angles.size());
    std::sort(angles.begin(), angles.end());
    const std::size_t n = angles.size();
    s.median_deg = n % 2 ? angles[n / 2] : 0.5 * (angles[n / 2 - 1] + angles[n / 2]);
    return s;
}

NormalLoss normal_angle_loss(const NormalMapPair& pred, const NormalMapPair& gt) {
    if (!pred.valid.same_shape(gt.valid) || !pred.n1.same_shape(gt.n1) || !pred.n2.same_shape(gt.n2))
        throw ArgumentError("normal_angle_loss: map sizes differ");
    if (!(pred.valid == gt.valid)) throw ArgumentError("normal_angle_loss: valid masks differ");
    NormalLoss out;
    for (std::size_t i = 0; i < gt.valid.size(); ++i)
        if (gt.valid[i]) out.loss += (pred.n1[i] - gt.n1[i]).squaredNorm() + (pred.n2[i] - gt.n2[i]).squaredNorm();
    out.n1 = angle_stats(pred.n1, gt.n1, gt.valid);
    out.n2 = angle_stats(pred.n2, gt.n2, gt.valid);
    return out;
}

}  // namespace refracta
