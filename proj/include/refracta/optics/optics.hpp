#pragma once

#include "refracta/dual.hpp"
#include "refracta/geom/camera.hpp"
#include "refracta/geom/envmap.hpp"
#include "refracta/geom/image.hpp"

#include <optional>

namespace refracta {

/// First/second-surface normals for one view, world frame, outward-facing.
/// `tir` marks pixels whose exit refraction does not exist.
struct NormalMapPair {
    ImageBuffer n1;
    ImageBuffer n2;
    MaskBuffer valid;
    MaskBuffer tir;

    NormalMapPair() = default;
    NormalMapPair(int w, int h)
        : n1(w, h, Vec3::UnitZ()), n2(w, h, Vec3::UnitZ()), valid(w, h, 0), tir(w, h, 0) {}
    int width() const { return valid.width(); }
    int height() const { return valid.height(); }
};

struct RenderOutput {
    ImageBuffer reflected;    // I^r
    ImageBuffer transmitted;  // I^t, zero on TIR pixels
    MaskBuffer tir;           // M^tr

    ImageBuffer sum() const;
};

// ------------------------------------------------------------ scalar kernels
//
// `eta` is the ratio n_incident / n_transmitted (1/ior entering glass, ior leaving).
// Cosines are unsigned so either orientation of N is accepted.

template <class T>
V3<T> reflect_t(const V3<T>& l, const V3<T>& n) {
    return l - (2.0 * dot(l, n)) * n;
}

/// Returns false on total internal reflection.
template <class T>
bool refract_t(const V3<T>& l, const V3<T>& n, double eta, V3<T>& out) {
    using std::sqrt;
    const T ln = dot(l, n);
    const V3<T> nn = ln < T(0.0) ? n : -n;
    const T c = ln < T(0.0) ? -ln : ln;
    const T k = 1.0 - eta * eta * (1.0 - c * c);
    if (k < T(0.0)) return false;
    out = eta * l + (eta * c - sqrt(k)) * nn;
    return true;
}

/// Unpolarized two-term Fresnel reflectance from unsigned cosines. The value is
/// the same for eta and 1/eta (the two terms swap).
template <class T>
T fresnel_t(const T& ci, const T& ct, double eta) {
    const T a = (ci - eta * ct) / (ci + eta * ct);
    const T b = (eta * ci - ct) / (eta * ci + ct);
    T f = 0.5 * (a * a + b * b);
    if (f > T(1.0)) f = T(1.0);
    if (f < T(0.0)) f = T(0.0);
    return f;
}

template <class T>
struct TwoBounce {
    V3<T> reflected;
    V3<T> transmitted;
    bool tir = false;
};

/// Two-bounce shading of one pixel: I^r = F1 E(l_r), I^t = (1-F1)(1-F2) E(l_t).
template <class T>
TwoBounce<T> shade_two_bounce(const EnvironmentMap& env, const Vec3& incident, const V3<T>& n1, const V3<T>& n2,
                              double ior) {
    using std::abs;
    const V3<T> li(T(incident.x()), T(incident.y()), T(incident.z()));
    TwoBounce<T> out;
    const double eta_in = 1.0 / ior;
    V3<T> lm;
    if (!refract_t(li, n1, eta_in, lm)) throw NumericalError("entering refraction reported total internal reflection");
    const T f1 = fresnel_t(abs(dot(li, n1)), abs(dot(lm, n1)), eta_in);
    out.reflected = f1 * env.sample_t(reflect_t(li, n1));
    V3<T> lt;
    if (!refract_t(lm, n2, ior, lt)) {
        out.tir = true;
        out.transmitted = V3<T>(T(0.0), T(0.0), T(0.0));
        return out;
    }
    const T f2 = fresnel_t(abs(dot(lm, n2)), abs(dot(lt, n2)), ior);
    out.transmitted = ((1.0 - f1) * (1.0 - f2)) * env.sample_t(lt);
    return out;
}

// ------------------------------------------------------------ public API

/// Throws ArgumentError when eta <= 0. Empty on total internal reflection.
std::optional<Vec3> refract(const Vec3& l, const Vec3& n, double eta);
Vec3 reflect(const Vec3& l, const Vec3& n);
/// Fresnel reflectance for incident l_i, transmitted l_t about n; in [0, 1].
double fresnel(const Vec3& l_i, const Vec3& l_t, const Vec3& n, double eta);

/// Per-pixel two-bounce rendering of a normal-map pair; invalid pixels are 0.
RenderOutput render_layer(const EnvironmentMap& env, const NormalMapPair& normals, const Camera& camera, double ior);

/// |I - (I^r + I^t)| * M, channel-wise.
ImageBuffer error_map(const ImageBuffer& image, const RenderOutput& out, const MaskBuffer& mask);

struct RenderLossGrad {
    double loss = 0.0;
    ImageBuffer grad_n1;  // tangent-plane gradient per pixel (zero where inactive)
    ImageBuffer grad_n2;
    std::size_t active_pixels = 0;
};

struct RenderLossOptions {
    /// Pixels contributing to the loss. When null: valid and non-TIR under the
    /// current normals. When set, TIR pixels inside it contribute with I^t = 0.
    const MaskBuffer* active = nullptr;
    bool grad_n1 = true;
    bool grad_n2 = true;
};

/// Sum of squared RGB residuals and its analytic gradient w.r.t. both normal maps.
RenderLossGrad render_loss_and_grad(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& normals,
                                    const Camera& camera, double ior, const RenderLossOptions& opts = {});

/// Loss only (same pixel set rules as render_loss_and_grad).
double render_loss(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& normals,
                   const Camera& camera, double ior, const MaskBuffer* active = nullptr);

struct AngleStats {
    double mean_deg = 0.0;
    double median_deg = 0.0;
    std::size_t count = 0;
};

struct NormalLoss {
    double loss = 0.0;  // sum over valid pixels of |N1 - N1gt|^2 + |N2 - N2gt|^2
    AngleStats n1;
    AngleStats n2;
};

/// Throws ArgumentError when the shapes or valid masks differ.
NormalLoss normal_angle_loss(const NormalMapPair& pred, const NormalMapPair& gt);

/// Mean and median of angles (degrees) between two normal images over `mask`.
AngleStats angle_stats(const ImageBuffer& a, const ImageBuffer& b, const MaskBuffer& mask);

}  // namespace refracta
