#include "refracta/refine/refine.hpp"

#include "refracta/parallel.hpp"

#include <cmath>
#include <fstream>

namespace refracta {

double charbonnier_tv(const ImageBuffer& n, const MaskBuffer& valid, double eps) {
    const int w = n.width(), h = n.height();
    return deterministic_sum(n.size(), [&](std::size_t i) {
        if (!valid[i]) return 0.0;
        const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
        double s = 0.0;
        if (x + 1 < w && valid(x + 1, y)) s += std::sqrt((n[i] - n(x + 1, y)).squaredNorm() + eps * eps);
        if (y + 1 < h && valid(x, y + 1)) s += std::sqrt((n[i] - n(x, y + 1)).squaredNorm() + eps * eps);
        return s;
    }, 0.0);
}

namespace {

double anchor_term(const ImageBuffer& n, const ImageBuffer& n0, const MaskBuffer& valid) {
    return deterministic_sum(n.size(), [&](std::size_t i) { return valid[i] ? (n[i] - n0[i]).squaredNorm() : 0.0; }, 0.0);
}

Vec3 tv_grad(const ImageBuffer& n, const MaskBuffer& valid, double eps, std::size_t i) {
    const int w = n.width(), h = n.height();
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    Vec3 g = Vec3::Zero();
    const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
    for (const auto& q : nb) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h || !valid(q[0], q[1])) continue;
        const Vec3 d = n[i] - n(q[0], q[1]);
        g += d / std::sqrt(d.squaredNorm() + eps * eps);
    }
    return g;
}

}  // namespace

RefineEnergy refine_energy(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& normals,
                           const NormalMapPair& init, const MaskBuffer& active, const Camera& camera, double ior,
                           const RefineConfig& config) {
    RefineEnergy e;
    e.render = render_loss(image, env, normals, camera, ior, &active);
    e.anchor = config.lambda_anchor *
               (anchor_term(normals.n1, init.n1, normals.valid) + anchor_term(normals.n2, init.n2, normals.valid));
    e.smooth = config.lambda_smooth * (charbonnier_tv(normals.n1, normals.valid, config.charbonnier_eps) +
                                       charbonnier_tv(normals.n2, normals.valid, config.charbonnier_eps));
    return e;
}

RefineResult refine_normals(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& init,
                            const Camera& camera, double ior, const RefineConfig& config) {
    if (!(ior > 1.0)) throw ArgumentError("refine_normals: ior must exceed 1");
    if (config.phase1_iters < 0 || config.phase2_iters < 0 || !(config.step > 0.0) || config.lambda_anchor < 0.0 ||
        config.lambda_smooth < 0.0)
        throw ArgumentError("refine_normals: invalid configuration");
    if (!image.same_shape(init.valid)) throw ArgumentError("refine_normals: image and normals differ in size");

    MaskBuffer active(init.width(), init.height(), 0);
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = init.valid[i] && !init.tir[i];

    RefineResult res;
    NormalMapPair cur = init;
    RefineEnergy e_cur = refine_energy(image, env, cur, init, active, camera, ior, config);
    res.initial_render_loss = e_cur.render;
    res.normals = init;
    double best = e_cur.total();
    double best_render = e_cur.render;
    res.loss_trace.push_back(best);
    if (!std::isfinite(best)) throw NumericalError("refine_normals: initial energy is not finite");

    const int total = config.phase1_iters + config.phase2_iters;
    int rising = 0;
    for (int t = 0; t < total; ++t) {
        const bool phase1 = t < config.phase1_iters;
        RenderLossOptions opts;
        opts.active = &active;
        opts.grad_n1 = !phase1;
        const RenderLossGrad rg = render_loss_and_grad(image, env, cur, camera, ior, opts);
        ImageBuffer g1(cur.width(), cur.height(), Vec3::Zero()), g2 = g1;
        parallel_for(cur.valid.size(), [&](std::size_t i) {
            if (!cur.valid[i]) return;
            auto full = [&](const ImageBuffer& n, const ImageBuffer& n0, const Vec3& gr) {
                Vec3 g = gr + 2.0 * config.lambda_anchor * (n[i] - n0[i]) +
                         config.lambda_smooth * tv_grad(n, cur.valid, config.charbonnier_eps, i);
                return Vec3(g - g.dot(n[i]) * n[i]);
            };
            if (!phase1) g1[i] = full(cur.n1, init.n1, rg.grad_n1[i]);
            g2[i] = full(cur.n2, init.n2, rg.grad_n2[i]);
        });

        bool accepted = false;
        NormalMapPair cand = cur;
        RefineEnergy e_cand;
        double s = config.step;
        for (int b = 0; b <= config.max_backtracks; ++b, s *= 0.5) {
            parallel_for(cur.valid.size(), [&](std::size_t i) {
                if (!cur.valid[i]) return;
                if (!phase1) cand.n1[i] = (cur.n1[i] - s * g1[i]).normalized();
                cand.n2[i] = (cur.n2[i] - s * g2[i]).normalized();
            });
            e_cand = refine_energy(image, env, cand, init, active, camera, ior, config);
            if (!std::isfinite(e_cand.total())) {
                res.diverged = true;
                res.diagnostic = "non-finite energy at iteration " + std::to_string(t);
                break;
            }
            if (e_cand.total() < e_cur.total()) {
                accepted = true;
                break;
            }
        }
        if (res.diverged) break;
        ++res.iterations;
        if (accepted) {
            rising = e_cand.render > e_cur.render ? rising + 1 : 0;
            cur = std::move(cand);
            e_cur = e_cand;
            if (e_cur.total() < best && e_cur.render <= res.initial_render_loss) {
                best = e_cur.total();
                best_render = e_cur.render;
                res.normals = cur;
            }
        }
        res.loss_trace.push_back(best);
        if (rising >= config.divergence_window) {
            res.diverged = true;
            res.diagnostic = "render loss rose over " + std::to_string(rising) + " consecutive accepted steps";
            break;
        }
        if (!accepted) {
            // stalled: skip the rest of the current phase
            if (phase1) t = config.phase1_iters - 1;
            else break;
        }
    }

    for (std::size_t i = 0; i < active.size(); ++i) {
        if (!res.normals.valid[i]) continue;
        const Vec3 li = pixel_center_ray(camera, static_cast<int>(i % camera.width), static_cast<int>(i / camera.width)).dir;
        auto lm = refract(li, res.normals.n1[i], 1.0 / ior);
        res.normals.tir[i] = lm && refract(*lm, res.normals.n2[i], ior) ? 0 : 1;
    }
    res.final_render_loss = best_render;
    return res;
}

void write_loss_trace_csv(const fs::path& path, const std::vector<double>& trace) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << "iteration,loss\n";
    f.precision(17);
    for (std::size_t i = 0; i < trace.size(); ++i) f << i << ',' << trace[i] << '\n';
    if (!f) throw DataError("write failed for " + path.string());
}

}  // namespace refracta
