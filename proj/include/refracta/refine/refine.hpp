#pragma once

#include "refracta/geom/camera.hpp"
#include "refracta/geom/envmap.hpp"
#include "refracta/geom/io.hpp"
#include "refracta/optics/optics.hpp"

#include <string>
#include <vector>

namespace refracta {

struct RefineConfig {
    int phase1_iters = 500;  // N1 frozen
    int phase2_iters = 500;  // joint
    double step = 0.01;
    double lambda_anchor = 0.1;
    double lambda_smooth = 0.05;
    double charbonnier_eps = 0.01;
    int max_backtracks = 20;
    int divergence_window = 50;
};

struct RefineResult {
    NormalMapPair normals;
    /// Best-so-far energy after each iteration (entry 0 is the initial energy).
    std::vector<double> loss_trace;
    double initial_render_loss = 0.0;
    double final_render_loss = 0.0;
    int iterations = 0;
    bool diverged = false;
    std::string diagnostic;
};

/// Energy terms at a given iterate.
struct RefineEnergy {
    double render = 0.0;
    double anchor = 0.0;
    double smooth = 0.0;
    double total() const { return render + anchor + smooth; }
};

/// Projected gradient descent on the unit sphere of
/// render loss + lambda_anchor * sum |N - N_init|^2 + lambda_smooth * (TV(N1) + TV(N2)).
/// The photometric term covers the pixels that are valid and non-TIR under the
/// initial normals. The returned iterate has the lowest energy among those whose
/// render loss does not exceed the initial one.
RefineResult refine_normals(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& init,
                            const Camera& camera, double ior, const RefineConfig& config = {});

RefineEnergy refine_energy(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& normals,
                           const NormalMapPair& init, const MaskBuffer& active, const Camera& camera, double ior,
                           const RefineConfig& config);

/// Charbonnier TV over 4-neighbor pairs of valid pixels: sum sqrt(|Na - Nb|^2 + eps^2).
double charbonnier_tv(const ImageBuffer& n, const MaskBuffer& valid, double eps);

/// "iteration,loss" rows.
void write_loss_trace_csv(const fs::path& path, const std::vector<double>& trace);

}  // namespace refracta
