#pragma once

#include "refracta/fuse/fuse.hpp"
#include "refracta/geom/bvh.hpp"
#include "refracta/geom/camera.hpp"
#include "refracta/geom/mesh.hpp"
#include "refracta/hull/hull.hpp"

#include <vector>

namespace refracta {

struct LossWeights {
    double position = 200.0;  // lambda_1
    double normal = 5.0;      // lambda_2
};

/// Sum of w1 |p - p^|^2 + w2 |N - N^|^2 with p^ the closest point on the gt mesh
/// and N^ its interpolated normal.
double loss_nearest(const std::vector<Vec3>& points, const std::vector<Vec3>& normals, const AccelIndex& gt,
                    const LossWeights& w = {});

/// First-hit positions and normals of a surface as seen by one camera.
struct FirstSurfaceMaps {
    ImageBuffer position;
    ImageBuffer normal;
    MaskBuffer valid;
};
FirstSurfaceMaps first_surface_maps(const Surface& surface, const Camera& camera);

/// Same weighting as loss_nearest, but for points with view id v > 0 the
/// target is sampled from the gt maps of view v at the point's projection.
/// View id 0, or a projection with no valid gt tap, falls back to the closest point.
double loss_view(const std::vector<Vec3>& points, const std::vector<Vec3>& normals, const std::vector<int>& view,
                 const std::vector<FirstSurfaceMaps>& gt_maps, const std::vector<Camera>& cameras,
                 const AccelIndex& gt, const LossWeights& w = {});

/// Symmetric nearest-neighbor loss with unsquared norms:
/// sum over A of (w1/2)|a - b(a)| + (w2/2)|n_a - n_b(a)|, plus the same from B to A.
double loss_chamfer(const std::vector<Vec3>& pa, const std::vector<Vec3>& na, const std::vector<Vec3>& pb,
                    const std::vector<Vec3>& nb, const LossWeights& w = {});

/// Conjugate-gradient failure with the relative residual after each iteration.
class SolverError : public NumericalError {
public:
    SolverError(const std::string& msg, std::vector<double> residuals)
        : NumericalError(msg), residuals_(std::move(residuals)) {}
    const std::vector<double>& residuals() const { return residuals_; }

private:
    std::vector<double> residuals_;
};

struct PoissonConfig {
    int resolution = 128;      // cells along the longest axis of the padded box
    double screening = 0.0;    // weight pulling the indicator at the samples toward the iso value
    double sigma_cells = 1.5;  // Gaussian smoothing of the splatted field
    double tolerance = 1e-6;   // relative residual
    int max_iters = 3000;
    double padding = 0.15;     // box margin as a fraction of the point bounds diagonal
};

struct PoissonResult {
    TriangleMesh mesh;
    ScalarGrid indicator;
    double iso = 0.0;
    std::vector<double> residuals;
};

/// Indicator-function reconstruction from outward-oriented samples: staggered
/// splat, Poisson solve with zero boundary values, iso-surface at the mean
/// indicator value over the samples. Throws DataError when the normal field is
/// zero (no surface) and SolverError when CG does not converge.
PoissonResult poisson_reconstruct(const std::vector<Vec3>& points, const std::vector<Vec3>& normals,
                                  const PoissonConfig& config = {});

/// Conjugate gradients on A x = b with A the 7-point Laplacian (6 x_i minus the
/// neighbors) and boundary nodes held at zero. Exposed for tests.
std::vector<double> solve_grid_poisson(int nx, int ny, int nz, const std::vector<double>& rhs,
                                       double tolerance, int max_iters, std::vector<double>& residuals,
                                       const std::vector<double>* warm_start = nullptr);

struct DeformConfig {
    double w_normal = 1.0;
    double w_prox = 0.1;
    double w_lap = 0.5;
    int iterations = 200;
    double step_fraction = 0.005;  // of the mesh bounds diagonal
    int max_backtracks = 10;
};

struct DeformResult {
    TriangleMesh mesh;
    std::vector<double> offsets;  // along the initial vertex normals
    std::vector<double> energy;   // after each accepted iteration; entry 0 is the initial energy
};

/// Energy of per-vertex offsets against per-vertex target normals and weights.
double deform_energy(const TriangleMesh& base, const std::vector<double>& offsets, const std::vector<Vec3>& targets,
                     const std::vector<double>& weights, const DeformConfig& config);

/// Moves hull vertices along their initial normals so area-weighted mesh normals
/// match the fused normals of the nearest cloud points (weighted by 1 - M^tr).
DeformResult deform_vertices(const TriangleMesh& hull, const OrientedPointCloud& cloud, const DeformConfig& config = {});

}  // namespace refracta
