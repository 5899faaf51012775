#pragma once

#include "refracta/geom/bvh.hpp"
#include "refracta/geom/camera.hpp"
#include "refracta/geom/image.hpp"
#include "refracta/geom/mesh.hpp"
#include "refracta/optics/optics.hpp"

#include <optional>
#include <vector>

namespace refracta {

/// Regular grid of cubic voxels; voxel (i, j, k) has center lo + (i + 0.5, j + 0.5, k + 0.5) * h.
struct OccupancyVolume {
    int nx = 0, ny = 0, nz = 0;
    Vec3 lo = Vec3::Zero();
    double h = 0.0;
    std::vector<std::uint8_t> occ;

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * ny + j) * nx + i;
    }
    bool at(int i, int j, int k) const { return occ[index(i, j, k)] != 0; }
    Vec3 center(int i, int j, int k) const { return lo + h * Vec3(i + 0.5, j + 0.5, k + 0.5); }
    Aabb bounds() const;
    std::size_t occupied() const;
    /// Occupied voxel count times voxel volume.
    double volume() const;
    /// True when p lies in an occupied voxel or within `tolerance` of one.
    bool contains(const Vec3& p, double tolerance = 0.0) const;
};

/// Node-sampled scalar field; node (i, j, k) sits at origin + h * (i, j, k).
struct ScalarGrid {
    int nx = 0, ny = 0, nz = 0;
    Vec3 origin = Vec3::Zero();
    double h = 1.0;
    std::vector<double> values;

    ScalarGrid() = default;
    ScalarGrid(int x, int y, int z, Vec3 o, double spacing, double fill = 0.0)
        : nx(x), ny(y), nz(z), origin(std::move(o)), h(spacing), values(static_cast<std::size_t>(x) * y * z, fill) {}
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * ny + j) * nx + i;
    }
    double& operator()(int i, int j, int k) { return values[index(i, j, k)]; }
    double operator()(int i, int j, int k) const { return values[index(i, j, k)]; }
};

/// Bounds of the silhouette-cone intersection, found by conservative
/// coarse-to-fine carving from a box around the cameras' viewing frusta.
/// Cells must also be able to reach the mask in at least half of the views,
/// which trims cone tails that only one or two cameras constrain.
Aabb fit_bounds(const std::vector<MaskBuffer>& masks, const std::vector<Camera>& cameras);

/// Center-point carving. A voxel survives iff it projects inside the mask in
/// every view where it lands in frame; out-of-frame views impose nothing.
/// `resolution` is the voxel count along the longest bounds axis.
/// Throws DataError("empty hull") when nothing survives.
OccupancyVolume carve(const std::vector<MaskBuffer>& masks, const std::vector<Camera>& cameras, int resolution = 128,
                      std::optional<Aabb> bounds = std::nullopt);

/// Clears every occupied voxel outside the largest 6-connected component
/// (lowest linear index wins ties). Returns the number of voxels removed.
std::size_t keep_largest_component(OccupancyVolume& vol);

/// Closed, outward-oriented iso-surface of the field at `iso`; inside means value > iso.
/// Ambiguous faces always separate the inside corners, so shared faces triangulate
/// identically and the result is watertight wherever the surface avoids the grid border.
TriangleMesh marching_cubes(const ScalarGrid& grid, double iso);

/// Iso-0.5 surface of the occupancy field (voxel centers as grid nodes), padded
/// so the surface is closed. `smooth` applies one 3x3x3 box filter first.
TriangleMesh marching_cubes(const OccupancyVolume& vol, bool smooth = true);

/// Loop subdivision. Throws ArgumentError unless every edge has exactly two
/// consistently oriented triangles.
TriangleMesh loop_subdivide(const TriangleMesh& mesh, int iterations = 3);

/// Ray-traced hull normals for one camera. N2 is the outward normal at the exit
/// point. Pixels whose exit refraction fails are flagged TIR; pixels with no
/// first hit, no exit hit, or grazing incidence (|cos| < 1e-6) are invalid.
NormalMapPair hull_normal_maps(const Surface& hull, const Camera& camera, double ior);

}  // namespace refracta
