#pragma once

#include "refracta/geom/camera.hpp"
#include "refracta/geom/envmap.hpp"
#include "refracta/geom/image.hpp"
#include "refracta/geom/mesh.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace refracta {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class PlyFormat { Ascii, BinaryLittleEndian };

// Meshes. PLY stores positions and normals as doubles so save/load is exact.
void save_ply(const fs::path& path, const TriangleMesh& mesh, PlyFormat format = PlyFormat::BinaryLittleEndian);
TriangleMesh load_ply(const fs::path& path);
void save_obj(const fs::path& path, const TriangleMesh& mesh);
TriangleMesh load_obj(const fs::path& path);
/// Dispatches on the extension (.ply / .obj).
TriangleMesh load_mesh(const fs::path& path);
void save_mesh(const fs::path& path, const TriangleMesh& mesh);

/// Vertex-only PLY with arbitrary named double properties (columns), e.g. x y z nx ny nz err.
struct PointTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    const std::vector<double>& column(const std::string& name) const;
};
void save_point_ply(const fs::path& path, const PointTable& table);
PointTable load_point_ply(const fs::path& path);

// Images. PFM is float32; 3-channel images use "PF", scalar images "Pf".
void save_pfm(const fs::path& path, const ImageBuffer& img);
void save_pfm(const fs::path& path, const ScalarImage& img);
ImageBuffer load_pfm_rgb(const fs::path& path);
ScalarImage load_pfm_scalar(const fs::path& path);

/// 8-bit sRGB PNG for display; values are clamped to [0, 1] after encoding.
void save_png(const fs::path& path, const ImageBuffer& linear_rgb);
/// Loads an 8/16-bit PNG and inverse-sRGB-decodes it to linear RGB.
ImageBuffer load_png_rgb(const fs::path& path);
/// Masks are single-channel 0/255 PNGs; load thresholds at 128.
void save_mask_png(const fs::path& path, const MaskBuffer& mask);
MaskBuffer load_mask_png(const fs::path& path);

/// Radiance RGBE (.hdr), flat or run-length encoded scanlines.
ImageBuffer load_hdr(const fs::path& path);

/// Environment map from .hdr or .pfm.
EnvironmentMap load_envmap(const fs::path& path);

double srgb_to_linear(double c);
double linear_to_srgb(double c);

// JSON.
json camera_to_json(const Camera& cam);
Camera camera_from_json(const json& j);
json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

/// Whole-file byte read used for hashing and comparisons.
std::string read_file_bytes(const fs::path& path);
void write_file_bytes(const fs::path& path, const std::string& bytes);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const fs::path& path);

}  // namespace refracta
