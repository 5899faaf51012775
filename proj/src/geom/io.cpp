#include "refracta/geom/io.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace refracta {

std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_bytes(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to '" + path.string() + "'");
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr)) throw NumericalError("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += hex[md[i] >> 4], out += hex[md[i] & 15];
    return out;
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file_bytes(path)); }

namespace {

// ---------------------------------------------------------------- PLY

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::Float64;
    bool is_list = false;
    PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

int type_size(PlyType t) {
    switch (t) {
        case PlyType::Int8:
        case PlyType::UInt8: return 1;
        case PlyType::Int16:
        case PlyType::UInt16: return 2;
        case PlyType::Int32:
        case PlyType::UInt32:
        case PlyType::Float32: return 4;
        case PlyType::Float64: return 8;
    }
    return 0;
}

bool parse_ply_type(const std::string& s, PlyType& t) {
    static const std::map<std::string, PlyType> table = {
        {"char", PlyType::Int8},     {"int8", PlyType::Int8},       {"uchar", PlyType::UInt8},
        {"uint8", PlyType::UInt8},   {"short", PlyType::Int16},     {"int16", PlyType::Int16},
        {"ushort", PlyType::UInt16}, {"uint16", PlyType::UInt16},   {"int", PlyType::Int32},
        {"int32", PlyType::Int32},   {"uint", PlyType::UInt32},     {"uint32", PlyType::UInt32},
        {"float", PlyType::Float32}, {"float32", PlyType::Float32}, {"double", PlyType::Float64},
        {"float64", PlyType::Float64}};
    auto it = table.find(s);
    if (it == table.end()) return false;
    t = it->second;
    return true;
}

class PlyReader {
public:
    PlyReader(std::string file, std::string bytes) : file_(std::move(file)), data_(std::move(bytes)) {}

    void parse_header() {
        std::string line = next_line("'ply' magic");
        if (line != "ply") fail(0, "'ply' magic");
        for (;;) {
            const std::size_t line_start = pos_;
            line = next_line("header line or 'end_header'");
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            if (key.empty() || key == "comment" || key == "obj_info") continue;
            if (key == "format") {
                std::string fmt;
                ls >> fmt;
                if (fmt == "ascii") format_ = 0;
                else if (fmt == "binary_little_endian") format_ = 1;
                else if (fmt == "binary_big_endian") format_ = 2;
                else fail(line_start, "format ascii|binary_little_endian|binary_big_endian");
            } else if (key == "element") {
                PlyElement e;
                long long count = -1;
                ls >> e.name >> count;
                if (e.name.empty() || count < 0 || ls.fail()) fail(line_start, "'element <name> <count>'");
                e.count = static_cast<std::size_t>(count);
                elements_.push_back(e);
            } else if (key == "property") {
                if (elements_.empty()) fail(line_start, "'element' before 'property'");
                PlyProperty p;
                std::string t;
                ls >> t;
                if (t == "list") {
                    std::string ct, it;
                    ls >> ct >> it >> p.name;
                    p.is_list = true;
                    if (!parse_ply_type(ct, p.count_type) || !parse_ply_type(it, p.type) || p.name.empty())
                        fail(line_start, "'property list <count type> <item type> <name>'");
                } else {
                    ls >> p.name;
                    if (!parse_ply_type(t, p.type) || p.name.empty()) fail(line_start, "'property <type> <name>'");
                }
                elements_.back().props.push_back(p);
            } else if (key == "end_header") {
                if (format_ < 0) fail(line_start, "'format' line before 'end_header'");
                return;
            } else {
                fail(line_start, "known header keyword");
            }
        }
    }

    const std::vector<PlyElement>& elements() const { return elements_; }

    /// Reads the body; values[element][property] is a flat list (lists are
    /// stored as count followed by items in `lists`).
    void read_body(std::vector<std::vector<std::vector<double>>>& scalars,
                   std::vector<std::vector<std::vector<std::vector<long long>>>>& lists) {
        scalars.resize(elements_.size());
        lists.resize(elements_.size());
        for (std::size_t e = 0; e < elements_.size(); ++e) {
            const PlyElement& el = elements_[e];
            scalars[e].assign(el.props.size(), {});
            lists[e].assign(el.props.size(), {});
            for (std::size_t p = 0; p < el.props.size(); ++p) {
                if (el.props[p].is_list) lists[e][p].reserve(el.count);
                else scalars[e][p].reserve(el.count);
            }
            for (std::size_t i = 0; i < el.count; ++i) {
                for (std::size_t p = 0; p < el.props.size(); ++p) {
                    const PlyProperty& prop = el.props[p];
                    if (prop.is_list) {
                        const double n = read_value(prop.count_type, "list count of '" + prop.name + "'");
                        if (n < 0 || n > 1e6) fail(pos_, "sane list count");
                        std::vector<long long> items(static_cast<std::size_t>(n));
                        for (auto& it : items)
                            it = static_cast<long long>(read_value(prop.type, "list item of '" + prop.name + "'"));
                        lists[e][p].push_back(std::move(items));
                    } else {
                        scalars[e][p].push_back(read_value(prop.type, "value of '" + prop.name + "'"));
                    }
                }
            }
        }
    }

    [[noreturn]] void fail(std::size_t offset, const std::string& expected) const {
        throw ParseError(file_, offset, expected);
    }

private:
    std::string next_line(const std::string& expected) {
        const std::size_t nl = data_.find('\n', pos_);
        if (nl == std::string::npos) fail(pos_, expected);
        std::string line = data_.substr(pos_, nl - pos_);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos_ = nl + 1;
        return line;
    }

    double read_value(PlyType t, const std::string& what) {
        if (format_ == 0) {
            while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
            const std::size_t start = pos_;
            while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
            if (start == pos_) fail(start, what);
            const std::string tok = data_.substr(start, pos_ - start);
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end != tok.c_str() + tok.size()) fail(start, what);
            return v;
        }
        const int n = type_size(t);
        if (pos_ + n > data_.size()) fail(pos_, what);
        unsigned char buf[8];
        std::memcpy(buf, data_.data() + pos_, n);
        const bool swap = (format_ == 2) == (std::endian::native == std::endian::little);
        if (swap) std::reverse(buf, buf + n);
        pos_ += n;
        switch (t) {
            case PlyType::Int8: return static_cast<double>(static_cast<std::int8_t>(buf[0]));
            case PlyType::UInt8: return buf[0];
            case PlyType::Int16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
            case PlyType::UInt16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
            case PlyType::Int32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
            case PlyType::UInt32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
            case PlyType::Float32: { float v; std::memcpy(&v, buf, 4); return v; }
            case PlyType::Float64: { double v; std::memcpy(&v, buf, 8); return v; }
        }
        return 0.0;
    }

    std::string file_;
    std::string data_;
    std::size_t pos_ = 0;
    int format_ = -1;
    std::vector<PlyElement> elements_;
};

template <class T>
void put(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "binary writers assume a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int find_prop(const PlyElement& e, std::initializer_list<const char*> names) {
    for (std::size_t i = 0; i < e.props.size(); ++i)
        for (const char* n : names)
            if (e.props[i].name == n) return static_cast<int>(i);
    return -1;
}

}  // namespace

void save_ply(const fs::path& path, const TriangleMesh& mesh, PlyFormat format) {
    validate_mesh(mesh);
    const bool normals = mesh.normals.size() == mesh.vertices.size() && !mesh.normals.empty();
    std::string out = "ply\nformat ";
    out += format == PlyFormat::Ascii ? "ascii 1.0\n" : "binary_little_endian 1.0\n";
    out += "element vertex " + std::to_string(mesh.vertices.size()) + "\n";
    out += "property double x\nproperty double y\nproperty double z\n";
    if (normals) out += "property double nx\nproperty double ny\nproperty double nz\n";
    out += "element face " + std::to_string(mesh.triangles.size()) + "\n";
    out += "property list uchar int vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& p = mesh.vertices[i];
        if (format == PlyFormat::Ascii) {
            out += fmt_double(p.x()) + " " + fmt_double(p.y()) + " " + fmt_double(p.z());
            if (normals) {
                const Vec3& n = mesh.normals[i];
                out += " " + fmt_double(n.x()) + " " + fmt_double(n.y()) + " " + fmt_double(n.z());
            }
            out += "\n";
        } else {
            for (int k = 0; k < 3; ++k) put(out, p[k]);
            if (normals)
                for (int k = 0; k < 3; ++k) put(out, mesh.normals[i][k]);
        }
    }
    for (const Tri& t : mesh.triangles) {
        if (format == PlyFormat::Ascii) {
            out += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
        } else {
            put<std::uint8_t>(out, 3);
            for (int k : t) put<std::int32_t>(out, k);
        }
    }
    write_file_bytes(path, out);
}

TriangleMesh load_ply(const fs::path& path) {
    PlyReader reader(path.string(), read_file_bytes(path));
    reader.parse_header();
    std::vector<std::vector<std::vector<double>>> scalars;
    std::vector<std::vector<std::vector<std::vector<long long>>>> lists;
    reader.read_body(scalars, lists);
    TriangleMesh mesh;
    const auto& els = reader.elements();
    for (std::size_t e = 0; e < els.size(); ++e) {
        if (els[e].name == "vertex") {
            const int x = find_prop(els[e], {"x"}), y = find_prop(els[e], {"y"}), z = find_prop(els[e], {"z"});
            if (x < 0 || y < 0 || z < 0) reader.fail(0, "vertex properties x, y, z");
            const int nx = find_prop(els[e], {"nx"}), ny = find_prop(els[e], {"ny"}), nz = find_prop(els[e], {"nz"});
            mesh.vertices.resize(els[e].count);
            for (std::size_t i = 0; i < els[e].count; ++i)
                mesh.vertices[i] = Vec3(scalars[e][x][i], scalars[e][y][i], scalars[e][z][i]);
            if (nx >= 0 && ny >= 0 && nz >= 0) {
                mesh.normals.resize(els[e].count);
                for (std::size_t i = 0; i < els[e].count; ++i)
                    mesh.normals[i] = Vec3(scalars[e][nx][i], scalars[e][ny][i], scalars[e][nz][i]);
            }
        } else if (els[e].name == "face") {
            const int vi = find_prop(els[e], {"vertex_indices", "vertex_index"});
            if (vi < 0 || !els[e].props[vi].is_list) reader.fail(0, "face property list vertex_indices");
            for (const auto& poly : lists[e][vi])
                for (std::size_t k = 1; k + 1 < poly.size(); ++k)
                    mesh.triangles.push_back(
                        {static_cast<int>(poly[0]), static_cast<int>(poly[k]), static_cast<int>(poly[k + 1])});
        }
    }
    try {
        validate_mesh(mesh);
    } catch (const ArgumentError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    if (mesh.normals.empty() && !mesh.triangles.empty()) compute_vertex_normals(mesh);
    return mesh;
}

const std::vector<double>& PointTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return columns[i];
    throw DataError("point table has no column '" + name + "'");
}

void save_point_ply(const fs::path& path, const PointTable& table) {
    std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(table.rows()) + "\n";
    for (const auto& n : table.names) out += "property double " + n + "\n";
    out += "end_header\n";
    for (std::size_t r = 0; r < table.rows(); ++r)
        for (const auto& col : table.columns) put(out, col[r]);
    write_file_bytes(path, out);
}

PointTable load_point_ply(const fs::path& path) {
    PlyReader reader(path.string(), read_file_bytes(path));
    reader.parse_header();
    std::vector<std::vector<std::vector<double>>> scalars;
    std::vector<std::vector<std::vector<std::vector<long long>>>> lists;
    reader.read_body(scalars, lists);
    PointTable t;
    const auto& els = reader.elements();
    for (std::size_t e = 0; e < els.size(); ++e) {
        if (els[e].name != "vertex") continue;
        for (std::size_t p = 0; p < els[e].props.size(); ++p) {
            if (els[e].props[p].is_list) continue;
            t.names.push_back(els[e].props[p].name);
            t.columns.push_back(scalars[e][p]);
        }
    }
    return t;
}

void save_obj(const fs::path& path, const TriangleMesh& mesh) {
    validate_mesh(mesh);
    std::string out;
    for (const Vec3& p : mesh.vertices) out += "v " + fmt_double(p.x()) + " " + fmt_double(p.y()) + " " + fmt_double(p.z()) + "\n";
    const bool normals = mesh.normals.size() == mesh.vertices.size() && !mesh.normals.empty();
    if (normals)
        for (const Vec3& n : mesh.normals)
            out += "vn " + fmt_double(n.x()) + " " + fmt_double(n.y()) + " " + fmt_double(n.z()) + "\n";
    for (const Tri& t : mesh.triangles) {
        out += "f";
        for (int k : t) out += normals ? " " + std::to_string(k + 1) + "//" + std::to_string(k + 1) : " " + std::to_string(k + 1);
        out += "\n";
    }
    write_file_bytes(path, out);
}

TriangleMesh load_obj(const fs::path& path) {
    const std::string data = read_file_bytes(path);
    TriangleMesh mesh;
    std::vector<Vec3> normals;
    std::size_t pos = 0;
    const std::string file = path.string();
    while (pos < data.size()) {
        std::size_t nl = data.find('\n', pos);
        if (nl == std::string::npos) nl = data.size();
        const std::string line = data.substr(pos, nl - pos);
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "v" || key == "vn") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw ParseError(file, pos, "three coordinates after '" + key + "'");
            (key == "v" ? mesh.vertices : normals).emplace_back(x, y, z);
        } else if (key == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ls >> tok) {
                const long v = std::strtol(tok.c_str(), nullptr, 10);
                if (v == 0) throw ParseError(file, pos, "non-zero face index");
                idx.push_back(v > 0 ? static_cast<int>(v - 1) : static_cast<int>(mesh.vertices.size()) + static_cast<int>(v));
            }
            if (idx.size() < 3) throw ParseError(file, pos, "at least three face indices");
            for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
        }
        pos = nl + 1;
    }
    if (normals.size() == mesh.vertices.size()) mesh.normals = std::move(normals);
    try {
        validate_mesh(mesh);
    } catch (const ArgumentError& e) {
        throw DataError(file + ": " + e.what());
    }
    if (mesh.normals.empty() && !mesh.triangles.empty()) compute_vertex_normals(mesh);
    return mesh;
}

TriangleMesh load_mesh(const fs::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".ply") return load_ply(path);
    if (ext == ".obj") return load_obj(path);
    throw DataError("unsupported mesh format '" + ext + "'");
}

void save_mesh(const fs::path& path, const TriangleMesh& mesh) {
    const std::string ext = path.extension().string();
    if (ext == ".ply") return save_ply(path, mesh);
    if (ext == ".obj") return save_obj(path, mesh);
    throw DataError("unsupported mesh format '" + ext + "'");
}

// ---------------------------------------------------------------- PFM

namespace {

std::string pfm_header(const char* magic, int w, int h) {
    return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
}

struct PfmData {
    int width = 0, height = 0, channels = 0;
    std::vector<float> values;  // top-to-bottom rows
};

PfmData read_pfm(const fs::path& path) {
    const std::string data = read_file_bytes(path);
    const std::string file = path.string();
    std::size_t pos = 0;
    auto token = [&](const std::string& what) {
        while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        const std::size_t start = pos;
        while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        if (start == pos) throw ParseError(file, start, what);
        return std::make_pair(start, data.substr(start, pos - start));
    };
    PfmData out;
    auto [m_at, magic] = token("'PF' or 'Pf' magic");
    if (magic == "PF") out.channels = 3;
    else if (magic == "Pf") out.channels = 1;
    else throw ParseError(file, m_at, "'PF' or 'Pf' magic");
    auto [w_at, ws] = token("width");
    auto [h_at, hs] = token("height");
    auto [s_at, ss] = token("scale");
    char* end = nullptr;
    out.width = static_cast<int>(std::strtol(ws.c_str(), &end, 10));
    if (*end || out.width <= 0) throw ParseError(file, w_at, "positive integer width");
    out.height = static_cast<int>(std::strtol(hs.c_str(), &end, 10));
    if (*end || out.height <= 0) throw ParseError(file, h_at, "positive integer height");
    const double scale = std::strtod(ss.c_str(), &end);
    if (*end || scale == 0.0) throw ParseError(file, s_at, "non-zero scale");
    ++pos;  // single whitespace after the scale
    const bool little = scale < 0.0;
    const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
    if (data.size() < pos + n * 4) throw ParseError(file, data.size(), std::to_string(n * 4) + " bytes of float data");
    out.values.resize(n);
    const bool swap = little != (std::endian::native == std::endian::little);
    const std::size_t row = static_cast<std::size_t>(out.width) * out.channels;
    for (int y = 0; y < out.height; ++y) {
        // PFM rows run bottom-to-top.
        const char* src = data.data() + pos + static_cast<std::size_t>(out.height - 1 - y) * row * 4;
        for (std::size_t i = 0; i < row; ++i) {
            unsigned char b[4];
            std::memcpy(b, src + 4 * i, 4);
            if (swap) std::reverse(b, b + 4);
            float f;
            std::memcpy(&f, b, 4);
            out.values[static_cast<std::size_t>(y) * row + i] = f;
        }
    }
    return out;
}

}  // namespace

void save_pfm(const fs::path& path, const ImageBuffer& img) {
    std::string out = pfm_header("PF", img.width(), img.height());
    for (int y = img.height() - 1; y >= 0; --y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c) put(out, static_cast<float>(img(x, y)[c]));
    write_file_bytes(path, out);
}

void save_pfm(const fs::path& path, const ScalarImage& img) {
    std::string out = pfm_header("Pf", img.width(), img.height());
    for (int y = img.height() - 1; y >= 0; --y)
        for (int x = 0; x < img.width(); ++x) put(out, static_cast<float>(img(x, y)));
    write_file_bytes(path, out);
}

ImageBuffer load_pfm_rgb(const fs::path& path) {
    PfmData d = read_pfm(path);
    ImageBuffer img(d.width, d.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (d.channels == 3) img[i] = Vec3(d.values[3 * i], d.values[3 * i + 1], d.values[3 * i + 2]);
        else img[i] = Vec3::Constant(d.values[i]);
    }
    return img;
}

ScalarImage load_pfm_scalar(const fs::path& path) {
    PfmData d = read_pfm(path);
    ScalarImage img(d.width, d.height);
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = d.channels == 1 ? d.values[i] : (d.values[3 * i] + d.values[3 * i + 1] + d.values[3 * i + 2]) / 3.0;
    return img;
}

// ---------------------------------------------------------------- PNG

double srgb_to_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }
double linear_to_srgb(double c) { return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055; }

namespace {

struct PngImage {
    int width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> pixels;  // 8-bit, row-major
};

void png_write(const fs::path& path, const PngImage& img) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr))
        throw DataError("png encode failed for '" + path.string() + "': " + image.message);
    std::string buf(size, '\0');
    if (!png_image_write_to_memory(&image, buf.data(), &size, 0, img.pixels.data(), 0, nullptr))
        throw DataError("png encode failed for '" + path.string() + "': " + image.message);
    buf.resize(size);
    write_file_bytes(path, buf);
}

PngImage png_read(const fs::path& path, int channels) {
    const std::string bytes = read_file_bytes(path);
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw ParseError(path.string(), 0, std::string("PNG signature and header (") + image.message + ")");
    // Ask for the raw (sRGB-encoded) 8-bit values; decoding to linear is ours.
    image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    image.flags |= PNG_IMAGE_FLAG_COLORSPACE_NOT_sRGB;
    PngImage out;
    out.width = static_cast<int>(image.width);
    out.height = static_cast<int>(image.height);
    out.channels = channels;
    out.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr))
        throw ParseError(path.string(), 0, std::string("complete PNG image data (") + image.message + ")");
    return out;
}

}  // namespace

void save_png(const fs::path& path, const ImageBuffer& linear_rgb) {
    PngImage img{linear_rgb.width(), linear_rgb.height(), 3, {}};
    img.pixels.resize(linear_rgb.size() * 3);
    for (std::size_t i = 0; i < linear_rgb.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double s = std::clamp(linear_to_srgb(std::max(0.0, linear_rgb[i][c])), 0.0, 1.0);
            img.pixels[3 * i + c] = static_cast<std::uint8_t>(std::lround(s * 255.0));
        }
    png_write(path, img);
}

ImageBuffer load_png_rgb(const fs::path& path) {
    PngImage img = png_read(path, 3);
    ImageBuffer out(img.width, img.height);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = Vec3(srgb_to_linear(img.pixels[3 * i] / 255.0), srgb_to_linear(img.pixels[3 * i + 1] / 255.0),
                      srgb_to_linear(img.pixels[3 * i + 2] / 255.0));
    return out;
}

void save_mask_png(const fs::path& path, const MaskBuffer& mask) {
    PngImage img{mask.width(), mask.height(), 1, {}};
    img.pixels.resize(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] ? 255 : 0;
    png_write(path, img);
}

MaskBuffer load_mask_png(const fs::path& path) {
    PngImage img = png_read(path, 1);
    MaskBuffer m(img.width, img.height);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = img.pixels[i] >= 128 ? 1 : 0;
    return m;
}

// ---------------------------------------------------------------- HDR

ImageBuffer load_hdr(const fs::path& path) {
    const std::string data = read_file_bytes(path);
    const std::string file = path.string();
    if (data.rfind("#?", 0) != 0) throw ParseError(file, 0, "'#?RADIANCE' or '#?RGBE' signature");
    std::size_t pos = 0;
    bool rgbe = false;
    for (;;) {
        const std::size_t nl = data.find('\n', pos);
        if (nl == std::string::npos) throw ParseError(file, pos, "blank line ending the header");
        const std::string line = data.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) break;
        if (line == "FORMAT=32-bit_rle_rgbe") rgbe = true;
        if (line.rfind("FORMAT=", 0) == 0 && !rgbe) throw ParseError(file, nl - line.size(), "FORMAT=32-bit_rle_rgbe");
    }
    const std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) throw ParseError(file, pos, "resolution line");
    const std::string res = data.substr(pos, nl - pos);
    int w = 0, h = 0;
    char ya[3] = {}, xa[3] = {};
    if (std::sscanf(res.c_str(), "%2s %d %2s %d", ya, &h, xa, &w) != 4 || std::string(ya) != "-Y" ||
        std::string(xa) != "+X" || w <= 0 || h <= 0)
        throw ParseError(file, pos, "'-Y <height> +X <width>'");
    pos = nl + 1;
    ImageBuffer img(w, h);
    std::vector<std::uint8_t> scan(static_cast<std::size_t>(w) * 4);
    auto need = [&](std::size_t n) {
        if (pos + n > data.size()) throw ParseError(file, data.size(), "more scanline data");
    };
    for (int y = 0; y < h; ++y) {
        need(4);
        const auto* p = reinterpret_cast<const std::uint8_t*>(data.data() + pos);
        const bool rle = w >= 8 && w < 32768 && p[0] == 2 && p[1] == 2 && !(p[2] & 0x80) && ((p[2] << 8) | p[3]) == w;
        if (rle) {
            pos += 4;
            for (int c = 0; c < 4; ++c) {
                int x = 0;
                while (x < w) {
                    need(1);
                    int count = static_cast<std::uint8_t>(data[pos++]);
                    if (count > 128) {
                        count -= 128;
                        need(1);
                        const std::uint8_t v = static_cast<std::uint8_t>(data[pos++]);
                        if (x + count > w) throw ParseError(file, pos, "run within scanline");
                        for (int k = 0; k < count; ++k) scan[4 * (x++) + c] = v;
                    } else {
                        if (count == 0 || x + count > w) throw ParseError(file, pos, "literal run within scanline");
                        need(count);
                        for (int k = 0; k < count; ++k) scan[4 * (x++) + c] = static_cast<std::uint8_t>(data[pos++]);
                    }
                }
            }
        } else {
            need(static_cast<std::size_t>(w) * 4);
            std::memcpy(scan.data(), data.data() + pos, static_cast<std::size_t>(w) * 4);
            pos += static_cast<std::size_t>(w) * 4;
        }
        for (int x = 0; x < w; ++x) {
            const std::uint8_t* e = &scan[4 * x];
            if (e[3] == 0) {
                img(x, y) = Vec3::Zero();
            } else {
                const double f = std::ldexp(1.0, static_cast<int>(e[3]) - (128 + 8));
                img(x, y) = Vec3((e[0] + 0.5) * f, (e[1] + 0.5) * f, (e[2] + 0.5) * f);
            }
        }
    }
    return img;
}

EnvironmentMap load_envmap(const fs::path& path) {
    const std::string ext = path.extension().string();
    ImageBuffer img;
    if (ext == ".hdr") img = load_hdr(path);
    else if (ext == ".pfm") img = load_pfm_rgb(path);
    else if (ext == ".png") img = load_png_rgb(path);
    else throw DataError("unsupported environment map format '" + ext + "'");
    try {
        return EnvironmentMap(std::move(img));
    } catch (const ArgumentError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- JSON

json camera_to_json(const Camera& cam) {
    json j;
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    std::vector<double> r(9);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r[3 * i + k] = cam.rotation(i, k);
    j["R"] = r;
    j["t"] = std::vector<double>{cam.center.x(), cam.center.y(), cam.center.z()};
    j["convention"] = "cam2world";
    return j;
}

Camera camera_from_json(const json& j) {
    try {
        Camera cam;
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        const auto r = j.at("R").get<std::vector<double>>();
        const auto t = j.at("t").get<std::vector<double>>();
        if (r.size() != 9 || t.size() != 3) throw DataError("camera: R needs 9 and t needs 3 values");
        if (j.contains("convention") && j.at("convention").get<std::string>() != "cam2world")
            throw DataError("camera: only the cam2world convention is supported");
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) cam.rotation(i, k) = r[3 * i + k];
        cam.center = Vec3(t[0], t[1], t[2]);
        cam.validate();
        return cam;
    } catch (const json::exception& e) {
        throw DataError(std::string("camera: ") + e.what());
    } catch (const ArgumentError& e) {
        throw DataError(e.what());
    }
}

json read_json(const fs::path& path) {
    const std::string bytes = read_file_bytes(path);
    try {
        return json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string(), e.byte, "valid JSON (" + std::string(e.what()) + ")");
    }
}

void write_json(const fs::path& path, const json& j) { write_file_bytes(path, j.dump(2) + "\n"); }

}  // namespace refracta
