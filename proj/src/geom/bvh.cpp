#include "refracta/geom/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace refracta {

namespace {

constexpr int kLeafSize = 4;
constexpr int kBins = 12;

double box_area(const Aabb& b) {
    if (!b.valid()) return 0.0;
    const Vec3 e = b.extent();
    return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
}

bool slab(const Aabb& b, const Vec3& o, const Vec3& inv, double t_min, double t_max, double& t_enter) {
    double t0 = t_min, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
        double tn = (b.lo[a] - o[a]) * inv[a];
        double tf = (b.hi[a] - o[a]) * inv[a];
        if (tn > tf) std::swap(tn, tf);
        // NaN from 0 * inf: treat as unbounded along this axis
        if (tn == tn) t0 = std::max(t0, tn);
        if (tf == tf) t1 = std::min(t1, tf);
        if (t0 > t1) return false;
    }
    t_enter = t0;
    return true;
}

double box_distance_sq(const Aabb& b, const Vec3& p) {
    const Vec3 d = (b.lo - p).cwiseMax(p - b.hi).cwiseMax(Vec3::Zero());
    return d.squaredNorm();
}

}  // namespace

bool intersect_triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Ray& ray, double t_min, double t_max,
                        double& t, double& b1, double& b2) {
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 pv = ray.dir.cross(e2);
    const double det = e1.dot(pv);
    if (det == 0.0) return false;
    const double inv = 1.0 / det;
    const Vec3 tv = ray.origin - a;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qv = tv.cross(e1);
    const double v = ray.dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    const double tt = e2.dot(qv) * inv;
    if (!(tt > t_min && tt < t_max)) return false;
    t = tt;
    b1 = u;
    b2 = v;
    return true;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, double& b1, double& b2) {
    // Ericson, Real-Time Collision Detection, 5.1.5
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) {
        b1 = b2 = 0.0;
        return a;
    }
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) {
        b1 = 1.0;
        b2 = 0.0;
        return b;
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        b1 = v;
        b2 = 0.0;
        return a + v * ab;
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) {
        b1 = 0.0;
        b2 = 1.0;
        return c;
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        b1 = 0.0;
        b2 = w;
        return a + w * ac;
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        b1 = 1.0 - w;
        b2 = w;
        return b + w * (c - b);
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    b1 = v;
    b2 = w;
    return a + ab * v + ac * w;
}

namespace {

Vec3 interpolate_normal(const TriangleMesh& m, int face, double b1, double b2) {
    const Tri& t = m.triangles[face];
    if (m.normals.size() != m.vertices.size()) return m.face_normal(face);
    const Vec3 n = (1.0 - b1 - b2) * m.normals[t[0]] + b1 * m.normals[t[1]] + b2 * m.normals[t[2]];
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : m.face_normal(face);
}

}  // namespace

AccelIndex::AccelIndex(TriangleMesh mesh) : mesh_(std::move(mesh)) {
    validate_mesh(mesh_);
    const int n = static_cast<int>(mesh_.triangles.size());
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    std::vector<Aabb> boxes(n);
    std::vector<Vec3> centroids(n);
    for (int i = 0; i < n; ++i) {
        for (int k : mesh_.triangles[i]) boxes[i].extend(mesh_.vertices[k]);
        centroids[i] = boxes[i].center();
    }
    nodes_.reserve(std::max(1, 2 * n / kLeafSize + 1));
    nodes_.emplace_back();
    if (n == 0) return;
    build(0, n, boxes, centroids);
}

int AccelIndex::build(int begin, int end, std::vector<Aabb>& boxes, std::vector<Vec3>& centroids) {
    // Node 0 is pre-allocated for the root; children are pushed in pairs.
    struct Task {
        int node, begin, end;
    };
    std::vector<Task> stack{{0, begin, end}};
    while (!stack.empty()) {
        const Task task = stack.back();
        stack.pop_back();
        Aabb box, cbox;
        for (int i = task.begin; i < task.end; ++i) {
            box.extend(boxes[order_[i]]);
            cbox.extend(centroids[order_[i]]);
        }
        nodes_[task.node].box = box;
        const int count = task.end - task.begin;
        int axis = 0;
        const Vec3 ext = cbox.extent();
        if (ext.y() > ext[axis]) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;
        if (count <= kLeafSize || ext[axis] <= 0.0) {
            nodes_[task.node].first = task.begin;
            nodes_[task.node].count = count;
            continue;
        }
        // Binned SAH along the widest centroid axis.
        Aabb bin_box[kBins];
        int bin_count[kBins] = {};
        const double lo = cbox.lo[axis], scale = kBins / ext[axis];
        auto bin_of = [&](int tri) { return std::min(kBins - 1, static_cast<int>((centroids[tri][axis] - lo) * scale)); };
        for (int i = task.begin; i < task.end; ++i) {
            const int b = bin_of(order_[i]);
            ++bin_count[b];
            bin_box[b].extend(boxes[order_[i]]);
        }
        double best_cost = std::numeric_limits<double>::infinity();
        int best_split = -1;
        for (int s = 1; s < kBins; ++s) {
            Aabb l, r;
            int nl = 0, nr = 0;
            for (int b = 0; b < s; ++b) {
                l.extend(bin_box[b]);
                nl += bin_count[b];
            }
            for (int b = s; b < kBins; ++b) {
                r.extend(bin_box[b]);
                nr += bin_count[b];
            }
            if (nl == 0 || nr == 0) continue;
            const double cost = nl * box_area(l) + nr * box_area(r);
            if (cost < best_cost) {
                best_cost = cost;
                best_split = s;
            }
        }
        int mid;
        if (best_split < 0) {
            mid = (task.begin + task.end) / 2;
            std::nth_element(order_.begin() + task.begin, order_.begin() + mid, order_.begin() + task.end,
                             [&](int a, int b) {
                                 return centroids[a][axis] < centroids[b][axis] ||
                                        (centroids[a][axis] == centroids[b][axis] && a < b);
                             });
        } else {
            auto it = std::stable_partition(order_.begin() + task.begin, order_.begin() + task.end,
                                            [&](int tri) { return bin_of(tri) < best_split; });
            mid = static_cast<int>(it - order_.begin());
        }
        const int left = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        nodes_.emplace_back();
        nodes_[task.node].left = left;
        stack.push_back({left + 1, mid, task.end});
        stack.push_back({left, task.begin, mid});
    }
    return 0;
}

Hit AccelIndex::make_hit(const Ray& ray, int face, double t, double b1, double b2) const {
    Hit h;
    h.t = t;
    h.face = face;
    h.b1 = b1;
    h.b2 = b2;
    h.point = ray.origin + t * ray.dir;
    h.normal = interpolate_normal(mesh_, face, b1, b2);
    return h;
}

std::optional<Hit> AccelIndex::intersect(const Ray& ray, double t_min, double t_max) const {
    if (mesh_.triangles.empty()) return std::nullopt;
    const Vec3 inv = ray.dir.cwiseInverse();
    double best_t = t_max, best_b1 = 0, best_b2 = 0;
    int best_face = -1;
    int stack[128];
    int sp = 0;
    double enter;
    if (!slab(nodes_[0].box, ray.origin, inv, t_min, t_max, enter)) return std::nullopt;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& node = nodes_[stack[--sp]];
        if (!slab(node.box, ray.origin, inv, t_min, best_t, enter)) continue;
        if (node.count > 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const int f = order_[i];
                const Tri& tri = mesh_.triangles[f];
                double t, b1, b2;
                // t_max slightly beyond best_t so equal-t hits on lower face ids are seen
                if (intersect_triangle(mesh_.vertices[tri[0]], mesh_.vertices[tri[1]], mesh_.vertices[tri[2]], ray,
                                       t_min, std::nextafter(best_t, std::numeric_limits<double>::infinity()), t,
                                       b1, b2)) {
                    if (t < best_t || (t == best_t && (best_face < 0 || f < best_face))) {
                        best_t = t;
                        best_face = f;
                        best_b1 = b1;
                        best_b2 = b2;
                    }
                }
            }
            continue;
        }
        const int l = node.left, r = node.left + 1;
        double el, er;
        const bool hl = slab(nodes_[l].box, ray.origin, inv, t_min, best_t, el);
        const bool hr = slab(nodes_[r].box, ray.origin, inv, t_min, best_t, er);
        if (hl && hr) {
            if (el < er) {
                stack[sp++] = r;
                stack[sp++] = l;
            } else {
                stack[sp++] = l;
                stack[sp++] = r;
            }
        } else if (hl) {
            stack[sp++] = l;
        } else if (hr) {
            stack[sp++] = r;
        }
    }
    if (best_face < 0) return std::nullopt;
    return make_hit(ray, best_face, best_t, best_b1, best_b2);
}

bool AccelIndex::occluded(const Ray& ray, double t_min, double t_max) const {
    if (mesh_.triangles.empty()) return false;
    const Vec3 inv = ray.dir.cwiseInverse();
    int stack[128];
    int sp = 0;
    stack[sp++] = 0;
    double enter;
    while (sp > 0) {
        const Node& node = nodes_[stack[--sp]];
        if (!slab(node.box, ray.origin, inv, t_min, t_max, enter)) continue;
        if (node.count > 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const Tri& tri = mesh_.triangles[order_[i]];
                double t, b1, b2;
                if (intersect_triangle(mesh_.vertices[tri[0]], mesh_.vertices[tri[1]], mesh_.vertices[tri[2]], ray,
                                       t_min, t_max, t, b1, b2))
                    return true;
            }
            continue;
        }
        stack[sp++] = node.left;
        stack[sp++] = node.left + 1;
    }
    return false;
}

ClosestPoint AccelIndex::closest_point(const Vec3& p) const {
    ClosestPoint best;
    best.distance_sq = std::numeric_limits<double>::infinity();
    if (mesh_.triangles.empty()) return best;
    double best_b1 = 0, best_b2 = 0;
    int stack[128];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& node = nodes_[stack[--sp]];
        if (box_distance_sq(node.box, p) > best.distance_sq) continue;
        if (node.count > 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const int f = order_[i];
                const Tri& tri = mesh_.triangles[f];
                double b1, b2;
                const Vec3 q = closest_point_on_triangle(p, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]],
                                                         mesh_.vertices[tri[2]], b1, b2);
                const double d = (q - p).squaredNorm();
                if (d < best.distance_sq || (d == best.distance_sq && f < best.face)) {
                    best.distance_sq = d;
                    best.point = q;
                    best.face = f;
                    best_b1 = b1;
                    best_b2 = b2;
                }
            }
            continue;
        }
        const int l = node.left, r = node.left + 1;
        const double dl = box_distance_sq(nodes_[l].box, p), dr = box_distance_sq(nodes_[r].box, p);
        if (dl < dr) {
            stack[sp++] = r;
            stack[sp++] = l;
        } else {
            stack[sp++] = l;
            stack[sp++] = r;
        }
    }
    best.normal = interpolate_normal(mesh_, best.face, best_b1, best_b2);
    return best;
}

bool AccelIndex::check_structure() const {
    std::vector<int> seen(mesh_.triangles.size(), 0);
    for (const Node& n : nodes_) {
        if (n.count > 0) {
            for (int i = n.first; i < n.first + n.count; ++i) {
                const int f = order_[i];
                ++seen[f];
                for (int k : mesh_.triangles[f])
                    if (!n.box.contains(mesh_.vertices[k])) return false;
            }
        } else if (n.left >= 0) {
            for (int c : {n.left, n.left + 1}) {
                const Aabb& cb = nodes_[c].box;
                if (!n.box.contains(cb.lo) || !n.box.contains(cb.hi)) return false;
            }
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
}

std::optional<Hit> intersect_brute_force(const TriangleMesh& mesh, const Ray& ray, double t_min) {
    double best_t = std::numeric_limits<double>::infinity(), best_b1 = 0, best_b2 = 0;
    int best_face = -1;
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
        const Tri& tri = mesh.triangles[f];
        double t, b1, b2;
        if (intersect_triangle(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]], ray, t_min,
                               std::numeric_limits<double>::infinity(), t, b1, b2) &&
            t < best_t) {
            best_t = t;
            best_face = static_cast<int>(f);
            best_b1 = b1;
            best_b2 = b2;
        }
    }
    if (best_face < 0) return std::nullopt;
    Hit h;
    h.t = best_t;
    h.face = best_face;
    h.b1 = best_b1;
    h.b2 = best_b2;
    h.point = ray.origin + best_t * ray.dir;
    h.normal = interpolate_normal(mesh, best_face, best_b1, best_b2);
    return h;
}

ClosestPoint closest_point_brute_force(const TriangleMesh& mesh, const Vec3& p) {
    ClosestPoint best;
    best.distance_sq = std::numeric_limits<double>::infinity();
    double bb1 = 0, bb2 = 0;
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
        const Tri& tri = mesh.triangles[f];
        double b1, b2;
        const Vec3 q =
            closest_point_on_triangle(p, mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]], b1, b2);
        const double d = (q - p).squaredNorm();
        if (d < best.distance_sq) {
            best.distance_sq = d;
            best.point = q;
            best.face = static_cast<int>(f);
            bb1 = b1;
            bb2 = b2;
        }
    }
    if (best.face >= 0) best.normal = interpolate_normal(mesh, best.face, bb1, bb2);
    return best;
}

std::optional<Hit> SphereSurface::intersect(const Ray& ray, double t_min) const {
    const Vec3 oc = ray.origin - center_;
    const double b = oc.dot(ray.dir);
    const double c = oc.squaredNorm() - radius_ * radius_;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    // Numerically stable root pair.
    const double q = b > 0.0 ? -b - s : -b + s;
    double t0 = b > 0.0 ? q : c / q;
    double t1 = b > 0.0 ? c / q : q;
    if (q == 0.0) t0 = t1 = -b;
    if (t0 > t1) std::swap(t0, t1);
    double t;
    if (t0 > t_min) t = t0;
    else if (t1 > t_min) t = t1;
    else return std::nullopt;
    Hit h;
    h.t = t;
    h.point = ray.origin + t * ray.dir;
    h.normal = (h.point - center_).normalized();
    h.face = 0;
    return h;
}

}  // namespace refracta
