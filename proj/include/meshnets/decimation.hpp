#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "meshnets/mesh.hpp"
#include "meshnets/mesh_io.hpp"
#include "meshnets/sparse.hpp"

namespace meshnets {

// Symmetric 4x4 plane-quadric accumulator. error(v) = [v;1]^T Q [v;1].
struct Quadric {
    // upper triangle: a2 ab ac ad b2 bc bd c2 cd d2
    std::array<double, 10> m{};

    static Quadric from_plane(const Vec3& n, double d) {
        Quadric q;
        q.m = {n.x * n.x, n.x * n.y, n.x * n.z, n.x * d, n.y * n.y,
               n.y * n.z, n.y * d,   n.z * n.z, n.z * d, d * d};
        return q;
    }

    Quadric operator+(const Quadric& o) const {
        Quadric q;
        for (int i = 0; i < 10; ++i) q.m[i] = m[i] + o.m[i];
        return q;
    }
    Quadric& operator+=(const Quadric& o) {
        for (int i = 0; i < 10; ++i) m[i] += o.m[i];
        return *this;
    }

    double error(const Vec3& v) const {
        return m[0] * v.x * v.x + 2 * m[1] * v.x * v.y + 2 * m[2] * v.x * v.z + 2 * m[3] * v.x +
               m[4] * v.y * v.y + 2 * m[5] * v.y * v.z + 2 * m[6] * v.y +
               m[7] * v.z * v.z + 2 * m[8] * v.z + m[9];
    }
};

// Sum of incident face plane quadrics per vertex (unit plane normals).
inline std::vector<Quadric> vertex_quadrics(const TriMesh& mesh) {
    std::vector<Quadric> q(mesh.vertex_count());
    for (int f = 0; f < mesh.face_count(); ++f) {
        Vec3 n = face_normal(mesh, f);
        double len = norm(n);
        if (len <= 0.0)
            throw std::runtime_error("zero-area face " + std::to_string(f));
        n = n / len;
        double d = -dot(n, mesh.vertices[mesh.faces[f][0]]);
        Quadric fq = Quadric::from_plane(n, d);
        for (int k = 0; k < 3; ++k) q[mesh.faces[f][k]] += fq;
    }
    return q;
}

struct CollapseResult {
    double cost = 0.0;
    Vec3 position;
};

// argmin of [v;1]^T (Q1+Q2) [v;1] via the 3x3 normal equations; near-singular
// systems fall back to the best of the two endpoints and their midpoint.
inline CollapseResult collapse_cost(const Quadric& q1, const Quadric& q2, const Vec3& p1,
                                    const Vec3& p2) {
    Quadric q = q1 + q2;
    const double a2 = q.m[0], ab = q.m[1], ac = q.m[2], ad = q.m[3];
    const double b2 = q.m[4], bc = q.m[5], bd = q.m[6];
    const double c2 = q.m[7], cd = q.m[8];
    double det = a2 * (b2 * c2 - bc * bc) - ab * (ab * c2 - bc * ac) + ac * (ab * bc - b2 * ac);
    double s = 0.0;
    for (double e : {a2, ab, ac, b2, bc, c2}) s = std::max(s, std::abs(e));
    CollapseResult r;
    if (std::abs(det) > 1e-10 * s * s * s && s > 0.0) {
        // Cramer's rule on A v = -(ad, bd, cd)
        const double rx = -ad, ry = -bd, rz = -cd;
        double dx = rx * (b2 * c2 - bc * bc) - ab * (ry * c2 - bc * rz) + ac * (ry * bc - b2 * rz);
        double dy = a2 * (ry * c2 - bc * rz) - rx * (ab * c2 - bc * ac) + ac * (ab * rz - ry * ac);
        double dz = a2 * (b2 * rz - ry * bc) - ab * (ab * rz - ry * ac) + rx * (ab * bc - b2 * ac);
        r.position = {dx / det, dy / det, dz / det};
        r.cost = q.error(r.position);
    } else {
        r.position = p1;
        r.cost = q.error(p1);
        for (const Vec3& cand : {p2, (p1 + p2) * 0.5}) {
            double c = q.error(cand);
            if (c < r.cost) {
                r.cost = c;
                r.position = cand;
            }
        }
    }
    return r;
}

struct Contraction {
    int u = 0, v = 0;  // representatives at contraction time, u < v
    double cost = 0.0;
};

struct DecimateResult {
    TriMesh mesh;
    std::shared_ptr<const Csr> down_map;  // coarse x fine, rows average clusters
    std::vector<Contraction> log;
};

namespace detail {

// cluster mean accumulated in ascending member order so that applying the
// uniform down-map row to the fine coordinates reproduces it bit-exactly
inline Vec3 cluster_mean(const std::vector<int>& members, const std::vector<Vec3>& fine) {
    const double w = 1.0 / static_cast<double>(members.size());
    Vec3 acc;
    for (int m : members) acc += fine[m] * w;
    return acc;
}

}  // namespace detail

// Quadric-error edge contraction down to `target` vertices. Contractions are
// restricted to existing edges; the cheapest valid edge goes first (ties by
// smaller (min,max) vertex index). A contraction is valid when it preserves
// edge-manifoldness (link condition, no duplicate faces) and flips no
// incident face normal by more than 90 degrees. The merged vertex sits at the
// arithmetic mean of its fine cluster, which is what the emitted down-map row
// reproduces; quadric-optimal positions drive the cost ordering only.
inline DecimateResult decimate(const TriMesh& mesh, int target) {
    const int n = mesh.vertex_count();
    if (target < 4 || target >= n)
        throw std::runtime_error("decimate: target must satisfy 4 <= target < N");
    for (int d : edge_face_degree(mesh))
        if (d > 2) throw std::runtime_error("decimate: mesh is not edge-manifold");

    std::vector<Quadric> quadric = vertex_quadrics(mesh);
    std::vector<Vec3> pos = mesh.vertices;
    std::vector<std::vector<int>> members(n);
    for (int i = 0; i < n; ++i) members[i] = {i};
    std::vector<std::set<int>> nbrs(n);
    for (const auto& e : mesh.edges) {
        nbrs[e.first].insert(e.second);
        nbrs[e.second].insert(e.first);
    }
    auto faces = mesh.faces;
    std::vector<char> face_alive(faces.size(), 1);
    std::vector<std::vector<int>> vertex_faces(n);
    for (std::size_t f = 0; f < faces.size(); ++f)
        for (int k = 0; k < 3; ++k) vertex_faces[faces[f][k]].push_back(static_cast<int>(f));
    std::vector<int> version(n, 0);
    std::vector<char> alive(n, 1);

    struct HeapEntry {
        double cost;
        int u, v;       // u < v
        int vu, vv;     // versions at push time
        bool operator>(const HeapEntry& o) const {
            if (cost != o.cost) return cost > o.cost;
            if (u != o.u) return u > o.u;
            return v > o.v;
        }
    };
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> heap;
    auto push_edge = [&](int u, int v) {
        if (u > v) std::swap(u, v);
        auto r = collapse_cost(quadric[u], quadric[v], pos[u], pos[v]);
        heap.push({r.cost, u, v, version[u], version[v]});
    };
    for (const auto& e : mesh.edges) push_edge(e.first, e.second);

    auto face_normal_at = [&](int f, const Vec3* override_pos, int override_a,
                              int override_b) -> Vec3 {
        Vec3 p[3];
        for (int k = 0; k < 3; ++k) {
            int vi = faces[f][k];
            p[k] = (override_pos && (vi == override_a || vi == override_b)) ? *override_pos
                                                                            : pos[vi];
        }
        return cross(p[1] - p[0], p[2] - p[0]);
    };

    int alive_count = n;
    DecimateResult result;
    while (alive_count > target) {
        if (heap.empty())
            throw std::runtime_error("decimate: target unreachable, achieved " +
                                     std::to_string(alive_count) + " vertices");
        HeapEntry e = heap.top();
        heap.pop();
        if (!alive[e.u] || !alive[e.v] || version[e.u] != e.vu || version[e.v] != e.vv) continue;
        const int u = e.u, v = e.v;

        // faces on the contracted edge and the link condition
        std::vector<int> shared_faces;
        std::set<int> opposite;
        for (int f : vertex_faces[u]) {
            if (!face_alive[f]) continue;
            const auto& fc = faces[f];
            bool has_v = fc[0] == v || fc[1] == v || fc[2] == v;
            if (!has_v) continue;
            shared_faces.push_back(f);
            for (int k = 0; k < 3; ++k)
                if (fc[k] != u && fc[k] != v) opposite.insert(fc[k]);
        }
        if (shared_faces.empty()) continue;
        std::set<int> common;
        std::set_intersection(nbrs[u].begin(), nbrs[u].end(), nbrs[v].begin(), nbrs[v].end(),
                              std::inserter(common, common.begin()));
        if (common != opposite) continue;

        // merged position = mean of the combined fine cluster
        std::vector<int> merged = members[u];
        merged.insert(merged.end(), members[v].begin(), members[v].end());
        std::sort(merged.begin(), merged.end());
        Vec3 p_new = detail::cluster_mean(merged, mesh.vertices);

        // normal-flip and degeneracy check on every surviving incident face
        bool ok = true;
        for (int w : {u, v}) {
            for (int f : vertex_faces[w]) {
                if (!face_alive[f]) continue;
                const auto& fc = faces[f];
                bool has_u = fc[0] == u || fc[1] == u || fc[2] == u;
                bool has_v = fc[0] == v || fc[1] == v || fc[2] == v;
                if (has_u && has_v) continue;  // dies with the contraction
                Vec3 before = face_normal_at(f, nullptr, -1, -1);
                Vec3 after = face_normal_at(f, &p_new, u, v);
                if (norm(after) <= 0.0 || dot(before, after) < 0.0) {
                    ok = false;
                    break;
                }
            }
            if (!ok) break;
        }
        if (!ok) continue;

        // commit: v merges into u
        result.log.push_back({u, v, e.cost});
        members[u] = std::move(merged);
        members[v].clear();
        pos[u] = p_new;
        quadric[u] += quadric[v];
        alive[v] = 0;
        --alive_count;
        for (int f : shared_faces) face_alive[f] = 0;
        for (int f : vertex_faces[v]) {
            if (!face_alive[f]) continue;
            for (int k = 0; k < 3; ++k)
                if (faces[f][k] == v) faces[f][k] = u;
            vertex_faces[u].push_back(f);
        }
        vertex_faces[v].clear();
        nbrs[u].erase(v);
        for (int w : nbrs[v]) {
            if (w == u) continue;
            nbrs[w].erase(v);
            nbrs[w].insert(u);
            nbrs[u].insert(w);
        }
        nbrs[v].clear();

        // adjacency changed for u and its whole new neighborhood: invalidate
        // their heap entries and push fresh ones (a candidate rejected
        // earlier can become valid again after a nearby contraction)
        ++version[v];
        ++version[u];
        for (int w : nbrs[u]) ++version[w];
        for (int w : nbrs[u]) {
            push_edge(u, w);
            for (int x : nbrs[w]) push_edge(w, x);
        }
    }

    // compact surviving vertices in original index order
    std::vector<int> coarse_id(n, -1);
    std::vector<Vec3> coarse_verts;
    std::vector<std::tuple<int, int, double>> trips;
    for (int i = 0; i < n; ++i) {
        if (!alive[i]) continue;
        int c = static_cast<int>(coarse_verts.size());
        coarse_id[i] = c;
        coarse_verts.push_back(pos[i]);
        const double w = 1.0 / static_cast<double>(members[i].size());
        for (int m : members[i]) trips.emplace_back(c, m, w);
    }
    std::vector<std::array<int, 3>> coarse_faces;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        if (!face_alive[f]) continue;
        coarse_faces.push_back({coarse_id[faces[f][0]], coarse_id[faces[f][1]], coarse_id[faces[f][2]]});
    }
    result.mesh = TriMesh::build(std::move(coarse_verts), std::move(coarse_faces));
    result.down_map = std::make_shared<const Csr>(
        Csr::from_triplets(static_cast<std::size_t>(target), static_cast<std::size_t>(n), trips));
    return result;
}

// Sequence of coarsened meshes plus the per-level pooling maps, all
// precomputed once on the template and reused for every sample.
struct PoolHierarchy {
    std::vector<TriMesh> levels;                        // fine to coarse
    std::vector<std::shared_ptr<const Csr>> down_maps;  // levels.size() - 1
};

inline PoolHierarchy build_hierarchy(const TriMesh& templ, const std::vector<double>& factors) {
    PoolHierarchy h;
    h.levels.push_back(templ);
    for (double f : factors) {
        if (!(f > 0.0 && f < 1.0))
            throw std::runtime_error("build_hierarchy: factors must lie in (0,1)");
        const TriMesh& cur = h.levels.back();
        int target = static_cast<int>(std::floor(cur.vertex_count() * f));
        auto res = decimate(cur, target);
        h.levels.push_back(std::move(res.mesh));
        h.down_maps.push_back(std::move(res.down_map));
    }
    return h;
}

inline void save_hierarchy(const PoolHierarchy& h, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (std::size_t l = 0; l < h.levels.size(); ++l)
        save_mesh(h.levels[l], (fs::path(dir) / ("level_" + std::to_string(l) + ".off")).string());
    for (std::size_t l = 0; l < h.down_maps.size(); ++l) {
        std::ofstream out(fs::path(dir) / ("down_" + std::to_string(l) + ".txt"));
        const Csr& m = *h.down_maps[l];
        for (std::size_t r = 0; r < m.rows; ++r)
            for (std::size_t p = m.indptr[r]; p < m.indptr[r + 1]; ++p)
                out << r << ' ' << m.indices[p] << ' ' << detail::fmt_double(m.values[p]) << '\n';
        if (!out) throw std::runtime_error("write failed under " + dir);
    }
}

inline PoolHierarchy load_hierarchy(const std::string& dir) {
    namespace fs = std::filesystem;
    PoolHierarchy h;
    for (std::size_t l = 0;; ++l) {
        auto mesh_path = fs::path(dir) / ("level_" + std::to_string(l) + ".off");
        if (!fs::exists(mesh_path)) break;
        h.levels.push_back(load_mesh(mesh_path.string()));
    }
    if (h.levels.empty()) throw std::runtime_error("no hierarchy levels under " + dir);
    for (std::size_t l = 0; l + 1 < h.levels.size(); ++l) {
        std::ifstream in(fs::path(dir) / ("down_" + std::to_string(l) + ".txt"));
        if (!in) throw std::runtime_error("missing down-map " + std::to_string(l) + " under " + dir);
        std::vector<std::tuple<int, int, double>> trips;
        int r, c;
        double w;
        while (in >> r >> c >> w) trips.emplace_back(r, c, w);
        h.down_maps.push_back(std::make_shared<const Csr>(Csr::from_triplets(
            static_cast<std::size_t>(h.levels[l + 1].vertex_count()),
            static_cast<std::size_t>(h.levels[l].vertex_count()), std::move(trips))));
    }
    return h;
}

}  // namespace meshnets
