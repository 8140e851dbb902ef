#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "meshnets/vec3.hpp"

namespace meshnets {

// Triangle mesh with derived edge list and vertex adjacency. Construct via
// TriMesh::build(); treat as immutable afterwards (safe to share across threads).
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;       // counter-clockwise convention
    std::vector<std::pair<int, int>> edges;      // unique pairs (u < v), lexicographic
    std::vector<std::vector<int>> neighbors;     // sorted adjacency lists

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
    int edge_count() const { return static_cast<int>(edges.size()); }

    bool adjacent(int i, int j) const {
        const auto& n = neighbors[i];
        return std::binary_search(n.begin(), n.end(), j);
    }

    // index into edges, or -1
    int edge_index(int u, int v) const {
        if (u > v) std::swap(u, v);
        auto it = edge_lookup_.find(edge_key(u, v));
        return it == edge_lookup_.end() ? -1 : it->second;
    }

    static TriMesh build(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> faces) {
        TriMesh m;
        m.vertices = std::move(vertices);
        m.faces = std::move(faces);
        const int n = m.vertex_count();
        for (std::size_t f = 0; f < m.faces.size(); ++f) {
            const auto& fc = m.faces[f];
            for (int k = 0; k < 3; ++k) {
                if (fc[k] < 0 || fc[k] >= n)
                    throw std::runtime_error("face " + std::to_string(f) + ": vertex index " +
                                             std::to_string(fc[k]) + " out of range");
            }
            if (fc[0] == fc[1] || fc[1] == fc[2] || fc[0] == fc[2])
                throw std::runtime_error("face " + std::to_string(f) + ": repeated vertex");
        }
        m.derive_topology();
        return m;
    }

    void derive_topology() {
        edges.clear();
        edge_lookup_.clear();
        neighbors.assign(vertices.size(), {});
        for (const auto& f : faces) {
            for (int k = 0; k < 3; ++k) {
                int u = f[k], v = f[(k + 1) % 3];
                if (u > v) std::swap(u, v);
                std::uint64_t key = edge_key(u, v);
                if (edge_lookup_.find(key) == edge_lookup_.end()) {
                    edge_lookup_.emplace(key, 0);  // placeholder, reindexed below
                    edges.emplace_back(u, v);
                }
            }
        }
        std::sort(edges.begin(), edges.end());
        for (std::size_t i = 0; i < edges.size(); ++i)
            edge_lookup_[edge_key(edges[i].first, edges[i].second)] = static_cast<int>(i);
        for (const auto& e : edges) {
            neighbors[e.first].push_back(e.second);
            neighbors[e.second].push_back(e.first);
        }
        for (auto& n : neighbors) std::sort(n.begin(), n.end());
    }

private:
    std::unordered_map<std::uint64_t, int> edge_lookup_;

    static std::uint64_t edge_key(int u, int v) {
        return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint32_t>(v);
    }
};

struct MeshReport {
    bool is_edge_manifold = true;   // every edge borders <= 2 faces
    bool is_closed = true;          // every edge borders exactly 2 faces
    int boundary_edge_count = 0;
    int connected_components = 0;
};

// Faces incident to each edge in face order of appearance (-1 when absent).
inline std::vector<std::array<int, 2>> edge_incident_faces(const TriMesh& mesh) {
    std::vector<std::array<int, 2>> inc(mesh.edge_count(), {-1, -1});
    std::vector<int> count(mesh.edge_count(), 0);
    for (int f = 0; f < mesh.face_count(); ++f) {
        const auto& fc = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            int e = mesh.edge_index(fc[k], fc[(k + 1) % 3]);
            if (count[e] < 2) inc[e][count[e]] = f;
            ++count[e];
        }
    }
    return inc;
}

inline std::vector<int> edge_face_degree(const TriMesh& mesh) {
    std::vector<int> count(mesh.edge_count(), 0);
    for (const auto& fc : mesh.faces)
        for (int k = 0; k < 3; ++k) ++count[mesh.edge_index(fc[k], fc[(k + 1) % 3])];
    return count;
}

inline MeshReport validate(const TriMesh& mesh) {
    MeshReport r;
    auto deg = edge_face_degree(mesh);
    for (int d : deg) {
        if (d > 2) r.is_edge_manifold = false;
        if (d != 2) r.is_closed = false;
        if (d == 1) ++r.boundary_edge_count;
    }
    // components over vertex adjacency; isolated vertices count as components
    const int n = mesh.vertex_count();
    std::vector<char> seen(n, 0);
    for (int s = 0; s < n; ++s) {
        if (seen[s]) continue;
        ++r.connected_components;
        std::queue<int> q;
        q.push(s);
        seen[s] = 1;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int v : mesh.neighbors[u])
                if (!seen[v]) { seen[v] = 1; q.push(v); }
        }
    }
    return r;
}

// Per-edge connectivity used by edge-based convolution: the (up to) two
// incident faces and the four neighbor edges. For an edge (u,v), face_a is the
// face whose winding traverses u->v; its two other edges follow the winding
// after the shared edge. Absent slots hold -1.
struct EdgeTopology {
    std::vector<std::array<int, 2>> faces;      // [face_a, face_b]
    std::vector<std::array<int, 4>> neighbors;  // (a, b) from face_a, (c, d) from face_b
};

inline EdgeTopology edge_face_topology(const TriMesh& mesh) {
    EdgeTopology topo;
    const int ne = mesh.edge_count();
    topo.faces.assign(ne, {-1, -1});
    topo.neighbors.assign(ne, {-1, -1, -1, -1});
    std::vector<int> count(ne, 0);
    for (int f = 0; f < mesh.face_count(); ++f) {
        const auto& fc = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            int a = fc[k], b = fc[(k + 1) % 3];
            int e = mesh.edge_index(a, b);
            if (count[e] >= 2) {
                const auto& ev = mesh.edges[e];
                throw std::runtime_error("non-manifold edge (" + std::to_string(ev.first) + "," +
                                         std::to_string(ev.second) + ") borders more than 2 faces");
            }
            // slot 0 iff the face traverses the edge as (min -> max); with
            // inconsistent winding the second face falls into the free slot
            int slot = (a < b) ? 0 : 1;
            if (topo.faces[e][slot] != -1) slot = 1 - slot;
            topo.faces[e][slot] = f;
            int c = fc[(k + 2) % 3];
            // continuing the winding after a->b: edges (b,c) then (c,a)
            topo.neighbors[e][slot * 2 + 0] = mesh.edge_index(b, c);
            topo.neighbors[e][slot * 2 + 1] = mesh.edge_index(c, a);
            ++count[e];
        }
    }
    // boundary edges: keep the present face's pair in slots 0/1
    for (int e = 0; e < ne; ++e) {
        if (topo.faces[e][0] == -1 && topo.faces[e][1] != -1) {
            topo.faces[e] = {topo.faces[e][1], -1};
            topo.neighbors[e] = {topo.neighbors[e][2], topo.neighbors[e][3], -1, -1};
        }
    }
    return topo;
}

// Propagates a consistent winding across shared edges (BFS per component,
// first face kept as-is). Not applied implicitly by any loader. Throws on
// non-orientable input.
inline TriMesh fix_winding(const TriMesh& mesh) {
    auto inc = edge_incident_faces(mesh);
    auto deg = edge_face_degree(mesh);
    for (std::size_t e = 0; e < deg.size(); ++e)
        if (deg[e] > 2)
            throw std::runtime_error("fix_winding requires an edge-manifold mesh");

    auto faces = mesh.faces;
    auto traverses = [&](const std::array<int, 3>& fc, int u, int v) {
        for (int k = 0; k < 3; ++k)
            if (fc[k] == u && fc[(k + 1) % 3] == v) return true;
        return false;
    };

    std::vector<char> visited(faces.size(), 0);
    for (std::size_t start = 0; start < faces.size(); ++start) {
        if (visited[start]) continue;
        std::queue<int> q;
        q.push(static_cast<int>(start));
        visited[start] = 1;
        while (!q.empty()) {
            int f = q.front();
            q.pop();
            const auto fc = faces[f];
            for (int k = 0; k < 3; ++k) {
                int u = fc[k], v = fc[(k + 1) % 3];
                int e = mesh.edge_index(u, v);
                int other = inc[e][0] == f ? inc[e][1] : inc[e][0];
                if (other < 0) continue;
                bool same_dir = traverses(faces[other], u, v);
                if (!visited[other]) {
                    if (same_dir) std::swap(faces[other][1], faces[other][2]);
                    visited[other] = 1;
                    q.push(other);
                } else if (same_dir) {
                    throw std::runtime_error("mesh is not orientable");
                }
            }
        }
    }
    return TriMesh::build(mesh.vertices, std::move(faces));
}

inline Vec3 face_normal(const TriMesh& mesh, int f) {
    const auto& fc = mesh.faces[f];
    return cross(mesh.vertices[fc[1]] - mesh.vertices[fc[0]],
                 mesh.vertices[fc[2]] - mesh.vertices[fc[0]]);
}

inline double face_area(const TriMesh& mesh, int f) { return 0.5 * norm(face_normal(mesh, f)); }

}  // namespace meshnets
