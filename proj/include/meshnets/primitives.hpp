#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "meshnets/mesh.hpp"

namespace meshnets {

// Unit icosahedron, counter-clockwise faces viewed from outside.
inline TriMesh icosahedron() {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& p : v) p = normalized(p);
    std::vector<std::array<int, 3>> f = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };
    return TriMesh::build(std::move(v), std::move(f));
}

// Unit icosphere: `subdivisions` rounds of midpoint subdivision, vertices
// projected back to the sphere. Level 3 gives 642 vertices / 1280 faces.
inline TriMesh icosphere(int subdivisions) {
    TriMesh m = icosahedron();
    for (int s = 0; s < subdivisions; ++s) {
        std::vector<Vec3> verts = m.vertices;
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            int idx = static_cast<int>(verts.size());
            verts.push_back(normalized((verts[a] + verts[b]) * 0.5));
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> faces;
        faces.reserve(m.faces.size() * 4);
        for (const auto& f : m.faces) {
            int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
            faces.push_back({f[0], a, c});
            faces.push_back({f[1], b, a});
            faces.push_back({f[2], c, b});
            faces.push_back({a, b, c});
        }
        m = TriMesh::build(std::move(verts), std::move(faces));
    }
    return m;
}

inline TriMesh tetrahedron() {
    std::vector<Vec3> v = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    for (auto& p : v) p = normalized(p);
    std::vector<std::array<int, 3>> f = {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}};
    return TriMesh::build(std::move(v), std::move(f));
}

inline TriMesh octahedron() {
    std::vector<Vec3> v = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::vector<std::array<int, 3>> f = {
        {0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
        {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5},
    };
    return TriMesh::build(std::move(v), std::move(f));
}

// Planar grid in the z=0 plane, rows x cols vertices, cells split along the
// (r,c)-(r+1,c+1) diagonal. Counter-clockwise seen from +z; interior vertices
// have degree 6.
inline TriMesh planar_grid(int rows, int cols, double spacing = 1.0) {
    std::vector<Vec3> v;
    v.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            v.push_back({c * spacing, r * spacing, 0.0});
    std::vector<std::array<int, 3>> f;
    auto at = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r + 1 < rows; ++r) {
        for (int c = 0; c + 1 < cols; ++c) {
            int a = at(r, c), b = at(r, c + 1), d = at(r + 1, c), e = at(r + 1, c + 1);
            f.push_back({a, b, e});
            f.push_back({a, e, d});
        }
    }
    return TriMesh::build(std::move(v), std::move(f));
}

}  // namespace meshnets
