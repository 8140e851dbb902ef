#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "meshnets/mesh.hpp"
#include "meshnets/mesh_io.hpp"
#include "meshnets/primitives.hpp"
#include "meshnets/rng.hpp"

using namespace meshnets;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    auto p = fs::temp_directory_path() / "meshnets_mesh_tests";
    fs::create_directories(p);
    return p;
}

std::string write_text(const std::string& name, const std::string& body) {
    auto p = scratch_dir() / name;
    std::ofstream out(p);
    out << body;
    return p.string();
}

TriMesh single_triangle() {
    return TriMesh::build({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
}

double signed_volume(const TriMesh& m) {
    double vol = 0.0;
    for (const auto& f : m.faces)
        vol += dot(m.vertices[f[0]], cross(m.vertices[f[1]], m.vertices[f[2]]));
    return vol / 6.0;
}

}  // namespace

TEST_CASE("OFF single triangle", "[mesh]") {
    auto path = write_text("tri.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    TriMesh m = load_mesh(path, MeshFormat::Off);
    CHECK(m.vertex_count() == 3);
    CHECK(m.face_count() == 1);
    CHECK(m.edge_count() == 3);
}

TEST_CASE("OFF regular tetrahedron is K4", "[mesh]") {
    auto t = tetrahedron();
    auto path = (scratch_dir() / "tet.off").string();
    save_mesh(t, path);
    TriMesh m = load_mesh(path);
    REQUIRE(m.vertex_count() == 4);
    CHECK(m.face_count() == 4);
    CHECK(m.edge_count() == 6);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(m.adjacent(i, j) == (i != j));
}

TEST_CASE("icosahedron satisfies Euler's formula", "[mesh]") {
    auto path = (scratch_dir() / "ico.off").string();
    save_mesh(icosahedron(), path);
    TriMesh m = load_mesh(path);
    CHECK(m.vertex_count() == 12);
    CHECK(m.face_count() == 20);
    CHECK(m.edge_count() == 30);
    CHECK(m.vertex_count() - m.edge_count() + m.face_count() == 2);
    CHECK(signed_volume(m) > 0.0);  // outward counter-clockwise winding
}

TEST_CASE("primitive meshes are closed manifolds", "[mesh]") {
    for (const TriMesh& m : {tetrahedron(), octahedron(), icosahedron(), icosphere(2)}) {
        auto r = validate(m);
        CHECK(r.is_edge_manifold);
        CHECK(r.is_closed);
        CHECK(r.boundary_edge_count == 0);
        CHECK(r.connected_components == 1);
        CHECK(m.vertex_count() - m.edge_count() + m.face_count() == 2);
        CHECK(2 * m.edge_count() == 3 * m.face_count());
        CHECK(signed_volume(m) > 0.0);
    }
    CHECK(icosphere(3).vertex_count() == 642);
    CHECK(icosphere(3).face_count() == 1280);
}

TEST_CASE("validate reports boundary and non-manifold cases", "[mesh]") {
    auto r1 = validate(single_triangle());
    CHECK_FALSE(r1.is_closed);
    CHECK(r1.boundary_edge_count == 3);
    CHECK(r1.is_edge_manifold);
    CHECK(r1.connected_components == 1);

    // three triangles glued to one shared edge
    TriMesh m = TriMesh::build({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}},
                               {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}});
    auto r2 = validate(m);
    CHECK_FALSE(r2.is_edge_manifold);
    CHECK_THROWS_WITH(edge_face_topology(m), Catch::Matchers::ContainsSubstring("non-manifold"));
}

TEST_CASE("edge_face_topology neighbor structure", "[mesh]") {
    SECTION("tetrahedron: 4 distinct neighbors per edge") {
        auto m = tetrahedron();
        auto topo = edge_face_topology(m);
        for (int e = 0; e < m.edge_count(); ++e) {
            const auto& nb = topo.neighbors[e];
            std::set<int> uniq(nb.begin(), nb.end());
            CHECK(uniq.size() == 4);
            CHECK(uniq.count(-1) == 0);
            CHECK(uniq.count(e) == 0);
        }
    }
    SECTION("single triangle: 2 neighbors, 2 absent slots") {
        auto topo = edge_face_topology(single_triangle());
        for (const auto& nb : topo.neighbors) {
            CHECK(nb[0] >= 0);
            CHECK(nb[1] >= 0);
            CHECK(nb[2] == -1);
            CHECK(nb[3] == -1);
        }
    }
    SECTION("two-triangle quad: diagonal sees the 4 boundary edges") {
        TriMesh m = TriMesh::build({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}},
                                   {{0, 1, 2}, {0, 2, 3}});
        int diag = m.edge_index(0, 2);
        auto topo = edge_face_topology(m);
        std::set<int> nb(topo.neighbors[diag].begin(), topo.neighbors[diag].end());
        std::set<int> expect = {m.edge_index(0, 1), m.edge_index(1, 2), m.edge_index(2, 3),
                                m.edge_index(0, 3)};
        CHECK(nb == expect);
    }
    SECTION("winding order: neighbors follow the face loop after the shared edge") {
        // single CCW triangle (0,1,2); edge (0,1) is traversed 0->1 by the face,
        // so its in-face neighbors are (1,2) then (2,0)
        auto m = single_triangle();
        auto topo = edge_face_topology(m);
        int e01 = m.edge_index(0, 1);
        CHECK(topo.neighbors[e01][0] == m.edge_index(1, 2));
        CHECK(topo.neighbors[e01][1] == m.edge_index(2, 0));
    }
}

TEST_CASE("loader errors carry line numbers", "[mesh]") {
    auto quad = write_text("quad.off", "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
    CHECK_THROWS_WITH(load_mesh(quad), Catch::Matchers::ContainsSubstring("non-triangular") &&
                                           Catch::Matchers::ContainsSubstring(":7"));

    auto bad = write_text("bad.off", "OFF\n3 1 0\n0 0 0\n1 0\n0 1 0\n3 0 1 2\n");
    CHECK_THROWS_WITH(load_mesh(bad), Catch::Matchers::ContainsSubstring(":4"));

    auto oob = write_text("oob.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 9\n");
    CHECK_THROWS_WITH(load_mesh(oob), Catch::Matchers::ContainsSubstring("out of range"));

    auto quad_obj = write_text("quad.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    CHECK_THROWS_WITH(load_mesh(quad_obj), Catch::Matchers::ContainsSubstring("non-triangular"));

    auto bin_ply = write_text("bin.ply",
                              "ply\nformat binary_little_endian 1.0\nelement vertex 0\n"
                              "element face 0\nproperty list uchar int vertex_indices\nend_header\n");
    CHECK_THROWS_WITH(load_mesh(bin_ply), Catch::Matchers::ContainsSubstring("ascii"));
}

TEST_CASE("obj faces with slash forms reference vertices", "[mesh]") {
    auto p = write_text("slash.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n");
    TriMesh m = load_mesh(p);
    CHECK(m.face_count() == 1);
    CHECK(m.faces[0] == std::array<int, 3>{0, 1, 2});
}

TEST_CASE("round trip preserves coordinates and face lists", "[mesh]") {
    Rng rng(411);
    TriMesh m = icosphere(2);
    for (auto& v : m.vertices) v += Vec3{rng.normal(0, 0.05), rng.normal(0, 0.05), rng.normal(0, 0.05)};

    for (auto [fmt, name] : {std::pair{MeshFormat::Off, "rt.off"},
                             std::pair{MeshFormat::Obj, "rt.obj"},
                             std::pair{MeshFormat::PlyAscii, "rt.ply"}}) {
        auto path = (scratch_dir() / name).string();
        save_mesh(m, path, fmt);
        TriMesh back = load_mesh(path, fmt);
        REQUIRE(back.vertex_count() == m.vertex_count());
        REQUIRE(back.faces == m.faces);
        for (int i = 0; i < m.vertex_count(); ++i)
            CHECK(norm(back.vertices[i] - m.vertices[i]) < 1e-9);
    }
}

TEST_CASE("edge set is independent of face order", "[mesh]") {
    Rng rng(7);
    TriMesh m = icosphere(1);
    auto faces = m.faces;
    rng.shuffle(faces);
    TriMesh p = TriMesh::build(m.vertices, faces);
    CHECK(p.edges == m.edges);
}

TEST_CASE("fix_winding repairs a flipped face and detects mobius strips", "[mesh]") {
    TriMesh ico = icosahedron();
    auto faces = ico.faces;
    std::swap(faces[4][0], faces[4][1]);
    TriMesh broken = TriMesh::build(ico.vertices, faces);
    TriMesh fixed = fix_winding(broken);
    // consistent winding: every edge traversed once in each direction
    auto topo = edge_face_topology(fixed);
    for (int e = 0; e < fixed.edge_count(); ++e) {
        CHECK(topo.faces[e][0] >= 0);
        CHECK(topo.faces[e][1] >= 0);
    }
    CHECK(std::abs(signed_volume(fixed)) == Catch::Approx(std::abs(signed_volume(ico))));

    // minimal mobius band triangulation is not orientable
    TriMesh mobius = TriMesh::build(
        {{1, 0, 0}, {0.31, 0.95, 0.1}, {-0.81, 0.59, -0.1}, {-0.81, -0.59, 0.1}, {0.31, -0.95, -0.1}},
        {{0, 1, 2}, {1, 2, 3}, {2, 3, 4}, {3, 4, 0}, {4, 0, 1}});
    CHECK_THROWS_WITH(fix_winding(mobius), Catch::Matchers::ContainsSubstring("orientable"));
}

TEST_CASE("edge attribute sidecar round trip", "[mesh]") {
    auto m = tetrahedron();
    std::vector<double> vals(m.edge_count());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.25 * static_cast<double>(i);
    auto path = (scratch_dir() / "tet.edgeattr").string();
    save_edge_attributes(m.edges, vals, path);
    auto rows = load_edge_attributes(path);
    REQUIRE(rows.size() == vals.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].first == m.edges[i]);
        CHECK(rows[i].second == Catch::Approx(vals[i]));
    }
}
