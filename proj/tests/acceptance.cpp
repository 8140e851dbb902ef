// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. The end-to-end benchmark runs the five default models on
// the default synthetic dataset and checks accuracy, the separability floor,
// the parameter-count ordering, the per-epoch time orderings, and the
// edge-importance direction.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "meshnets/dataset.hpp"
#include "meshnets/decimation.hpp"
#include "meshnets/edge_net.hpp"
#include "meshnets/face_net.hpp"
#include "meshnets/models.hpp"
#include "meshnets/primitives.hpp"
#include "meshnets/spectral.hpp"
#include "meshnets/spiral.hpp"

using namespace meshnets;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-scale, scale);
    return Tensor::from(std::move(v), std::move(shape));
}

TriMesh jittered(TriMesh m, Rng& rng, double amp = 0.08) {
    for (auto& v : m.vertices)
        v += Vec3{rng.normal(0, amp), rng.normal(0, amp), rng.normal(0, amp)};
    return m;
}

// ---------------------------------------------------------------- gradients

void gradient_suite() {
    const double tol = 1e-6;
    const int instances = 20;
    double worst = 0.0;
    std::string worst_op = "none";
    auto t0 = now_seconds();

    auto track = [&](const char* op, double err) {
        if (err > worst) {
            worst = err;
            worst_op = op;
        }
    };

    for (int i = 0; i < instances; ++i) {
        Rng rng(1000 + i);

        {  // ChebConv
            auto mesh = jittered(octahedron(), rng);
            auto lap = normalized_laplacian(mesh.neighbors);
            ChebConvLayer layer("c", 2 + i % 4, 2, 3, rng);
            Tensor x = random_tensor({6, 2}, rng);
            std::vector<Tensor*> leaves{&x, &layer.bias.value};
            for (auto& th : layer.theta) leaves.push_back(&th.value);
            track("cheb_conv", gradcheck::check([&] {
                      Tensor y = cheb_conv(layer, lap, x);
                      return ops::reduce_sum_all(ops::mul(y, y));
                  }, leaves).max_rel_err);
        }
        {  // spiral_conv
            auto mesh = icosahedron();
            auto table = build_spirals(mesh, 6 + i % 4);
            SpiralConvLayer layer("s", table.length, 2, 3, rng);
            Tensor x = random_tensor({12, 2}, rng);
            track("spiral_conv", gradcheck::check([&] {
                      Tensor y = spiral_conv(layer, x, table);
                      return ops::reduce_sum_all(ops::mul(y, y));
                  }, {&x, &layer.weight.value, &layer.bias.value}).max_rel_err);
        }
        {  // edge_conv
            EdgeFeatureMesh efm(icosahedron());
            EdgeConvLayer layer("e", 2, 3, rng);
            Tensor x = random_tensor({30, 2}, rng);
            track("edge_conv", gradcheck::check([&] {
                      Tensor y = edge_conv(layer, x, efm);
                      return ops::reduce_sum_all(ops::mul(y, y));
                  }, {&x, &layer.kernel.value, &layer.bias.value}).max_rel_err);
        }
        {  // spatial_descriptor
            auto fd = face_data(jittered(icosahedron(), rng, 0.03));
            Mlp mlp("sd", {3, 6, 4}, rng);
            std::vector<Tensor*> leaves;
            for (auto& l : mlp.layers) {
                leaves.push_back(&l.weight.value);
                leaves.push_back(&l.bias.value);
            }
            track("spatial_descriptor", gradcheck::check([&] {
                      Tensor y = spatial_descriptor(fd.centers, mlp);
                      return ops::reduce_sum_all(ops::mul(y, y));
                  }, leaves).max_rel_err);
        }
        {  // face_rotate_conv
            auto fd = face_data(jittered(icosahedron(), rng, 0.03));
            Mlp pair("fp", {6, 5}, rng), out("fo", {5, 3}, rng);
            std::vector<Tensor*> leaves;
            for (auto* m : {&pair, &out})
                for (auto& l : m->layers) {
                    leaves.push_back(&l.weight.value);
                    leaves.push_back(&l.bias.value);
                }
            track("face_rotate_conv", gradcheck::check([&] {
                      Tensor y = face_rotate_conv(fd.corners, pair, out);
                      return ops::reduce_sum_all(ops::mul(y, y));
                  }, leaves).max_rel_err);
        }
        {  // face_kernel_correlation
            auto fd = face_data(jittered(icosahedron(), rng, 0.03));
            KernelCorrelationLayer layer("kc", 2, 2 + i % 3, 0.25 + 0.05 * (i % 4), rng);
            track("face_kernel_correlation", gradcheck::check([&] {
                      Tensor y = face_kernel_correlation(fd.normals, fd.neighbors, layer);
                      return ops::reduce_sum_all(ops::mul(y, y));
                  }, {&layer.angles.value}).max_rel_err);
        }
        {  // mesh_conv
            auto fd = face_data(icosahedron());
            MeshConvLayer layer("mc", 3, 2, 4, 3, rng);
            Tensor sp = random_tensor({20, 3}, rng), st = random_tensor({20, 2}, rng);
            track("mesh_conv", gradcheck::check([&] {
                      auto out = mesh_conv(sp, st, fd.neighbors, layer);
                      return ops::add(ops::reduce_sum_all(ops::mul(out.spatial, out.spatial)),
                                      ops::reduce_sum_all(ops::mul(out.structural, out.structural)));
                  }, {&sp, &st}).max_rel_err);
        }
        {  // Mlp
            Mlp mlp("m", {4, 6, 5, 3}, rng);
            Tensor x = random_tensor({3, 4}, rng);
            std::vector<Tensor*> leaves{&x};
            for (auto& l : mlp.layers) {
                leaves.push_back(&l.weight.value);
                leaves.push_back(&l.bias.value);
            }
            track("mlp", gradcheck::check([&] {
                      Tensor y = mlp.forward(x);
                      return ops::reduce_sum_all(ops::mul(y, y));
                  }, leaves).max_rel_err);
        }
        {  // cross-entropy loss
            Tensor logits = random_tensor({4, 3}, rng, 2.0);
            std::vector<int> labels{static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3)),
                                    static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3))};
            track("cross_entropy", gradcheck::check([&] {
                      return ops::cross_entropy_softmax(logits, labels);
                  }, {&logits}).max_rel_err);
        }
    }
    double elapsed = now_seconds() - t0;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "9 operator families x %d instances, max rel err %.2e (tol 1e-6, worst %s), %.1fs "
                  "(limit 120s)",
                  instances, worst, worst_op.c_str(), elapsed);
    report("gradient-suite", worst < tol && elapsed < 120.0, buf);
}

// ------------------------------------------------------------------ oracles

bool qem_oracle_valid(const TriMesh& m, int u, int v) {
    std::vector<int> shared;
    std::set<int> opposite;
    for (int f = 0; f < m.face_count(); ++f) {
        const auto& fc = m.faces[f];
        bool hu = fc[0] == u || fc[1] == u || fc[2] == u;
        bool hv = fc[0] == v || fc[1] == v || fc[2] == v;
        if (hu && hv) {
            shared.push_back(f);
            for (int k = 0; k < 3; ++k)
                if (fc[k] != u && fc[k] != v) opposite.insert(fc[k]);
        }
    }
    if (shared.empty()) return false;
    std::set<int> common;
    for (int w : m.neighbors[u])
        if (w != v && m.adjacent(v, w)) common.insert(w);
    if (common != opposite) return false;
    Vec3 p_new = (m.vertices[u] + m.vertices[v]) * 0.5;
    for (int f = 0; f < m.face_count(); ++f) {
        const auto& fc = m.faces[f];
        bool hu = fc[0] == u || fc[1] == u || fc[2] == u;
        bool hv = fc[0] == v || fc[1] == v || fc[2] == v;
        if ((hu && hv) || (!hu && !hv)) continue;
        Vec3 before = face_normal(m, f);
        Vec3 p[3];
        for (int k = 0; k < 3; ++k)
            p[k] = (fc[k] == u || fc[k] == v) ? p_new : m.vertices[fc[k]];
        Vec3 after = cross(p[1] - p[0], p[2] - p[0]);
        if (norm(after) <= 0.0 || dot(before, after) < 0.0) return false;
    }
    return true;
}

bool meshcnn_oracle_valid(const TriMesh& m, int e) {
    auto topo = edge_face_topology(m);
    int f1 = topo.faces[e][0], f2 = topo.faces[e][1];
    if (f1 < 0 || f2 < 0) return false;
    auto [u, v] = m.edges[e];
    auto third = [&](int f) {
        for (int k = 0; k < 3; ++k)
            if (m.faces[f][k] != u && m.faces[f][k] != v) return m.faces[f][k];
        return -1;
    };
    int p = third(f1), q = third(f2);
    if (p == q || p < 0 || q < 0) return false;
    std::set<int> common;
    for (int w : m.neighbors[u])
        if (w != v && m.adjacent(v, w)) common.insert(w);
    if (common != std::set<int>{p, q}) return false;
    auto count_outside = [&](int a, int b) {
        int cnt = 0;
        for (int f = 0; f < m.face_count(); ++f) {
            if (f == f1 || f == f2) continue;
            bool ha = false, hb = false;
            for (int k = 0; k < 3; ++k) {
                ha = ha || m.faces[f][k] == a;
                hb = hb || m.faces[f][k] == b;
            }
            if (ha && hb) ++cnt;
        }
        return cnt;
    };
    if (count_outside(u, p) + count_outside(v, p) > 2) return false;
    if (count_outside(u, q) + count_outside(v, q) > 2) return false;
    return true;
}

void oracle_suite() {
    // (a) ChebConv vs dense materialized polynomial
    {
        Rng rng(7001);
        double worst = 0.0;
        for (int trial = 0; trial < 12; ++trial) {
            const int n = 5 + static_cast<int>(rng.below(6));
            std::vector<std::vector<int>> nb(n);
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    if (rng.uniform() < 0.5) {
                        nb[i].push_back(j);
                        nb[j].push_back(i);
                    }
            for (int i = 0; i < n; ++i)
                if (nb[i].empty()) {
                    int j = (i + 1) % n;
                    nb[i].push_back(j);
                    nb[j].push_back(i);
                    std::sort(nb[j].begin(), nb[j].end());
                }
            auto lap = normalized_laplacian(nb);
            const std::size_t fin = 3, fout = 2, K = 4;
            ChebConvLayer layer("c", K, fin, fout, rng);
            Tensor x = random_tensor({static_cast<std::size_t>(n), fin}, rng);
            Tensor y = cheb_conv(layer, lap, x);

            std::vector<double> Ld(n * n, 0.0);
            for (std::size_t r = 0; r < lap.shifted->rows; ++r)
                for (std::size_t p = lap.shifted->indptr[r]; p < lap.shifted->indptr[r + 1]; ++p)
                    Ld[r * n + lap.shifted->indices[p]] = lap.shifted->values[p];
            std::vector<std::vector<double>> T(K);
            T[0].assign(n * n, 0.0);
            for (int i = 0; i < n; ++i) T[0][i * n + i] = 1.0;
            T[1] = Ld;
            for (std::size_t k = 2; k < K; ++k) {
                T[k].assign(n * n, 0.0);
                for (int i = 0; i < n; ++i)
                    for (int t = 0; t < n; ++t)
                        for (int j = 0; j < n; ++j)
                            T[k][i * n + j] += Ld[i * n + t] * T[k - 1][t * n + j];
                for (int i = 0; i < n * n; ++i) T[k][i] = 2.0 * T[k][i] - T[k - 2][i];
            }
            for (int i = 0; i < n; ++i)
                for (std::size_t o = 0; o < fout; ++o) {
                    double acc = layer.bias.value.data()[o];
                    for (std::size_t k = 0; k < K; ++k)
                        for (int t = 0; t < n; ++t)
                            for (std::size_t f = 0; f < fin; ++f)
                                acc += T[k][i * n + t] * x(t, f) * layer.theta[k].value(f, o);
                    worst = std::max(worst, std::abs(y(i, o) - acc));
                }
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf), "12 random graphs <= 10 vertices, max abs diff %.2e (tol 1e-9)",
                      worst);
        report("oracle-chebconv-dense", worst < 1e-9, buf);
    }

    // (b) first QEM contraction and first MeshCNN collapse vs exhaustive search
    {
        int qem_ok = 0, pool_ok = 0;
        const int seeds = 50;
        for (int seed = 1; seed <= seeds; ++seed) {
            Rng rng(seed);
            TriMesh m = (seed % 2 == 0) ? jittered(octahedron(), rng) : jittered(icosahedron(), rng);
            auto quad = vertex_quadrics(m);
            double best = 1e300;
            int bu = -1, bv = -1;
            for (const auto& [u, v] : m.edges) {
                if (!qem_oracle_valid(m, u, v)) continue;
                double c = collapse_cost(quad[u], quad[v], m.vertices[u], m.vertices[v]).cost;
                if (c < best) {
                    best = c;
                    bu = u;
                    bv = v;
                }
            }
            auto res = decimate(m, m.vertex_count() - 1);
            if (res.log.size() == 1 && res.log[0].u == bu && res.log[0].v == bv) ++qem_ok;

            const std::size_t ne = m.edge_count();
            Tensor x = random_tensor({ne, 3}, rng);
            std::vector<double> mag(ne);
            for (std::size_t e = 0; e < ne; ++e) {
                double s = 0;
                for (int j = 0; j < 3; ++j) s += x(e, j) * x(e, j);
                mag[e] = std::sqrt(s);
            }
            std::vector<int> order(ne);
            for (std::size_t i = 0; i < ne; ++i) order[i] = static_cast<int>(i);
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                if (mag[a] != mag[b]) return mag[a] < mag[b];
                return a < b;
            });
            int expect = -1;
            for (int e : order)
                if (meshcnn_oracle_valid(m, e)) {
                    expect = e;
                    break;
                }
            EdgeFeatureMesh efm(m);
            efm.edge_pool(x, static_cast<int>(ne) - 3);
            if (efm.history().size() == 1 && efm.history()[0].edge == expect) ++pool_ok;
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf), "QEM %d/%d, MeshCNN %d/%d first choices match exhaustive search",
                      qem_ok, seeds, pool_ok, seeds);
        report("oracle-first-choice", qem_ok == seeds && pool_ok == seeds, buf);
    }

    // (c) collapse_cost vs grid search
    {
        Rng rng(888);
        int tested = 0, ok = 0;
        while (tested < 10) {
            auto rand_quadric = [&] {
                Quadric q;
                for (int p = 0; p < 4; ++p) {
                    Vec3 n = normalized({rng.normal(), rng.normal(), rng.normal()});
                    Vec3 pt{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
                    q += Quadric::from_plane(n, -dot(n, pt));
                }
                return q;
            };
            Quadric q1 = rand_quadric(), q2 = rand_quadric();
            auto r = collapse_cost(q1, q2, {0.25, 0, 0}, {-0.25, 0, 0});
            if (std::abs(r.position.x) > 1.2 || std::abs(r.position.y) > 1.2 ||
                std::abs(r.position.z) > 1.2)
                continue;
            ++tested;
            const double lo = -1.5, hi = 1.5;
            const int steps = 61;
            const double h = (hi - lo) / (steps - 1);
            Quadric q = q1 + q2;
            double grid_min = 1e300;
            for (int i = 0; i < steps; ++i)
                for (int j = 0; j < steps; ++j)
                    for (int k = 0; k < steps; ++k)
                        grid_min = std::min(grid_min, q.error({lo + i * h, lo + j * h, lo + k * h}));
            double max_a = 0.0;
            for (int idx : {0, 1, 2, 4, 5, 7}) max_a = std::max(max_a, std::abs(q.m[idx]));
            if (r.cost <= grid_min + 1e-9 && grid_min - r.cost <= 3.0 * max_a * h * h + 1e-9) ++ok;
        }
        char buf[120];
        std::snprintf(buf, sizeof(buf), "%d/%d random pairs within grid resolution", ok, tested);
        report("oracle-collapse-cost-grid", ok == tested, buf);
    }
}

// --------------------------------------------------------------- invariance

void invariance_suite() {
    bool all = true;
    std::string detail;

    {  // edge features under rigid motion + uniform scale
        Rng rng(17);
        TriMesh base = icosphere(3);
        for (auto& v : base.vertices)
            v += Vec3{rng.normal(0, 0.03), rng.normal(0, 0.03), rng.normal(0, 0.03)};
        Tensor f0 = edge_input_features(base);
        Vec3 axis = normalized({0.3, -0.8, 0.5});
        double angle = 1.1, c = std::cos(angle), s = std::sin(angle);
        TriMesh moved = base;
        for (auto& v : moved.vertices) {
            Vec3 r = v * c + cross(axis, v) * s + axis * (dot(axis, v) * (1 - c));
            v = r * 7.3 + Vec3{4, -2, 7};
        }
        Tensor f1 = edge_input_features(moved);
        double worst = 0.0;
        for (std::size_t i = 0; i < f0.data().size(); ++i)
            worst = std::max(worst, std::abs(f0.data()[i] - f1.data()[i]));
        if (worst >= 1e-9) all = false;
        char buf[80];
        std::snprintf(buf, sizeof(buf), "edge-features rigid+scale max diff %.1e; ", worst);
        detail += buf;
    }
    {  // edge_conv face-pair swap, exact
        Rng rng(42);
        EdgeFeatureMesh efm(icosahedron());
        Tensor x = random_tensor({30, 3}, rng);
        std::vector<int> ia(30), ib(30), ic(30), id(30);
        for (int r = 0; r < 30; ++r) {
            auto nb = efm.neighbor_rows(r);
            ia[r] = nb[0];
            ib[r] = nb[1];
            ic[r] = nb[2];
            id[r] = nb[3];
        }
        bool exact = edge_symmetric_tuple(x, ia, ib, ic, id).data() ==
                     edge_symmetric_tuple(x, ic, id, ia, ib).data();
        if (!exact) all = false;
        detail += std::string("edge_conv swap ") + (exact ? "exact; " : "NOT exact; ");
    }
    {  // mesh_conv neighbor permutation, exact
        Rng rng(5);
        auto fd = face_data(icosahedron());
        MeshConvLayer layer("mc", 4, 3, 5, 6, rng);
        Tensor sp = random_tensor({20, 4}, rng), st = random_tensor({20, 3}, rng);
        auto out = mesh_conv(sp, st, fd.neighbors, layer);
        auto permuted = fd.neighbors;
        for (auto& nb : permuted) {
            std::swap(nb[0], nb[1]);
            std::swap(nb[1], nb[2]);
        }
        auto out2 = mesh_conv(sp, st, permuted, layer);
        bool exact = out.structural.data() == out2.structural.data();
        if (!exact) all = false;
        detail += std::string("mesh_conv permutation ") + (exact ? "exact; " : "NOT exact; ");
    }
    {  // ChebConv permutation equivariance
        Rng rng(555);
        auto mesh = icosahedron();
        const int n = mesh.vertex_count();
        auto lap = normalized_laplacian(mesh.neighbors);
        ChebConvLayer layer("c", 4, 3, 5, rng);
        Tensor x = random_tensor({static_cast<std::size_t>(n), 3}, rng);
        Tensor y = cheb_conv(layer, lap, x);
        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        std::vector<std::vector<int>> pnb(n);
        for (int i = 0; i < n; ++i)
            for (int j : mesh.neighbors[i]) pnb[perm[i]].push_back(perm[j]);
        for (auto& v : pnb) std::sort(v.begin(), v.end());
        std::vector<double> px(n * 3);
        for (int i = 0; i < n; ++i)
            for (int f = 0; f < 3; ++f) px[perm[i] * 3 + f] = x(i, f);
        Tensor py = cheb_conv(layer, normalized_laplacian(pnb),
                              Tensor::from(std::move(px), {static_cast<std::size_t>(n), 3}));
        double worst = 0.0;
        for (int i = 0; i < n; ++i)
            for (int o = 0; o < 5; ++o)
                worst = std::max(worst, std::abs(py(perm[i], o) - y(i, o)));
        if (worst >= 1e-9) all = false;
        char buf[80];
        std::snprintf(buf, sizeof(buf), "cheb equivariance max diff %.1e; ", worst);
        detail += buf;
    }
    {  // spiral determinism across rebuilds and deformed samples
        auto sphere = icosphere(2);
        auto t1 = build_spirals(sphere, 9);
        auto t2 = build_spirals(sphere, 9);
        Rng rng(5);
        TriMesh deformed = sphere;
        for (auto& v : deformed.vertices)
            v += Vec3{rng.normal(0, 0.1), rng.normal(0, 0.1), rng.normal(0, 0.1)};
        auto t3 = build_spirals(deformed, 9);
        bool stable = t1.hash() == t2.hash() && t1.hash() == t3.hash();
        if (!stable) all = false;
        detail += std::string("spiral hash ") + (stable ? "stable" : "UNSTABLE");
    }
    report("invariance-suite", all, detail);
}

// ----------------------------------------------------------------- topology

void topology_suite(const Dataset& ds) {
    int checked = 0, manifold_ok = 0, euler_ok = 0, pool_ok = 0;
    for (const auto* split : {&ds.train, &ds.test}) {
        for (const auto& s : *split) {
            ++checked;
            int euler_before =
                s.mesh.vertex_count() - s.mesh.edge_count() + s.mesh.face_count();
            auto res = decimate(s.mesh, s.mesh.vertex_count() / 2);
            auto rep = validate(res.mesh);
            if (rep.is_edge_manifold) ++manifold_ok;
            int euler_after =
                res.mesh.vertex_count() - res.mesh.edge_count() + res.mesh.face_count();
            if (euler_before == 2 && euler_after == 2 && rep.is_closed) ++euler_ok;

            EdgeFeatureMesh efm(s.mesh);
            Tensor feats = edge_input_features(s.mesh);
            efm.edge_pool(feats, static_cast<int>(0.7 * s.mesh.edge_count()));
            if (efm.topology_consistent()) ++pool_ok;
        }
    }
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "%d corpus meshes: decimation manifold %d/%d, Euler preserved %d/%d, edge pooling "
                  "consistent %d/%d",
                  checked, manifold_ok, checked, euler_ok, checked, pool_ok, checked);
    report("topology-suite", manifold_ok == checked && euler_ok == checked && pool_ok == checked,
           buf);
}

// -------------------------------------------------------------- end to end

struct BenchRow {
    ModelId id;
    double best_acc = 0.0;
    double mean_epoch_seconds = 0.0;
    std::size_t params = 0;
};

int main_benchmark() {
    auto t_bench = now_seconds();
    SynthSpec spec;  // library defaults: 642-vertex template, 282+282 samples
    Dataset ds = generate(spec);
    double floor = separability_check(ds);
    {
        char buf[120];
        std::snprintf(buf, sizeof(buf), "282 train / 282 test, separability floor %.3f",
                      floor);
        bool split_ok = ds.train.size() == 282 && ds.test.size() == 282;
        report("benchmark-dataset", split_ok, buf);
    }

    topology_suite(ds);

    std::vector<BenchRow> rows;
    std::unique_ptr<Model> meshcnn_model;
    for (ModelId id : {ModelId::Come, ModelId::SpiralNet, ModelId::MeshCnn, ModelId::MeshNet,
                       ModelId::PointNet}) {
        RunConfig cfg = default_config(id);
        cfg.dataset_path = "(in-memory)";
        auto model = build_model(cfg, &ds.templ);
        TrainResult r = train(*model, ds, cfg);
        BenchRow row;
        row.id = id;
        row.params = model->parameter_count();
        row.mean_epoch_seconds = r.mean_epoch_seconds;
        for (const auto& e : r.history) row.best_acc = std::max(row.best_acc, e.test.accuracy);
        rows.push_back(row);
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "%-9s best test acc %.3f (epochs %d), %.2fs/epoch, %zu params",
                      model_name(id), row.best_acc, cfg.epochs, row.mean_epoch_seconds, row.params);
        std::printf("        %s\n", buf);
        std::fflush(stdout);
        if (id == ModelId::MeshCnn) meshcnn_model = std::move(model);
    }

    {  // accuracy and floor criteria
        bool acc_ok = true, floor_ok = true;
        for (const auto& r : rows) {
            acc_ok = acc_ok && r.best_acc >= 0.95;
            floor_ok = floor_ok && r.best_acc >= floor - 0.02;
        }
        double total = now_seconds() - t_bench;
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "all five >= 0.95 within 50 epochs: %s; all beat floor-0.02 (%.3f): %s; wall %.0fs "
                      "(limit 900s)",
                      acc_ok ? "yes" : "no", floor - 0.02, floor_ok ? "yes" : "no", total);
        report("benchmark-accuracy", acc_ok && floor_ok && total < 900.0, buf);
    }

    {  // parameter-count and epoch-time orderings
        auto find = [&](ModelId id) {
            for (const auto& r : rows)
                if (r.id == id) return r;
            return rows[0];
        };
        auto come = find(ModelId::Come), spiral = find(ModelId::SpiralNet),
             mcnn = find(ModelId::MeshCnn), mnet = find(ModelId::MeshNet),
             pnet = find(ModelId::PointNet);
        bool params_ok = come.params < spiral.params && spiral.params < mcnn.params &&
                         mcnn.params < pnet.params && pnet.params < mnet.params;
        bool time_ok = spiral.mean_epoch_seconds < come.mean_epoch_seconds &&
                       mnet.mean_epoch_seconds < mcnn.mean_epoch_seconds;
        char buf[250];
        std::snprintf(buf, sizeof(buf),
                      "params %zu < %zu < %zu < %zu < %zu: %s; epoch time spiral %.2fs < come %.2fs "
                      "and meshnet %.2fs < meshcnn %.2fs: %s",
                      come.params, spiral.params, mcnn.params, pnet.params, mnet.params,
                      params_ok ? "yes" : "no", spiral.mean_epoch_seconds, come.mean_epoch_seconds,
                      mnet.mean_epoch_seconds, mcnn.mean_epoch_seconds, time_ok ? "yes" : "no");
        report("benchmark-complexity-ordering", params_ok && time_ok, buf);
    }

    {  // edge-importance direction on the trained meshcnn
        auto* mcnn = dynamic_cast<MeshCnnModel*>(meshcnn_model.get());
        const Vec3 site = normalized(spec.site1);
        const double cos_limit = std::cos(spec.bump_width);
        int hits = 0, total = 0, with_lines = 0;
        for (const auto& s : ds.test) {
            std::unique_ptr<EdgeFeatureMesh> efm;
            {
                NoGradGuard ng;
                mcnn->forward_with_mesh(s, efm);
            }
            auto values = efm->importance_values();
            if (values.size() == static_cast<std::size_t>(s.mesh.edge_count())) ++with_lines;
            double bump_sum = 0.0, all_sum = 0.0;
            int bump_n = 0;
            for (std::size_t e = 0; e < values.size(); ++e) {
                auto [u, v] = s.mesh.edges[e];
                Vec3 mid = normalized((s.mesh.vertices[u] + s.mesh.vertices[v]) * 0.5);
                all_sum += values[e];
                if (dot(mid, site) >= cos_limit) {
                    bump_sum += values[e];
                    ++bump_n;
                }
            }
            double mesh_mean = all_sum / static_cast<double>(values.size());
            double bump_mean = bump_n > 0 ? bump_sum / bump_n : 0.0;
            if (bump_mean > mesh_mean) ++hits;
            ++total;
        }
        double frac = static_cast<double>(hits) / total;
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "one value per original edge on %d/%d samples; bump-region mean above mesh mean "
                      "on %.1f%% of test samples (need >= 80%%)",
                      with_lines, total, 100.0 * frac);
        report("benchmark-edge-importance", with_lines == total && frac >= 0.80, buf);
    }
    return 0;
}

}  // namespace

int main() {
    gradient_suite();
    oracle_suite();
    invariance_suite();
    main_benchmark();
    std::printf("%s: %d criterion failure(s)\n", failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
                failures);
    return failures == 0 ? 0 : 1;
}
