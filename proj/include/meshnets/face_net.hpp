#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "meshnets/mesh.hpp"
#include "meshnets/nn.hpp"
#include "meshnets/tensor.hpp"

namespace meshnets {

// Per-face geometry feeding the face-based operators: centroid, the three
// corner offset vectors (vertex - center, summing to zero), the unit normal,
// and the three edge-adjacent faces (self index fills boundary slots).
struct FaceData {
    Tensor centers;  // [F, 3]
    Tensor corners;  // [F, 9] = OV1 | OV2 | OV3
    Tensor normals;  // [F, 3] unit length
    std::vector<std::array<int, 3>> neighbors;
};

inline FaceData face_data(const TriMesh& mesh) {
    const int nf = mesh.face_count();
    std::vector<double> centers(nf * 3), corners(nf * 9), normals(nf * 3);
    for (int f = 0; f < nf; ++f) {
        const auto& fc = mesh.faces[f];
        Vec3 a = mesh.vertices[fc[0]], b = mesh.vertices[fc[1]], c = mesh.vertices[fc[2]];
        Vec3 ctr = (a + b + c) / 3.0;
        Vec3 n = cross(b - a, c - a);
        double len = norm(n);
        if (len <= 0.0) throw std::runtime_error("degenerate face " + std::to_string(f));
        n = n / len;
        for (int d = 0; d < 3; ++d) {
            centers[f * 3 + d] = ctr[d];
            normals[f * 3 + d] = n[d];
            corners[f * 9 + 0 + d] = (a - ctr)[d];
            corners[f * 9 + 3 + d] = (b - ctr)[d];
            corners[f * 9 + 6 + d] = (c - ctr)[d];
        }
    }
    FaceData out;
    out.centers = Tensor::from(std::move(centers), {static_cast<std::size_t>(nf), 3});
    out.corners = Tensor::from(std::move(corners), {static_cast<std::size_t>(nf), 9});
    out.normals = Tensor::from(std::move(normals), {static_cast<std::size_t>(nf), 3});

    auto inc = edge_incident_faces(mesh);
    out.neighbors.assign(nf, {0, 0, 0});
    for (int f = 0; f < nf; ++f) {
        const auto& fc = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            int e = mesh.edge_index(fc[k], fc[(k + 1) % 3]);
            int other = inc[e][0] == f ? inc[e][1] : inc[e][0];
            out.neighbors[f][k] = other < 0 ? f : other;  // self-pad at boundaries
        }
    }
    return out;
}

// Shared MLP over face centers.
inline Tensor spatial_descriptor(const Tensor& centers, const Mlp& mlp) {
    if (centers.cols() != 3 || mlp.layers.empty() || mlp.layers[0].weight.value.shape()[0] != 3)
        throw std::runtime_error("spatial_descriptor: expects [F,3] centers and an MLP of input width 3");
    return mlp.forward(centers);
}

// 'Inner' structure: a shared function applied to the three cyclic corner
// pairs (OV1,OV2), (OV2,OV3), (OV3,OV1), averaged, then a second shared MLP.
// Invariant to cyclic relabeling of the corners by construction.
inline Tensor face_rotate_conv(const Tensor& corners, const Mlp& pair_mlp, const Mlp& out_mlp) {
    if (corners.cols() != 9) throw std::runtime_error("face_rotate_conv: expects [F,9] corner offsets");
    if (pair_mlp.layers.empty() || pair_mlp.layers[0].weight.value.shape()[0] != 6)
        throw std::runtime_error("face_rotate_conv: pair MLP must take width 6");
    const std::size_t nf = corners.rows();
    auto pair_tensor = [&](int i, int j) {
        std::vector<double> d(nf * 6);
        for (std::size_t f = 0; f < nf; ++f)
            for (int k = 0; k < 3; ++k) {
                d[f * 6 + k] = corners(f, static_cast<std::size_t>(i * 3 + k));
                d[f * 6 + 3 + k] = corners(f, static_cast<std::size_t>(j * 3 + k));
            }
        return Tensor::from(std::move(d), {nf, 6});
    };
    Tensor s = ops::add(ops::add(pair_mlp.forward(pair_tensor(0, 1)), pair_mlp.forward(pair_tensor(1, 2))),
                        pair_mlp.forward(pair_tensor(2, 0)));
    return out_mlp.forward(ops::scale(s, 1.0 / 3.0));
}

// M learnable kernels of m points each, parameterized on the unit sphere by
// (theta, phi) so the points can never leave it.
struct KernelCorrelationLayer {
    Parameter angles;  // [M, 2m]: theta_0, phi_0, theta_1, phi_1, ...
    std::size_t kernels = 0, points = 0;
    double sigma = 0.2;

    KernelCorrelationLayer() = default;
    KernelCorrelationLayer(const std::string& name, std::size_t M, std::size_t m, double sigma_,
                           Rng& rng)
        : kernels(M), points(m), sigma(sigma_) {
        std::vector<double> a(M * 2 * m);
        for (std::size_t k = 0; k < M; ++k)
            for (std::size_t j = 0; j < m; ++j) {
                a[k * 2 * m + 2 * j] = std::acos(1.0 - 2.0 * rng.uniform());  // uniform on sphere
                a[k * 2 * m + 2 * j + 1] = rng.uniform(0.0, 6.283185307179586);
            }
        angles = Parameter(name + ".angles", Tensor::from(std::move(a), {M, 2 * m}));
    }

    void collect(std::vector<Parameter*>& out) { out.push_back(&angles); }
};

// 'Outer' structure: Gaussian correlation between each face's normal fan
// (itself plus its 3 neighbors) and every kernel's point set,
//   out[i][k] = 1/(4m) sum_n sum_j exp(-|n - p_j|^2 / (2 sigma^2)),
// differentiable in the kernel angles.
inline Tensor face_kernel_correlation(const Tensor& normals,
                                      const std::vector<std::array<int, 3>>& neighbors,
                                      const KernelCorrelationLayer& layer) {
    if (layer.sigma <= 0.0) throw std::runtime_error("face_kernel_correlation: sigma must be positive");
    if (normals.cols() != 3) throw std::runtime_error("face_kernel_correlation: expects [F,3] normals");
    const std::size_t nf = normals.rows(), M = layer.kernels, m = layer.points;
    if (neighbors.size() != nf) throw std::runtime_error("face_kernel_correlation: neighbor count mismatch");

    const Tensor& ang = layer.angles.value;
    auto point_of = [&](const std::vector<double>& a, std::size_t k, std::size_t j) {
        double th = a[k * 2 * m + 2 * j], ph = a[k * 2 * m + 2 * j + 1];
        return Vec3{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
    };
    auto fan = [&, nd = normals.data()](std::size_t i, int s) {
        std::size_t src = s == 0 ? i : static_cast<std::size_t>(neighbors[i][s - 1]);
        return Vec3{nd[src * 3], nd[src * 3 + 1], nd[src * 3 + 2]};
    };

    const double inv2s2 = 1.0 / (2.0 * layer.sigma * layer.sigma);
    const double scale = 1.0 / (4.0 * static_cast<double>(m));
    std::vector<double> out(nf * M, 0.0);
    for (std::size_t i = 0; i < nf; ++i)
        for (std::size_t k = 0; k < M; ++k) {
            double acc = 0.0;
            for (int s = 0; s < 4; ++s) {
                Vec3 n = fan(i, s);
                for (std::size_t j = 0; j < m; ++j) {
                    Vec3 p = point_of(ang.data(), k, j);
                    acc += std::exp(-norm2(n - p) * inv2s2);
                }
            }
            out[i * M + k] = scale * acc;
        }

    auto* nang = ang.node();
    const std::vector<double> normals_copy = normals.data();
    const double sig2 = layer.sigma * layer.sigma;
    return Tensor::make_op(
        {nf, M}, std::move(out), {ang},
        [nang, normals_copy, neighbors, nf, M, m, inv2s2, sig2, scale](Tensor::NodeT& node) {
            if (!nang->requires_grad) return;
            for (std::size_t i = 0; i < nf; ++i)
                for (std::size_t k = 0; k < M; ++k) {
                    double g = node.grad[i * M + k] * scale;
                    if (g == 0.0) continue;
                    for (int s = 0; s < 4; ++s) {
                        std::size_t src = s == 0 ? i : static_cast<std::size_t>(neighbors[i][s - 1]);
                        Vec3 n{normals_copy[src * 3], normals_copy[src * 3 + 1],
                               normals_copy[src * 3 + 2]};
                        for (std::size_t j = 0; j < m; ++j) {
                            double th = nang->value[k * 2 * m + 2 * j];
                            double ph = nang->value[k * 2 * m + 2 * j + 1];
                            double st = std::sin(th), ct = std::cos(th);
                            double sp = std::sin(ph), cp = std::cos(ph);
                            Vec3 p{st * cp, st * sp, ct};
                            Vec3 diff = n - p;
                            double e = std::exp(-norm2(diff) * inv2s2);
                            Vec3 dE = diff * (e / sig2);  // dE/dp
                            Vec3 dp_dth{ct * cp, ct * sp, -st};
                            Vec3 dp_dph{-st * sp, st * cp, 0.0};
                            nang->grad[k * 2 * m + 2 * j] += g * dot(dE, dp_dth);
                            nang->grad[k * 2 * m + 2 * j + 1] += g * dot(dE, dp_dph);
                        }
                    }
                }
        });
}

// One mesh-convolution stage: combination mixes spatial with structural
// through a shared MLP; aggregation fuses each face's structural vector with
// its three neighbors' (shared MLP per pair, elementwise max over the three).
struct MeshConvLayer {
    Mlp combine;    // input spatial+structural
    Mlp aggregate;  // input 2*structural

    MeshConvLayer() = default;
    MeshConvLayer(const std::string& name, std::size_t spatial_w, std::size_t structural_w,
                  std::size_t spatial_out, std::size_t structural_out, Rng& rng)
        : combine(name + ".combine", {spatial_w + structural_w, spatial_out}, rng),
          aggregate(name + ".aggregate", {2 * structural_w, structural_out}, rng) {}

    void collect(std::vector<Parameter*>& out) {
        combine.collect(out);
        aggregate.collect(out);
    }
};

struct MeshConvOut {
    Tensor spatial;
    Tensor structural;
};

inline MeshConvOut mesh_conv(const Tensor& spatial, const Tensor& structural,
                             const std::vector<std::array<int, 3>>& neighbors,
                             const MeshConvLayer& layer) {
    if (spatial.rows() != structural.rows() || spatial.rows() != neighbors.size())
        throw std::runtime_error("mesh_conv: row count mismatch");
    if (spatial.cols() + structural.cols() != layer.combine.layers[0].weight.value.shape()[0])
        throw std::runtime_error("mesh_conv: combine width mismatch");
    if (2 * structural.cols() != layer.aggregate.layers[0].weight.value.shape()[0])
        throw std::runtime_error("mesh_conv: aggregate width mismatch");

    MeshConvOut out;
    out.spatial = layer.combine.forward(ops::concat_cols({spatial, structural}));

    const std::size_t nf = neighbors.size();
    std::vector<int> idx(nf);
    Tensor agg;
    for (int s = 0; s < 3; ++s) {
        for (std::size_t i = 0; i < nf; ++i) idx[i] = neighbors[i][s];
        Tensor pair = ops::concat_cols({structural, ops::row_gather(structural, idx)});
        Tensor o = layer.aggregate.forward(pair);
        agg = (s == 0) ? o : ops::max2(agg, o);
    }
    out.structural = agg;
    return out;
}

}  // namespace meshnets
