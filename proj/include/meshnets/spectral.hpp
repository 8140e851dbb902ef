#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "meshnets/mesh.hpp"
#include "meshnets/nn.hpp"
#include "meshnets/sparse.hpp"
#include "meshnets/tensor.hpp"

namespace meshnets {

// Symmetric normalized graph Laplacian L = I - D^{-1/2} A D^{-1/2}.
inline Csr laplacian_matrix(const std::vector<std::vector<int>>& neighbors) {
    const std::size_t n = neighbors.size();
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (neighbors[i].empty())
            throw std::runtime_error("laplacian: isolated vertex " + std::to_string(i));
        inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(neighbors[i].size()));
    }
    std::vector<std::tuple<int, int, double>> trips;
    trips.reserve(n * 7);
    for (std::size_t i = 0; i < n; ++i) {
        trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
        for (int j : neighbors[i])
            trips.emplace_back(static_cast<int>(i), j,
                               -inv_sqrt_deg[i] * inv_sqrt_deg[static_cast<std::size_t>(j)]);
    }
    return Csr::from_triplets(n, n, std::move(trips));
}

// L scaled to the Chebyshev domain: 2L/lambda_max - I with lambda_max fixed
// to 2, the spectral upper bound of the normalized Laplacian, so the shifted
// matrix is simply L - I.
struct ScaledLaplacian {
    std::shared_ptr<const Csr> shifted;  // L - I
    double lambda_max = 2.0;
};

inline ScaledLaplacian normalized_laplacian(const std::vector<std::vector<int>>& neighbors) {
    const std::size_t n = neighbors.size();
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (neighbors[i].empty())
            throw std::runtime_error("laplacian: isolated vertex " + std::to_string(i));
        inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(neighbors[i].size()));
    }
    std::vector<std::tuple<int, int, double>> trips;
    for (std::size_t i = 0; i < n; ++i)
        for (int j : neighbors[i])
            trips.emplace_back(static_cast<int>(i), j,
                               -inv_sqrt_deg[i] * inv_sqrt_deg[static_cast<std::size_t>(j)]);
    ScaledLaplacian s;
    s.shifted = std::make_shared<const Csr>(Csr::from_triplets(n, n, std::move(trips)));
    return s;
}

inline ScaledLaplacian normalized_laplacian(const TriMesh& mesh) {
    return normalized_laplacian(mesh.neighbors);
}

// Truncated Chebyshev spectral convolution, order K.
struct ChebConvLayer {
    std::vector<Parameter> theta;  // K weights of shape [F_in, F_out]
    Parameter bias;                // [F_out]
    std::size_t order = 0;

    ChebConvLayer() = default;
    ChebConvLayer(const std::string& name, std::size_t K, std::size_t f_in, std::size_t f_out,
                  Rng& rng)
        : order(K) {
        if (K == 0) throw std::runtime_error("ChebConvLayer: order must be positive");
        for (std::size_t k = 0; k < K; ++k)
            theta.emplace_back(name + ".theta" + std::to_string(k), glorot_uniform(f_in, f_out, rng));
        bias = Parameter(name + ".bias", Tensor::zeros({f_out}));
    }

    void collect(std::vector<Parameter*>& out) {
        for (auto& t : theta) out.push_back(&t);
        out.push_back(&bias);
    }
};

// Y = sum_k T_k(L~) X theta_k + bias with the usual three-term recurrence.
inline Tensor cheb_conv(const ChebConvLayer& layer, const ScaledLaplacian& lap, const Tensor& x) {
    if (x.cols() != layer.theta[0].value.shape()[0])
        throw std::runtime_error("cheb_conv: feature width mismatch");
    if (lap.shifted->cols != x.rows())
        throw std::runtime_error("cheb_conv: vertex count mismatch");
    Tensor t_prev = x;
    Tensor acc = ops::matmul(x, layer.theta[0].value);
    if (layer.order > 1) {
        Tensor t_cur = ops::spmm(lap.shifted, x);
        acc = ops::add(acc, ops::matmul(t_cur, layer.theta[1].value));
        for (std::size_t k = 2; k < layer.order; ++k) {
            Tensor t_next = ops::sub(ops::scale(ops::spmm(lap.shifted, t_cur), 2.0), t_prev);
            acc = ops::add(acc, ops::matmul(t_next, layer.theta[k].value));
            t_prev = t_cur;
            t_cur = t_next;
        }
    }
    return ops::add_rows(acc, layer.bias.value);
}

}  // namespace meshnets
