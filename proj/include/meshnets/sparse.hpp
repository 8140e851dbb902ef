#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace meshnets {

// Compressed sparse row matrix with constant (non-learned) values: graph
// Laplacians, pooling maps, edge-merge maps.
struct Csr {
    std::size_t rows = 0, cols = 0;
    std::vector<std::size_t> indptr;  // rows+1
    std::vector<int> indices;
    std::vector<double> values;

    static Csr from_triplets(std::size_t rows, std::size_t cols,
                             std::vector<std::tuple<int, int, double>> trips) {
        for (const auto& [r, c, v] : trips) {
            (void)v;
            if (r < 0 || static_cast<std::size_t>(r) >= rows || c < 0 ||
                static_cast<std::size_t>(c) >= cols)
                throw std::runtime_error("sparse triplet out of range");
        }
        std::sort(trips.begin(), trips.end(), [](const auto& a, const auto& b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) <
                   std::tie(std::get<0>(b), std::get<1>(b));
        });
        Csr m;
        m.rows = rows;
        m.cols = cols;
        m.indptr.assign(rows + 1, 0);
        for (std::size_t i = 0; i < trips.size(); ++i) {
            auto [r, c, v] = trips[i];
            if (!m.indices.empty() && m.indptr[static_cast<std::size_t>(r) + 1] > 0 &&
                m.row_of_last_ == r && m.indices.back() == c) {
                m.values.back() += v;  // duplicate entries sum
            } else {
                m.indices.push_back(c);
                m.values.push_back(v);
                m.row_of_last_ = r;
            }
            m.indptr[static_cast<std::size_t>(r) + 1] = m.indices.size();
        }
        for (std::size_t r = 1; r <= rows; ++r)
            m.indptr[r] = std::max(m.indptr[r], m.indptr[r - 1]);
        return m;
    }

    std::size_t nnz() const { return values.size(); }

    // multiply a dense row-major [cols x n] block
    std::vector<double> apply(const std::vector<double>& x, std::size_t n) const {
        if (x.size() != cols * n) throw std::runtime_error("Csr::apply: size mismatch");
        std::vector<double> out(rows * n, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            double* orow = out.data() + r * n;
            for (std::size_t p = indptr[r]; p < indptr[r + 1]; ++p) {
                const double w = values[p];
                const double* xrow = x.data() + static_cast<std::size_t>(indices[p]) * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += w * xrow[j];
            }
        }
        return out;
    }

    // FNV-1a over the sparsity pattern only (not the values)
    std::uint64_t pattern_hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](std::uint64_t v) {
            for (int b = 0; b < 8; ++b) {
                h ^= (v >> (8 * b)) & 0xff;
                h *= 1099511628211ULL;
            }
        };
        mix(rows);
        mix(cols);
        for (auto p : indptr) mix(p);
        for (auto i : indices) mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)));
        return h;
    }

private:
    int row_of_last_ = -1;
};

}  // namespace meshnets
