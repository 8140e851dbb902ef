#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "meshnets/mesh.hpp"
#include "meshnets/nn.hpp"
#include "meshnets/tensor.hpp"

namespace meshnets {

// Fixed-length per-vertex spiral index sequences: the vertex itself, then its
// rings enumerated counter-clockwise. Pure function of topology and winding,
// so tables built on the template hold for every sample sharing its faces.
struct SpiralTable {
    int length = 0;
    static constexpr int pad = -1;
    std::vector<std::vector<int>> rows;  // one row of `length` entries per vertex

    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        for (const auto& row : rows)
            for (int e : row) {
                h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(e));
                h *= 1099511628211ULL;
            }
        return h;
    }
};

namespace detail {

// Counter-clockwise one-ring of v: a cycle for interior vertices (rotated to
// start at the minimum-index neighbor), an open chain for boundary vertices.
// Throws when the incident fan is not a single cycle or chain.
inline std::vector<int> one_ring_ccw(int v, const std::vector<std::array<int, 3>>& faces,
                                     const std::vector<std::vector<int>>& vertex_faces) {
    std::map<int, int> next;  // next[s] = t for faces (v, s, t)
    std::map<int, int> prev;
    for (int f : vertex_faces[v]) {
        const auto& fc = faces[f];
        int k = fc[0] == v ? 0 : (fc[1] == v ? 1 : 2);
        int s = fc[(k + 1) % 3], t = fc[(k + 2) % 3];
        if (next.count(s) || prev.count(t))
            throw std::runtime_error("non-manifold vertex " + std::to_string(v));
        next[s] = t;
        prev[t] = s;
    }
    if (next.empty()) return {};
    int start = -1;
    bool cycle = true;
    for (const auto& [s, t] : next) {
        (void)t;
        if (!prev.count(s)) {
            if (start != -1) throw std::runtime_error("non-manifold vertex " + std::to_string(v));
            start = s;
            cycle = false;
        }
    }
    if (cycle) {
        start = next.begin()->first;  // minimum index neighbor (map is ordered)
    }
    std::vector<int> ring;
    int cur = start;
    for (std::size_t i = 0; i <= next.size(); ++i) {
        ring.push_back(cur);
        auto it = next.find(cur);
        if (it == next.end()) break;
        cur = it->second;
        if (cur == start) break;
    }
    // neighbors not covered by a single walk indicate a pinched vertex
    std::size_t ring_neighbors = next.size() + (cycle ? 0 : 1);
    if (ring.size() != ring_neighbors)
        throw std::runtime_error("non-manifold vertex " + std::to_string(v));
    return ring;
}

}  // namespace detail

// Ring 1 starts at the minimum-index neighbor and walks counter-clockwise per
// the face winding; each later ring appends unvisited vertices in the order
// they are reached while scanning the previous ring, every scan running in
// the same rotational direction. Sequences are truncated or padded to
// `length`.
inline SpiralTable build_spirals(const TriMesh& mesh, int length) {
    if (length < 1) throw std::runtime_error("build_spirals: length must be >= 1");
    const int n = mesh.vertex_count();
    std::vector<std::vector<int>> vertex_faces(n);
    for (int f = 0; f < mesh.face_count(); ++f)
        for (int k = 0; k < 3; ++k) vertex_faces[mesh.faces[f][k]].push_back(f);

    std::vector<std::vector<int>> ring_cache(n);
    auto ring_of = [&](int v) -> const std::vector<int>& {
        if (ring_cache[v].empty() && !vertex_faces[v].empty())
            ring_cache[v] = detail::one_ring_ccw(v, mesh.faces, vertex_faces);
        return ring_cache[v];
    };

    SpiralTable table;
    table.length = length;
    table.rows.assign(n, {});
    std::vector<int> visited_stamp(n, -1);
    for (int v = 0; v < n; ++v) {
        std::vector<int> seq{v};
        visited_stamp[v] = v;
        std::vector<int> ring = ring_of(v);
        for (int u : ring) visited_stamp[u] = v;
        while (!ring.empty() && static_cast<int>(seq.size()) < length) {
            seq.insert(seq.end(), ring.begin(), ring.end());
            std::vector<int> next_ring;
            for (int u : ring) {
                for (int w : ring_of(u)) {
                    if (visited_stamp[w] == v) continue;
                    visited_stamp[w] = v;
                    next_ring.push_back(w);
                }
            }
            ring = std::move(next_ring);
        }
        seq.resize(length, SpiralTable::pad);
        table.rows[v] = std::move(seq);
    }
    return table;
}

// [N, F] -> [N, length*F]; row v concatenates X over the spiral entries, pad
// slots contributing zeros. Gradients scatter-add back through the gathers.
inline Tensor spiral_gather(const Tensor& x, const SpiralTable& table) {
    if (x.rows() != table.rows.size()) throw std::runtime_error("spiral_gather: vertex count mismatch");
    std::vector<Tensor> parts;
    parts.reserve(table.length);
    std::vector<int> idx(table.rows.size());
    for (int j = 0; j < table.length; ++j) {
        for (std::size_t v = 0; v < table.rows.size(); ++v) idx[v] = table.rows[v][j];
        parts.push_back(ops::row_gather(x, idx));
    }
    return ops::concat_cols(parts);
}

struct SpiralConvLayer {
    Parameter weight;  // [length*F_in, F_out]
    Parameter bias;    // [F_out]

    SpiralConvLayer() = default;
    SpiralConvLayer(const std::string& name, int length, std::size_t f_in, std::size_t f_out,
                    Rng& rng)
        : weight(name + ".weight", glorot_uniform(static_cast<std::size_t>(length) * f_in, f_out, rng)),
          bias(name + ".bias", Tensor::zeros({f_out})) {}

    void collect(std::vector<Parameter*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

inline Tensor spiral_conv(const SpiralConvLayer& layer, const Tensor& x, const SpiralTable& table) {
    Tensor g = spiral_gather(x, table);
    if (g.cols() != layer.weight.value.shape()[0])
        throw std::runtime_error("spiral_conv: weight width mismatch");
    return ops::add_rows(ops::matmul(g, layer.weight.value), layer.bias.value);
}

inline void save_spiral_table(const SpiralTable& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& row : t.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << row[j];
        out << '\n';
    }
}

inline SpiralTable load_spiral_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    SpiralTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<int> row;
        std::size_t pos = 0;
        while (pos < line.size()) {
            while (pos < line.size() && line[pos] == ' ') ++pos;
            if (pos >= line.size()) break;
            row.push_back(std::stoi(line.substr(pos)));
            while (pos < line.size() && line[pos] != ' ') ++pos;
        }
        if (!row.empty()) t.rows.push_back(std::move(row));
    }
    t.length = t.rows.empty() ? 0 : static_cast<int>(t.rows[0].size());
    return t;
}

}  // namespace meshnets
