#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "meshnets/mesh.hpp"
#include "meshnets/mesh_io.hpp"
#include "meshnets/nn.hpp"
#include "meshnets/tensor.hpp"

namespace meshnets {

// Relative geometric input descriptors, one row of 5 per edge:
//   [0] dihedral angle in (0, 2pi), pi for coplanar faces
//   [1,2] the two opposite inner angles, ascending
//   [3,4] the two edge-length / triangle-height ratios, ascending
// Boundary edges duplicate their single face's values and use a flat
// dihedral. All five are invariant to rigid motion and uniform scale.
inline Tensor edge_input_features(const TriMesh& mesh) {
    auto topo = edge_face_topology(mesh);
    const int ne = mesh.edge_count();
    std::vector<double> feat(static_cast<std::size_t>(ne) * 5, 0.0);

    auto unit_normal = [&](int f) {
        Vec3 n = face_normal(mesh, f);
        double len = norm(n);
        if (len <= 0.0) throw std::runtime_error("degenerate face " + std::to_string(f));
        return n / len;
    };
    auto opposite_vertex = [&](int f, int u, int v) {
        for (int k = 0; k < 3; ++k)
            if (mesh.faces[f][k] != u && mesh.faces[f][k] != v) return mesh.faces[f][k];
        throw std::runtime_error("edge not part of face");
    };

    for (int e = 0; e < ne; ++e) {
        auto [u, v] = mesh.edges[e];
        int fa = topo.faces[e][0], fb = topo.faces[e][1];
        if (fa < 0) throw std::runtime_error("edge without incident face");

        double dihedral = 3.14159265358979323846;
        if (fb >= 0) {
            Vec3 n1 = unit_normal(fa), n2 = unit_normal(fb);
            Vec3 edir = normalized(mesh.vertices[v] - mesh.vertices[u]);
            dihedral -= std::atan2(dot(cross(n1, n2), edir), dot(n1, n2));
        }

        double angles[2], ratios[2];
        int nf = fb >= 0 ? 2 : 1;
        for (int s = 0; s < nf; ++s) {
            int f = s == 0 ? fa : fb;
            int w = opposite_vertex(f, u, v);
            Vec3 pu = mesh.vertices[u], pv = mesh.vertices[v], pw = mesh.vertices[w];
            Vec3 wu = pu - pw, wv = pv - pw;
            double denom = norm(wu) * norm(wv);
            if (denom <= 0.0) throw std::runtime_error("degenerate face " + std::to_string(f));
            angles[s] = std::acos(std::clamp(dot(wu, wv) / denom, -1.0, 1.0));
            double len = norm(pv - pu);
            double area2 = norm(cross(pv - pu, pw - pu));  // 2 * area
            if (area2 <= 0.0) throw std::runtime_error("degenerate face " + std::to_string(f));
            ratios[s] = len * len / area2;  // edge length / height from w
        }
        if (nf == 1) {
            angles[1] = angles[0];
            ratios[1] = ratios[0];
        }
        if (angles[0] > angles[1]) std::swap(angles[0], angles[1]);
        if (ratios[0] > ratios[1]) std::swap(ratios[0], ratios[1]);

        feat[e * 5 + 0] = dihedral;
        feat[e * 5 + 1] = angles[0];
        feat[e * 5 + 2] = angles[1];
        feat[e * 5 + 3] = ratios[0];
        feat[e * 5 + 4] = ratios[1];
    }
    return Tensor::from(std::move(feat), {static_cast<std::size_t>(ne), 5});
}

// Edge-centric working mesh for convolution and magnitude-driven collapse
// pooling. Feature rows always correspond to the live edges in ascending
// edge-id order; fused edges get fresh ids. History is append-only.
class EdgeFeatureMesh {
public:
    struct PoolEvent {
        int layer = 0;
        int step = 0;       // collapse index within the layer
        int edge = 0;       // live edge id collapsed
        double magnitude = 0.0;
    };

    explicit EdgeFeatureMesh(const TriMesh& mesh) {
        auto topo = edge_face_topology(mesh);
        faces_ = mesh.faces;
        face_alive_.assign(faces_.size(), 1);
        const int ne = mesh.edge_count();
        edge_verts_ = mesh.edges;
        edge_alive_.assign(ne, 1);
        edge_faces_ = topo.faces;
        edge_nbrs_ = topo.neighbors;
        members_.resize(ne);
        for (int e = 0; e < ne; ++e) members_[e] = {e};
        nbrs_.resize(mesh.vertex_count());
        for (const auto& [u, v] : mesh.edges) {
            nbrs_[u].insert(v);
            nbrs_[v].insert(u);
        }
        orig_edges_ = edge_verts_;
        exported_.assign(ne, 0.0);
        assigned_.assign(ne, 0);
        last_magnitude_.assign(ne, 0.0);
        refresh_rows();
    }

    int live_edge_count() const { return static_cast<int>(live_rows_.size()); }
    const std::vector<int>& live_edges() const { return live_rows_; }
    const std::vector<PoolEvent>& history() const { return history_; }
    int pool_layers_run() const { return pool_layers_run_; }
    std::size_t original_edge_count() const { return orig_edges_.size(); }

    // neighbor quadruple translated to feature-row indices (-1 when absent)
    std::array<int, 4> neighbor_rows(int row) const {
        int e = live_rows_[static_cast<std::size_t>(row)];
        std::array<int, 4> out{-1, -1, -1, -1};
        for (int k = 0; k < 4; ++k) {
            int ne = edge_nbrs_[e][k];
            out[k] = ne < 0 ? -1 : row_of_edge_[ne];
        }
        return out;
    }

    bool edge_is_interior(int row) const {
        int e = live_rows_[static_cast<std::size_t>(row)];
        return edge_faces_[e][0] >= 0 && edge_faces_[e][1] >= 0;
    }

    // Collapses edges in ascending L2 magnitude of the current features until
    // `target` live edges remain. Magnitudes are computed once from the
    // incoming features (static priority within the layer); edges fused
    // during the layer only become candidates in later layers. Returns the
    // pooled features: untouched edges pass through, each fused edge averages
    // its triangle's two sides with the collapsed edge.
    Tensor edge_pool(const Tensor& features, int target) {
        if (features.rows() != live_rows_.size())
            throw std::runtime_error("edge_pool: feature rows do not match live edges");
        const std::size_t width = features.cols();
        const int layer = pool_layers_run_;

        std::vector<int> order = live_rows_;
        std::vector<double> magnitude(edge_verts_.size(), 0.0);
        for (std::size_t r = 0; r < live_rows_.size(); ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
                double x = features(r, j);
                s += x * x;
            }
            magnitude[live_rows_[r]] = std::sqrt(s);
        }
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (magnitude[a] != magnitude[b]) return magnitude[a] < magnitude[b];
            return a < b;
        });

        // lineage of each live edge over this call's input rows
        std::map<int, std::map<int, double>> lineage;
        for (std::size_t r = 0; r < live_rows_.size(); ++r)
            lineage[live_rows_[r]] = {{static_cast<int>(r), 1.0}};

        int live = live_edge_count();
        if (target > live) throw std::runtime_error("edge_pool: target exceeds live edge count");
        int step = 0;
        for (int e : order) {
            if (live <= target) break;
            if (!edge_alive_[e]) continue;  // consumed by an earlier collapse
            if (!collapse_valid(e)) continue;
            do_collapse(e, lineage, layer, step, magnitude[e]);
            ++step;
            live -= 3;
        }
        if (live > target)
            throw std::runtime_error("edge_pool: target unreachable, achieved " +
                                     std::to_string(live) + " edges");

        refresh_rows();
        std::vector<std::tuple<int, int, double>> trips;
        for (std::size_t r = 0; r < live_rows_.size(); ++r)
            for (const auto& [col, w] : lineage[live_rows_[r]])
                trips.emplace_back(static_cast<int>(r), col, w);
        auto merge = std::make_shared<const Csr>(
            Csr::from_triplets(live_rows_.size(), features.rows(), std::move(trips)));
        Tensor pooled = ops::spmm(std::move(merge), features);

        // survivors carry their post-pool magnitude for the importance export
        for (std::size_t r = 0; r < live_rows_.size(); ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < width; ++j) s += pooled(r, j) * pooled(r, j);
            double mag = std::sqrt(s);
            for (int orig : members_[live_rows_[r]])
                if (!assigned_[orig]) last_magnitude_[orig] = mag;
        }
        ++pool_layers_run_;
        return pooled;
    }

    // One value per original edge: the magnitude the edge carried when it (or
    // its first fused descendant) was collapsed; edges surviving every layer
    // report their final pooled magnitude.
    void export_importance(const std::string& path) const {
        if (history_.empty()) throw std::runtime_error("export_importance: no pooling recorded");
        std::vector<double> values(orig_edges_.size());
        for (std::size_t e = 0; e < orig_edges_.size(); ++e)
            values[e] = assigned_[e] ? exported_[e] : last_magnitude_[e];
        save_edge_attributes(orig_edges_, values, path);
    }

    std::vector<double> importance_values() const {
        if (history_.empty()) throw std::runtime_error("export_importance: no pooling recorded");
        std::vector<double> values(orig_edges_.size());
        for (std::size_t e = 0; e < orig_edges_.size(); ++e)
            values[e] = assigned_[e] ? exported_[e] : last_magnitude_[e];
        return values;
    }

    const std::vector<std::pair<int, int>>& original_edges() const { return orig_edges_; }

    // structural checks used by tests: every live interior edge has 4 live
    // distinct neighbors; every live edge borders <= 2 live faces
    bool topology_consistent() const {
        for (int e : live_rows_) {
            int nf = (edge_faces_[e][0] >= 0) + (edge_faces_[e][1] >= 0);
            if (nf == 0 || nf > 2) return false;
            if (nf == 2) {
                std::set<int> uniq;
                for (int k = 0; k < 4; ++k) {
                    int x = edge_nbrs_[e][k];
                    if (x < 0 || !edge_alive_[x]) return false;
                    uniq.insert(x);
                }
                if (uniq.size() != 4) return false;
            }
        }
        return true;
    }

private:
    std::vector<std::array<int, 3>> faces_;
    std::vector<char> face_alive_;
    std::vector<std::pair<int, int>> edge_verts_;
    std::vector<char> edge_alive_;
    std::vector<std::array<int, 2>> edge_faces_;
    std::vector<std::array<int, 4>> edge_nbrs_;
    std::vector<std::vector<int>> members_;  // original edges represented
    std::vector<std::set<int>> nbrs_;        // vertex adjacency
    std::unordered_map<std::uint64_t, int> edge_lookup_;
    std::vector<int> live_rows_;
    std::vector<int> row_of_edge_;

    std::vector<std::pair<int, int>> orig_edges_;
    std::vector<double> exported_;
    std::vector<char> assigned_;
    std::vector<double> last_magnitude_;
    std::vector<PoolEvent> history_;
    int pool_layers_run_ = 0;

    static std::uint64_t key(int u, int v) {
        if (u > v) std::swap(u, v);
        return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint32_t>(v);
    }

    void refresh_rows() {
        live_rows_.clear();
        row_of_edge_.assign(edge_verts_.size(), -1);
        edge_lookup_.clear();
        for (std::size_t e = 0; e < edge_verts_.size(); ++e) {
            if (!edge_alive_[e]) continue;
            row_of_edge_[e] = static_cast<int>(live_rows_.size());
            live_rows_.push_back(static_cast<int>(e));
            edge_lookup_[key(edge_verts_[e].first, edge_verts_[e].second)] = static_cast<int>(e);
        }
    }

    int lookup_edge(int u, int v) const {
        auto it = edge_lookup_.find(key(u, v));
        return it == edge_lookup_.end() ? -1 : it->second;
    }

    bool face_has(int f, int x) const {
        return faces_[f][0] == x || faces_[f][1] == x || faces_[f][2] == x;
    }
    int face_third(int f, int u, int v) const {
        for (int k = 0; k < 3; ++k)
            if (faces_[f][k] != u && faces_[f][k] != v) return faces_[f][k];
        return -1;
    }

    bool collapse_valid(int e) const {
        int f1 = edge_faces_[e][0], f2 = edge_faces_[e][1];
        if (f1 < 0 || f2 < 0) return false;  // boundary edge
        auto [u, v] = edge_verts_[e];
        int p = face_third(f1, u, v), q = face_third(f2, u, v);
        if (p < 0 || q < 0 || p == q) return false;
        // shared one-ring must be exactly {p, q}
        std::set<int> common;
        std::set_intersection(nbrs_[u].begin(), nbrs_[u].end(), nbrs_[v].begin(), nbrs_[v].end(),
                              std::inserter(common, common.begin()));
        if (common != std::set<int>{p, q}) return false;
        // all four side edges present, alive and distinct
        std::set<int> sides;
        for (auto [a, b] : {std::pair{u, p}, {v, p}, {u, q}, {v, q}}) {
            int s = lookup_edge(a, b);
            if (s < 0 || !edge_alive_[s] || s == e) return false;
            sides.insert(s);
        }
        if (sides.size() != 4) return false;
        // fused edges must stay manifold: each side pair contributes at most
        // one outside face
        auto outside_faces = [&](int s, int dead1, int dead2) {
            int cnt = 0;
            for (int k = 0; k < 2; ++k) {
                int f = edge_faces_[s][k];
                if (f >= 0 && f != dead1 && f != dead2) ++cnt;
            }
            return cnt;
        };
        int ap = lookup_edge(u, p), bp = lookup_edge(v, p);
        int aq = lookup_edge(u, q), bq = lookup_edge(v, q);
        if (outside_faces(ap, f1, f2) + outside_faces(bp, f1, f2) > 2) return false;
        if (outside_faces(aq, f1, f2) + outside_faces(bq, f1, f2) > 2) return false;
        return true;
    }

    void do_collapse(int e, std::map<int, std::map<int, double>>& lineage, int layer, int step,
                     double magnitude) {
        int f1 = edge_faces_[e][0], f2 = edge_faces_[e][1];
        auto [u, v] = edge_verts_[e];
        int p = face_third(f1, u, v), q = face_third(f2, u, v);

        history_.push_back({layer, step, e, magnitude});
        for (int orig : members_[e]) {
            exported_[orig] = magnitude;
            assigned_[orig] = 1;
        }

        // retire the collapsed edge and its two triangles
        edge_alive_[e] = 0;
        face_alive_[f1] = 0;
        face_alive_[f2] = 0;

        // fuse the side pairs into fresh edges
        auto fuse = [&](int s1, int s2, int w) {
            int id = static_cast<int>(edge_verts_.size());
            edge_verts_.emplace_back(std::min(u, w), std::max(u, w));
            edge_alive_.push_back(1);
            std::array<int, 2> fs{-1, -1};
            int cnt = 0;
            for (int s : {s1, s2})
                for (int k = 0; k < 2; ++k) {
                    int f = edge_faces_[s][k];
                    if (f >= 0 && f != f1 && f != f2 && cnt < 2) fs[cnt++] = f;
                }
            edge_faces_.push_back(fs);
            edge_nbrs_.push_back({-1, -1, -1, -1});
            std::vector<int> mem = members_[s1];
            mem.insert(mem.end(), members_[s2].begin(), members_[s2].end());
            members_.push_back(std::move(mem));
            // pooled feature = mean of (side, side, collapsed)
            std::map<int, double> lrow;
            for (int src : {s1, s2, e})
                for (const auto& [col, wgt] : lineage[src]) lrow[col] += wgt / 3.0;
            lineage[id] = std::move(lrow);
            edge_alive_[s1] = 0;
            edge_alive_[s2] = 0;
            lineage.erase(s1);
            lineage.erase(s2);
            return id;
        };
        int ap = lookup_edge(u, p), bp = lookup_edge(v, p);
        int aq = lookup_edge(u, q), bq = lookup_edge(v, q);
        fuse(ap, bp, p);
        fuse(aq, bq, q);
        lineage.erase(e);

        // merge vertex v into u
        nbrs_[u].erase(v);
        nbrs_[v].erase(u);
        for (int w : nbrs_[v]) {
            nbrs_[w].erase(v);
            nbrs_[w].insert(u);
            nbrs_[u].insert(w);
        }
        nbrs_[v].clear();
        std::vector<int> touched_faces;
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            if (!face_alive_[f]) continue;
            bool rel = false;
            for (int k = 0; k < 3; ++k)
                if (faces_[f][k] == v) {
                    faces_[f][k] = u;
                    rel = true;
                }
            if (rel || face_has(static_cast<int>(f), u)) touched_faces.push_back(static_cast<int>(f));
        }

        // rebuild the edge lookup for edges renamed by the vertex merge
        edge_lookup_.clear();
        for (std::size_t ed = 0; ed < edge_verts_.size(); ++ed) {
            if (!edge_alive_[ed]) continue;
            auto& [a, b] = edge_verts_[ed];
            if (a == v) a = u;
            if (b == v) b = u;
            if (a > b) std::swap(a, b);
            edge_lookup_[key(a, b)] = static_cast<int>(ed);
        }

        // face ids are stable, so edge->face slots stay valid; only the
        // neighbor quadruples around the merge need recomputing
        for (int f : touched_faces)
            for (int k = 0; k < 3; ++k) {
                int ed = lookup_edge(faces_[f][k], faces_[f][(k + 1) % 3]);
                if (ed >= 0) refresh_neighbors(ed);
            }
    }

    void refresh_neighbors(int e) {
        auto [u, v] = edge_verts_[e];
        edge_nbrs_[e] = {-1, -1, -1, -1};
        for (int slot = 0; slot < 2; ++slot) {
            int f = edge_faces_[e][slot];
            if (f < 0) continue;
            // follow the face winding after the shared edge
            for (int k = 0; k < 3; ++k) {
                int a = faces_[f][k], b = faces_[f][(k + 1) % 3], c = faces_[f][(k + 2) % 3];
                if ((a == u && b == v) || (a == v && b == u)) {
                    edge_nbrs_[e][slot * 2 + 0] = lookup_edge(b, c);
                    edge_nbrs_[e][slot * 2 + 1] = lookup_edge(c, a);
                    break;
                }
            }
        }
        // boundary edges keep their pair in the leading slots
        if (edge_faces_[e][0] < 0 && edge_faces_[e][1] >= 0) {
            edge_faces_[e] = {edge_faces_[e][1], -1};
            edge_nbrs_[e] = {edge_nbrs_[e][2], edge_nbrs_[e][3], -1, -1};
        }
    }
};

struct EdgeConvLayer {
    Parameter kernel;  // [5*F_in, F_out]
    Parameter bias;    // [F_out]

    EdgeConvLayer() = default;
    EdgeConvLayer(const std::string& name, std::size_t f_in, std::size_t f_out, Rng& rng)
        : kernel(name + ".kernel", glorot_uniform(5 * f_in, f_out, rng)),
          bias(name + ".bias", Tensor::zeros({f_out})) {}

    void collect(std::vector<Parameter*>& out) {
        out.push_back(&kernel);
        out.push_back(&bias);
    }
};

// Symmetric neighborhood tuple (x_e, |x_a - x_c|, x_a + x_c, |x_b - x_d|,
// x_b + x_d) over explicit neighbor row indices; absent (-1) neighbors
// contribute zeros. Swapping the face pairs (ia,ib) <-> (ic,id) leaves the
// result unchanged exactly.
inline Tensor edge_symmetric_tuple(const Tensor& features, const std::vector<int>& ia,
                                   const std::vector<int>& ib, const std::vector<int>& ic,
                                   const std::vector<int>& id) {
    Tensor xa = ops::row_gather(features, ia);
    Tensor xb = ops::row_gather(features, ib);
    Tensor xc = ops::row_gather(features, ic);
    Tensor xd = ops::row_gather(features, id);
    return ops::concat_cols({features, ops::absolute(ops::sub(xa, xc)), ops::add(xa, xc),
                             ops::absolute(ops::sub(xb, xd)), ops::add(xb, xd)});
}

// Order-invariant edge convolution over the live-edge neighborhood.
inline Tensor edge_conv(const EdgeConvLayer& layer, const Tensor& features,
                        const EdgeFeatureMesh& efm) {
    const std::size_t rows = features.rows();
    if (rows != static_cast<std::size_t>(efm.live_edge_count()))
        throw std::runtime_error("edge_conv: feature rows do not match live edges");
    if (5 * features.cols() != layer.kernel.value.shape()[0])
        throw std::runtime_error("edge_conv: kernel width mismatch");
    std::vector<int> ia(rows), ib(rows), ic(rows), id(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        auto nb = efm.neighbor_rows(static_cast<int>(r));
        ia[r] = nb[0];
        ib[r] = nb[1];
        ic[r] = nb[2];
        id[r] = nb[3];
    }
    Tensor tuple = edge_symmetric_tuple(features, ia, ib, ic, id);
    return ops::add_rows(ops::matmul(tuple, layer.kernel.value), layer.bias.value);
}

}  // namespace meshnets
