#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "meshnets/rng.hpp"
#include "meshnets/tensor.hpp"

namespace meshnets {

struct Parameter {
    std::string name;
    Tensor value;

    Parameter() = default;
    Parameter(std::string n, Tensor t) : name(std::move(n)), value(std::move(t)) {
        value.set_requires_grad(true);
    }

    std::size_t numel() const { return value.numel(); }
};

// Glorot-style uniform init: [-s, s], s = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (auto& x : w) x = rng.uniform(-s, s);
    return Tensor::from(std::move(w), {fan_in, fan_out});
}

struct Linear {
    Parameter weight;  // [in, out]
    Parameter bias;    // [out]

    Linear() = default;
    Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
        : weight(name + ".weight", glorot_uniform(in, out, rng)),
          bias(name + ".bias", Tensor::zeros({out})) {}

    Tensor forward(const Tensor& x) const {
        return ops::add_rows(ops::matmul(x, weight.value), bias.value);
    }

    void collect(std::vector<Parameter*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

// Dense stack with ReLU between hidden layers (none after the last).
// widths = [in, h1, ..., out]; a single width means the identity.
struct Mlp {
    std::vector<Linear> layers;

    Mlp() = default;
    Mlp(const std::string& name, const std::vector<std::size_t>& widths, Rng& rng) {
        if (widths.empty()) throw std::runtime_error("Mlp: empty width list");
        for (std::size_t i = 0; i + 1 < widths.size(); ++i)
            layers.emplace_back(name + ".l" + std::to_string(i), widths[i], widths[i + 1], rng);
    }

    Tensor forward(Tensor x) const {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            x = layers[i].forward(x);
            if (i + 1 < layers.size()) x = ops::relu(x);
        }
        return x;
    }

    void collect(std::vector<Parameter*>& out) {
        for (auto& l : layers) l.collect(out);
    }
};

inline std::size_t count_parameters(const std::vector<Parameter*>& params) {
    std::size_t total = 0;
    for (const auto* p : params) total += p->numel();
    return total;
}

inline void zero_grads(const std::vector<Parameter*>& params) {
    for (auto* p : params) p->value.zero_grad();
}

// Standard Adam with bias correction. State is kept per parameter slot and
// initialized to zeros at t = 0.
struct Adam {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<std::vector<double>> m, v;
    long t = 0;

    Adam() = default;
    Adam(double lr_, double b1, double b2, double eps_) : lr(lr_), beta1(b1), beta2(b2), eps(eps_) {}

    void step(const std::vector<Parameter*>& params) {
        if (m.empty()) {
            for (const auto* p : params) {
                m.emplace_back(p->numel(), 0.0);
                v.emplace_back(p->numel(), 0.0);
            }
        }
        if (m.size() != params.size()) throw std::runtime_error("adam: parameter list changed");
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& val = params[i]->value.data();
            const auto& g = params[i]->value.grad();
            if (g.size() != val.size() || m[i].size() != val.size())
                throw std::runtime_error("adam: gradient/state shape mismatch");
            for (std::size_t j = 0; j < val.size(); ++j) {
                m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g[j];
                v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g[j] * g[j];
                double mhat = m[i][j] / c1;
                double vhat = v[i][j] / c2;
                val[j] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

// Checkpoint: magic, count, then per tensor: name, shape, raw little-endian
// float64 payload.
namespace detail {
static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}
}  // namespace detail

inline void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write("MNCKPT1\n", 8);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto* p : params) {
        detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        const auto& shape = p->value.shape();
        detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
        for (auto d : shape) detail::write_pod<std::uint64_t>(out, d);
        out.write(reinterpret_cast<const char*>(p->value.data().data()),
                  static_cast<std::streamsize>(p->value.numel() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline void load_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "MNCKPT1\n", 8) != 0)
        throw std::runtime_error(path + ": not a checkpoint file");
    auto n = detail::read_pod<std::uint32_t>(in);
    std::vector<std::pair<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>>> entries;
    for (std::uint32_t i = 0; i < n; ++i) {
        auto name_len = detail::read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        auto ndim = detail::read_pod<std::uint32_t>(in);
        std::vector<std::size_t> shape(ndim);
        std::size_t numel = 1;
        for (auto& d : shape) {
            d = detail::read_pod<std::uint64_t>(in);
            numel *= d;
        }
        std::vector<double> data(numel);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(numel * sizeof(double)));
        if (!in) throw std::runtime_error(path + ": truncated tensor payload");
        entries.emplace_back(std::move(name), std::make_pair(std::move(shape), std::move(data)));
    }
    for (auto* p : params) {
        auto it = std::find_if(entries.begin(), entries.end(),
                               [&](const auto& e) { return e.first == p->name; });
        if (it == entries.end())
            throw std::runtime_error(path + ": missing parameter '" + p->name + "'");
        if (it->second.first != p->value.shape())
            throw std::runtime_error(path + ": shape mismatch for '" + p->name + "'");
        p->value.data() = it->second.second;
    }
}

}  // namespace meshnets
