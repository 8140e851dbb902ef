#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "meshnets/dataset.hpp"
#include "meshnets/decimation.hpp"
#include "meshnets/edge_net.hpp"
#include "meshnets/face_net.hpp"
#include "meshnets/nn.hpp"
#include "meshnets/spectral.hpp"
#include "meshnets/spiral.hpp"
#include "meshnets/tensor.hpp"

namespace meshnets {

enum class ModelId { Come, SpiralNet, MeshCnn, MeshNet, PointNet };

inline const char* model_name(ModelId id) {
    switch (id) {
        case ModelId::Come: return "come";
        case ModelId::SpiralNet: return "spiralnet";
        case ModelId::MeshCnn: return "meshcnn";
        case ModelId::MeshNet: return "meshnet";
        case ModelId::PointNet: return "pointnet";
    }
    return "?";
}

inline ModelId model_from_name(const std::string& s) {
    for (ModelId id : {ModelId::Come, ModelId::SpiralNet, ModelId::MeshCnn, ModelId::MeshNet,
                       ModelId::PointNet})
        if (s == model_name(id)) return id;
    throw std::runtime_error("unknown model '" + s + "'");
}

inline bool is_template_based(ModelId id) {
    return id == ModelId::Come || id == ModelId::SpiralNet;
}

struct RunConfig {
    ModelId model = ModelId::Come;
    // architecture (defaults are paper-unspecified choices, see provenance)
    std::vector<std::size_t> conv_widths;          // per conv layer
    std::size_t cheb_order = 6;                    // K
    int spiral_length = 9;                         // l
    std::vector<double> pool_factors{0.25, 0.25, 0.25, 0.4};
    std::vector<double> edge_pool_ratios;          // meshcnn, per block
    std::size_t kc_kernels = 4, kc_points = 3;
    double kc_sigma = 0.2;
    std::vector<std::size_t> frc_widths{16, 8};    // pair hidden, out channels
    std::size_t spatial_width = 64;
    std::vector<std::size_t> meshnet_combine{24};  // spatial' per block
    std::vector<std::size_t> meshnet_aggregate{12};
    std::vector<std::size_t> head_widths;          // classifier head (excl. input)
    // training
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int epochs = 20, batch_size = 16;
    std::uint64_t seed = 1;
    std::string dataset_path;
};

// Paper-unspecified defaults sized so the parameter counts land in the
// reference ordering come < spiralnet < meshcnn < pointnet < meshnet.
inline RunConfig default_config(ModelId id) {
    RunConfig c;
    c.model = id;
    switch (id) {
        case ModelId::Come:
            c.conv_widths = {16, 16, 16, 32};
            c.head_widths = {2};
            c.lr = 3e-3;
            c.epochs = 12;
            break;
        case ModelId::SpiralNet:
            c.conv_widths = {16, 16, 16, 32};
            c.head_widths = {2};
            c.lr = 3e-3;
            c.epochs = 12;
            break;
        case ModelId::MeshCnn:
            c.conv_widths = {16, 32, 32};
            c.edge_pool_ratios = {0.75, 0.75, 0.75};
            c.head_widths = {96, 2};
            c.epochs = 5;
            break;
        case ModelId::MeshNet:
            c.conv_widths = {};  // unused
            c.head_widths = {1024, 1024, 2};
            c.meshnet_combine = {24, 24, 24};
            c.meshnet_aggregate = {12, 12, 12};
            c.epochs = 6;
            break;
        case ModelId::PointNet:
            c.conv_widths = {16, 16, 512};  // shared MLP widths
            c.head_widths = {1024, 2};
            c.epochs = 10;
            break;
    }
    return c;
}

// fields whose values are choices, not paper facts
inline nlohmann::json config_provenance() {
    return {
        {"cheb_order", "paper-unspecified default"},
        {"spiral_length", "paper-unspecified default"},
        {"pool_factors", "paper-unspecified default"},
        {"edge_pool_ratios", "paper-unspecified default"},
        {"conv_widths", "paper-unspecified default"},
        {"head_widths", "paper-unspecified default"},
        {"kc_kernels", "paper-unspecified default"},
        {"kc_points", "paper-unspecified default"},
        {"kc_sigma", "paper-unspecified default"},
        {"lr", "paper-unspecified default"},
        {"epochs", "paper-unspecified default"},
        {"batch_size", "paper-unspecified default"},
        {"optimizer", "adam, paper-unspecified default"},
    };
}

struct Metrics {
    double accuracy = 0.0, precision = 0.0, recall = 0.0;
    std::size_t parameter_count = 0;
    double epoch_seconds = 0.0;
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

// positive class = label 1
inline Metrics compute_metrics(const std::vector<int>& pred, const std::vector<int>& labels) {
    if (pred.size() != labels.size() || pred.empty())
        throw std::runtime_error("compute_metrics: empty or mismatched predictions");
    Metrics m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (labels[i] == 1)
            (pred[i] == 1 ? m.tp : m.fn)++;
        else
            (pred[i] == 1 ? m.fp : m.tn)++;
    }
    const double total = static_cast<double>(pred.size());
    m.accuracy = static_cast<double>(m.tp + m.tn) / total;
    m.precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
    m.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
    return m;
}

// Template-side structures shared by every forward pass of a template-based
// model: pooling hierarchy plus per-level Laplacians or spiral tables. The
// counters let tests assert that per-sample forwards never rebuild them.
struct TemplateCache {
    PoolHierarchy hierarchy;
    std::vector<ScaledLaplacian> laplacians;
    std::vector<SpiralTable> spirals;
    long builds = 0;
    mutable std::atomic<long> hits{0};

    static std::shared_ptr<TemplateCache> for_come(const TriMesh& templ,
                                                   const std::vector<double>& factors,
                                                   std::size_t levels) {
        auto c = std::make_shared<TemplateCache>();
        c->hierarchy = build_hierarchy(templ, factors);
        for (std::size_t l = 0; l < levels; ++l)
            c->laplacians.push_back(normalized_laplacian(c->hierarchy.levels[l].neighbors));
        c->builds = 1;
        return c;
    }
    static std::shared_ptr<TemplateCache> for_spiral(const TriMesh& templ,
                                                     const std::vector<double>& factors,
                                                     std::size_t levels, int length) {
        auto c = std::make_shared<TemplateCache>();
        c->hierarchy = build_hierarchy(templ, factors);
        for (std::size_t l = 0; l < levels; ++l)
            c->spirals.push_back(build_spirals(c->hierarchy.levels[l], length));
        c->builds = 1;
        return c;
    }
};

inline Tensor vertex_tensor(const TriMesh& mesh) {
    std::vector<double> x(static_cast<std::size_t>(mesh.vertex_count()) * 3);
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        x[i * 3 + 0] = mesh.vertices[i].x;
        x[i * 3 + 1] = mesh.vertices[i].y;
        x[i * 3 + 2] = mesh.vertices[i].z;
    }
    return Tensor::from(std::move(x), {static_cast<std::size_t>(mesh.vertex_count()), 3});
}

// Template-based models consume the registered deformation field (sample
// minus template), which is zero-mean and carries the shape signal directly.
inline Tensor vertex_offset_tensor(const TriMesh& mesh, const TriMesh& templ) {
    if (mesh.vertex_count() != templ.vertex_count())
        throw std::runtime_error("vertex_offset_tensor: vertex count mismatch with template");
    std::vector<double> x(static_cast<std::size_t>(mesh.vertex_count()) * 3);
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        Vec3 d = mesh.vertices[i] - templ.vertices[i];
        x[i * 3 + 0] = d.x;
        x[i * 3 + 1] = d.y;
        x[i * 3 + 2] = d.z;
    }
    return Tensor::from(std::move(x), {static_cast<std::size_t>(mesh.vertex_count()), 3});
}

// Per-sample channel standardization (zero mean, unit variance over rows).
// Applied by models whose raw inputs carry a large common-mode offset, e.g.
// the near-pi dihedral baseline of edge features.
inline Tensor standardize_rows(const Tensor& x) {
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> mean(n, 0.0), sd(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) mean[j] += x(i, j);
    for (auto& v : mean) v /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double d = x(i, j) - mean[j];
            sd[j] += d * d;
        }
    for (auto& v : sd) v = std::sqrt(v / static_cast<double>(m > 1 ? m - 1 : 1));
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] = (x(i, j) - mean[j]) / (sd[j] > 1e-12 ? sd[j] : 1.0);
    return Tensor::from(std::move(out), {m, n});
}

class Model {
public:
    virtual ~Model() = default;
    virtual Tensor forward(const Sample& sample) const = 0;
    virtual ModelId id() const = 0;
    bool requires_template() const { return is_template_based(id()); }

    std::vector<Parameter*>& parameters() { return params_; }
    const std::vector<Parameter*>& parameters() const { return params_; }
    std::size_t parameter_count() const { return count_parameters(params_); }

    void check_sample(const Sample& s) const {
        if (requires_template() && !s.shares_template)
            throw std::runtime_error(std::string(model_name(id())) +
                                     " requires template-correspondent samples "
                                     "(vary_topology datasets are rejected)");
    }

protected:
    std::vector<Parameter*> params_;
};

class ComeModel : public Model {
public:
    ComeModel(const RunConfig& cfg, const TriMesh& templ, std::shared_ptr<TemplateCache> cache)
        : cfg_(cfg), cache_(std::move(cache)) {
        if (cfg.conv_widths.size() != cfg.pool_factors.size())
            throw std::runtime_error("come: conv_widths must match pool level count");
        if (!cache_) cache_ = TemplateCache::for_come(templ, cfg.pool_factors, cfg.conv_widths.size());
        Rng rng(cfg.seed ^ 0xc0e0);
        std::size_t in = 3;
        for (std::size_t l = 0; l < cfg.conv_widths.size(); ++l) {
            convs_.emplace_back("conv" + std::to_string(l), cfg.cheb_order, in, cfg.conv_widths[l], rng);
            in = cfg.conv_widths[l];
        }
        std::vector<std::size_t> head{in};
        head.insert(head.end(), cfg.head_widths.begin(), cfg.head_widths.end());
        head_ = Mlp("head", head, rng);
        for (auto& c : convs_) c.collect(params_);
        head_.collect(params_);
    }

    Tensor forward(const Sample& sample) const override {
        check_sample(sample);
        cache_->hits++;
        Tensor x = vertex_offset_tensor(sample.mesh, cache_->hierarchy.levels[0]);
        for (std::size_t l = 0; l < convs_.size(); ++l) {
            x = ops::relu(cheb_conv(convs_[l], cache_->laplacians[l], x));
            x = ops::spmm(cache_->hierarchy.down_maps[l], x);
        }
        return head_.forward(ops::reduce_mean_rows(x));
    }

    ModelId id() const override { return ModelId::Come; }
    TemplateCache& cache() { return *cache_; }
    std::shared_ptr<TemplateCache> cache_ptr() { return cache_; }

private:
    RunConfig cfg_;
    std::shared_ptr<TemplateCache> cache_;
    std::vector<ChebConvLayer> convs_;
    Mlp head_;
};

class SpiralModel : public Model {
public:
    SpiralModel(const RunConfig& cfg, const TriMesh& templ, std::shared_ptr<TemplateCache> cache)
        : cfg_(cfg), cache_(std::move(cache)) {
        if (cfg.conv_widths.size() != cfg.pool_factors.size())
            throw std::runtime_error("spiralnet: conv_widths must match pool level count");
        if (!cache_)
            cache_ = TemplateCache::for_spiral(templ, cfg.pool_factors, cfg.conv_widths.size(),
                                               cfg.spiral_length);
        Rng rng(cfg.seed ^ 0x591a);
        std::size_t in = 3;
        for (std::size_t l = 0; l < cfg.conv_widths.size(); ++l) {
            convs_.emplace_back("conv" + std::to_string(l), cfg.spiral_length, in, cfg.conv_widths[l], rng);
            in = cfg.conv_widths[l];
        }
        std::vector<std::size_t> head{in};
        head.insert(head.end(), cfg.head_widths.begin(), cfg.head_widths.end());
        head_ = Mlp("head", head, rng);
        for (auto& c : convs_) c.collect(params_);
        head_.collect(params_);
    }

    Tensor forward(const Sample& sample) const override {
        check_sample(sample);
        cache_->hits++;
        Tensor x = vertex_offset_tensor(sample.mesh, cache_->hierarchy.levels[0]);
        for (std::size_t l = 0; l < convs_.size(); ++l) {
            x = ops::relu(spiral_conv(convs_[l], x, cache_->spirals[l]));
            x = ops::spmm(cache_->hierarchy.down_maps[l], x);
        }
        return head_.forward(ops::reduce_mean_rows(x));
    }

    ModelId id() const override { return ModelId::SpiralNet; }
    TemplateCache& cache() { return *cache_; }
    std::shared_ptr<TemplateCache> cache_ptr() { return cache_; }

private:
    RunConfig cfg_;
    std::shared_ptr<TemplateCache> cache_;
    std::vector<SpiralConvLayer> convs_;
    Mlp head_;
};

class MeshCnnModel : public Model {
public:
    explicit MeshCnnModel(const RunConfig& cfg) : cfg_(cfg) {
        if (cfg.conv_widths.size() != cfg.edge_pool_ratios.size())
            throw std::runtime_error("meshcnn: conv_widths must match edge_pool_ratios");
        Rng rng(cfg.seed ^ 0xece0);
        std::size_t in = 5;
        for (std::size_t l = 0; l < cfg.conv_widths.size(); ++l) {
            convs_.emplace_back("conv" + std::to_string(l), in, cfg.conv_widths[l], rng);
            in = cfg.conv_widths[l];
        }
        std::vector<std::size_t> head{in};
        head.insert(head.end(), cfg.head_widths.begin(), cfg.head_widths.end());
        head_ = Mlp("head", head, rng);
        for (auto& c : convs_) c.collect(params_);
        head_.collect(params_);
    }

    Tensor forward(const Sample& sample) const override { return run(sample, nullptr); }

    // exposes the pooled EdgeFeatureMesh for the importance export
    Tensor forward_with_mesh(const Sample& sample, std::unique_ptr<EdgeFeatureMesh>& out) const {
        std::unique_ptr<EdgeFeatureMesh> efm;
        Tensor logits = run(sample, &efm);
        out = std::move(efm);
        return logits;
    }

    ModelId id() const override { return ModelId::MeshCnn; }

private:
    RunConfig cfg_;
    std::vector<EdgeConvLayer> convs_;
    Mlp head_;

    Tensor run(const Sample& sample, std::unique_ptr<EdgeFeatureMesh>* keep) const {
        Tensor x = standardize_rows(edge_input_features(sample.mesh));
        auto efm = std::make_unique<EdgeFeatureMesh>(sample.mesh);
        for (std::size_t l = 0; l < convs_.size(); ++l) {
            x = ops::relu(edge_conv(convs_[l], x, *efm));
            int target = static_cast<int>(std::floor(efm->live_edge_count() *
                                                     cfg_.edge_pool_ratios[l]));
            x = efm->edge_pool(x, target);
        }
        Tensor logits = head_.forward(ops::reduce_mean_rows(x));
        if (keep) *keep = std::move(efm);
        return logits;
    }
};

class MeshNetModel : public Model {
public:
    explicit MeshNetModel(const RunConfig& cfg) : cfg_(cfg) {
        Rng rng(cfg.seed ^ 0x3e7);
        spatial_mlp_ = Mlp("spatial", {3, cfg.spatial_width}, rng);
        frc_pair_ = Mlp("frc.pair", {6, cfg.frc_widths[0]}, rng);
        frc_out_ = Mlp("frc.out", {cfg.frc_widths[0], cfg.frc_widths[1]}, rng);
        kc_ = KernelCorrelationLayer("kc", cfg.kc_kernels, cfg.kc_points, cfg.kc_sigma, rng);
        std::size_t spatial_w = cfg.spatial_width;
        std::size_t structural_w = cfg.frc_widths[1] + cfg.kc_kernels;
        if (cfg.meshnet_combine.size() != cfg.meshnet_aggregate.size())
            throw std::runtime_error("meshnet: combine/aggregate width lists must align");
        for (std::size_t l = 0; l < cfg.meshnet_combine.size(); ++l) {
            blocks_.emplace_back("block" + std::to_string(l), spatial_w, structural_w,
                                 cfg.meshnet_combine[l], cfg.meshnet_aggregate[l], rng);
            spatial_w = cfg.meshnet_combine[l];
            structural_w = cfg.meshnet_aggregate[l];
        }
        std::vector<std::size_t> head{spatial_w + structural_w};
        head.insert(head.end(), cfg.head_widths.begin(), cfg.head_widths.end());
        head_ = Mlp("head", head, rng);

        spatial_mlp_.collect(params_);
        frc_pair_.collect(params_);
        frc_out_.collect(params_);
        kc_.collect(params_);
        for (auto& b : blocks_) b.collect(params_);
        head_.collect(params_);
    }

    Tensor forward(const Sample& sample) const override {
        auto fd = face_data(sample.mesh);
        Tensor spatial = ops::relu(spatial_descriptor(fd.centers, spatial_mlp_));
        Tensor frc = ops::relu(face_rotate_conv(fd.corners, frc_pair_, frc_out_));
        Tensor kc = face_kernel_correlation(fd.normals, fd.neighbors, kc_);
        Tensor structural = ops::concat_cols({frc, kc});
        for (const auto& b : blocks_) {
            auto out = mesh_conv(spatial, structural, fd.neighbors, b);
            spatial = ops::relu(out.spatial);
            structural = ops::relu(out.structural);
        }
        Tensor global = ops::reduce_max_rows(ops::concat_cols({spatial, structural}));
        return head_.forward(global);
    }

    ModelId id() const override { return ModelId::MeshNet; }

private:
    RunConfig cfg_;
    Mlp spatial_mlp_, frc_pair_, frc_out_, head_;
    KernelCorrelationLayer kc_;
    std::vector<MeshConvLayer> blocks_;
};

class PointNetModel : public Model {
public:
    explicit PointNetModel(const RunConfig& cfg) : cfg_(cfg) {
        Rng rng(cfg.seed ^ 0x901);
        std::vector<std::size_t> shared{3};
        shared.insert(shared.end(), cfg.conv_widths.begin(), cfg.conv_widths.end());
        shared_ = Mlp("shared", shared, rng);
        std::vector<std::size_t> head{cfg.conv_widths.back()};
        head.insert(head.end(), cfg.head_widths.begin(), cfg.head_widths.end());
        head_ = Mlp("head", head, rng);
        shared_.collect(params_);
        head_.collect(params_);
    }

    Tensor forward(const Sample& sample) const override {
        Tensor x = ops::relu(shared_.forward(vertex_tensor(sample.mesh)));
        return head_.forward(ops::reduce_max_rows(x));
    }

    ModelId id() const override { return ModelId::PointNet; }

private:
    RunConfig cfg_;
    Mlp shared_, head_;
};

// Template required (and used) only by the template-based families.
inline std::unique_ptr<Model> build_model(const RunConfig& cfg, const TriMesh* templ,
                                          std::shared_ptr<TemplateCache> cache = nullptr) {
    if (is_template_based(cfg.model) && templ == nullptr && cache == nullptr)
        throw std::runtime_error(std::string(model_name(cfg.model)) + " requires a template mesh");
    static const TriMesh dummy;
    switch (cfg.model) {
        case ModelId::Come: return std::make_unique<ComeModel>(cfg, templ ? *templ : dummy, cache);
        case ModelId::SpiralNet:
            return std::make_unique<SpiralModel>(cfg, templ ? *templ : dummy, cache);
        case ModelId::MeshCnn: return std::make_unique<MeshCnnModel>(cfg);
        case ModelId::MeshNet: return std::make_unique<MeshNetModel>(cfg);
        case ModelId::PointNet: return std::make_unique<PointNetModel>(cfg);
    }
    throw std::runtime_error("unknown model id");
}

inline int predict(const Model& model, const Sample& sample) {
    NoGradGuard ng;
    Tensor logits = model.forward(sample);
    if (logits.rows() != 1 || logits.cols() != 2)
        throw std::runtime_error("model produced logits of unexpected shape");
    return logits(0, 1) > logits(0, 0) ? 1 : 0;
}

// Evaluation shards across threads; per-sample results land in a fixed
// index-ordered vector, so the reduction is deterministic.
inline Metrics evaluate(const Model& model, const std::vector<Sample>& split,
                        unsigned threads = std::thread::hardware_concurrency()) {
    if (split.empty()) throw std::runtime_error("evaluate: empty split");
    for (const auto& s : split) model.check_sample(s);
    std::vector<int> pred(split.size()), labels(split.size());
    for (std::size_t i = 0; i < split.size(); ++i) labels[i] = split[i].label;
    if (threads <= 1 || split.size() < 8) {
        for (std::size_t i = 0; i < split.size(); ++i) pred[i] = predict(model, split[i]);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= split.size()) break;
                pred[i] = predict(model, split[i]);
            }
        };
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < std::min<unsigned>(threads, 8); ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    Metrics m = compute_metrics(pred, labels);
    m.parameter_count = model.parameter_count();
    return m;
}

struct DivergenceError : std::runtime_error {
    int epoch;
    explicit DivergenceError(int e)
        : std::runtime_error("training diverged (loss is not finite) at epoch " + std::to_string(e)),
          epoch(e) {}
};

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    Metrics train, test;
    double train_seconds = 0.0;  // optimizer pass only
};

struct TrainResult {
    std::vector<EpochRecord> history;
    Metrics final_test;
    int best_epoch = -1;  // epoch whose parameters the model ends up carrying
    double mean_epoch_seconds = 0.0;
    double total_seconds = 0.0;
};

// Seeded mini-batch Adam. The optimizer pass is single-threaded for
// determinism; per-epoch metrics on both splits are recorded.
inline TrainResult train(Model& model, const Dataset& ds, const RunConfig& cfg) {
    if (ds.train.empty() || ds.test.empty()) throw std::runtime_error("train: missing dataset splits");
    if (cfg.batch_size < 1) throw std::runtime_error("train: batch_size must be >= 1");
    for (const auto& s : ds.train) model.check_sample(s);
    for (const auto& s : ds.test) model.check_sample(s);

    Adam opt(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    Rng rng(cfg.seed ^ 0x7a51);
    std::vector<int> order(ds.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    TrainResult result;
    std::vector<std::vector<double>> best_params;
    auto t_start = std::chrono::steady_clock::now();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto e_start = std::chrono::steady_clock::now();
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            std::size_t bsz = std::min<std::size_t>(cfg.batch_size, order.size() - at);
            zero_grads(model.parameters());
            double batch_loss = 0.0;
            for (std::size_t k = 0; k < bsz; ++k) {
                const Sample& s = ds.train[order[at + k]];
                Tensor logits = model.forward(s);
                Tensor loss = ops::scale(
                    ops::cross_entropy_softmax(logits, {s.label}), 1.0 / static_cast<double>(bsz));
                loss.backward();
                batch_loss += loss.item();
            }
            if (!std::isfinite(batch_loss)) throw DivergenceError(epoch);
            opt.step(model.parameters());
            loss_sum += batch_loss;
            ++batches;
        }
        auto e_end = std::chrono::steady_clock::now();

        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        rec.train_seconds = std::chrono::duration<double>(e_end - e_start).count();
        rec.train = evaluate(model, ds.train);
        rec.test = evaluate(model, ds.test);
        result.history.push_back(rec);
        if (result.best_epoch < 0 ||
            rec.test.accuracy > result.history[result.best_epoch].test.accuracy) {
            result.best_epoch = epoch;
            best_params.clear();
            for (auto* p : model.parameters()) best_params.push_back(p->value.data());
        }
    }
    // the model keeps its best-test-accuracy parameters
    if (result.best_epoch >= 0) {
        auto& params = model.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.data() = best_params[i];
    }
    result.final_test = evaluate(model, ds.test);
    if (!result.history.empty()) {
        double sum = 0.0;
        for (const auto& r : result.history) sum += r.train_seconds;
        result.mean_epoch_seconds = sum / static_cast<double>(result.history.size());
    }
    result.final_test.epoch_seconds = result.mean_epoch_seconds;
    result.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

// --- JSON serialization for configs and metrics (CLI + reports) ---

inline nlohmann::json metrics_to_json(const Metrics& m) {
    return {{"accuracy", m.accuracy},
            {"precision", m.precision},
            {"recall", m.recall},
            {"parameter_count", m.parameter_count},
            {"epoch_seconds", m.epoch_seconds},
            {"confusion", {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}}}};
}

inline Metrics metrics_from_json(const nlohmann::json& j) {
    Metrics m;
    m.accuracy = j["accuracy"];
    m.precision = j["precision"];
    m.recall = j["recall"];
    m.parameter_count = j["parameter_count"];
    m.epoch_seconds = j.value("epoch_seconds", 0.0);
    if (j.contains("confusion")) {
        m.tp = j["confusion"]["tp"];
        m.fp = j["confusion"]["fp"];
        m.fn = j["confusion"]["fn"];
        m.tn = j["confusion"]["tn"];
    }
    return m;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    return {{"model", model_name(c.model)},
            {"conv_widths", c.conv_widths},
            {"cheb_order", c.cheb_order},
            {"spiral_length", c.spiral_length},
            {"pool_factors", c.pool_factors},
            {"edge_pool_ratios", c.edge_pool_ratios},
            {"kc_kernels", c.kc_kernels},
            {"kc_points", c.kc_points},
            {"kc_sigma", c.kc_sigma},
            {"frc_widths", c.frc_widths},
            {"spatial_width", c.spatial_width},
            {"meshnet_combine", c.meshnet_combine},
            {"meshnet_aggregate", c.meshnet_aggregate},
            {"head_widths", c.head_widths},
            {"lr", c.lr},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"dataset_path", c.dataset_path},
            {"provenance", config_provenance()}};
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c = default_config(model_from_name(j.at("model")));
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("conv_widths", c.conv_widths);
    get("cheb_order", c.cheb_order);
    get("spiral_length", c.spiral_length);
    get("pool_factors", c.pool_factors);
    get("edge_pool_ratios", c.edge_pool_ratios);
    get("kc_kernels", c.kc_kernels);
    get("kc_points", c.kc_points);
    get("kc_sigma", c.kc_sigma);
    get("frc_widths", c.frc_widths);
    get("spatial_width", c.spatial_width);
    get("meshnet_combine", c.meshnet_combine);
    get("meshnet_aggregate", c.meshnet_aggregate);
    get("head_widths", c.head_widths);
    get("lr", c.lr);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("eps", c.eps);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("seed", c.seed);
    get("dataset_path", c.dataset_path);
    return c;
}

// plain-text table: Method | Template | Acc(%) | Prec | Rec | #Params
inline std::string metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows) {
    std::string out = "Method       Template   Acc(%)   Prec    Rec     #Params\n";
    char buf[160];
    for (const auto& [name, m] : rows) {
        bool templ = is_template_based(model_from_name(name));
        std::snprintf(buf, sizeof(buf), "%-12s %-10s %6.1f   %5.3f   %5.3f   %zu\n", name.c_str(),
                      templ ? "yes" : "no", 100.0 * m.accuracy, m.precision, m.recall,
                      m.parameter_count);
        out += buf;
    }
    return out;
}

}  // namespace meshnets
