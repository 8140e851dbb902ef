// meshclass: dataset generation, template decimation, training, evaluation,
// and edge-importance export for the mesh classifier benchmark.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "meshnets/dataset.hpp"
#include "meshnets/decimation.hpp"
#include "meshnets/mesh_io.hpp"
#include "meshnets/models.hpp"
#include "meshnets/spiral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace meshnets;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(path + ": " + std::string(e.what()));
    }
    return j;
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& context) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError("unknown key '" + context + "." + it.key() + "'");
    }
}

const std::vector<std::string> kDatasetKeys = {
    "template_subdivisions", "samples_per_class", "test_fraction", "site0", "site1",
    "amp0_mean", "amp0_std", "amp1_mean", "amp1_std", "bump_width", "deform_scale",
    "rotation_augment", "vary_topology", "seed", "separability_floor"};
const std::vector<std::string> kModelKeys = {
    "model", "conv_widths", "cheb_order", "spiral_length", "pool_factors", "edge_pool_ratios",
    "kc_kernels", "kc_points", "kc_sigma", "frc_widths", "spatial_width", "meshnet_combine",
    "meshnet_aggregate", "head_widths"};
const std::vector<std::string> kTrainKeys = {"lr",     "beta1",      "beta2", "eps",
                                             "epochs", "batch_size", "seed"};

// --set section.key=value overrides, values parsed as JSON where possible
void apply_overrides(json& cfg, const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + s + "' is not key=value");
        std::string key = s.substr(0, eq), value = s.substr(eq + 1);
        auto dot = key.find('.');
        if (dot == std::string::npos)
            throw ConfigError("override key '" + key + "' must be section.key");
        std::string section = key.substr(0, dot), field = key.substr(dot + 1);
        if (section != "dataset" && section != "model" && section != "train")
            throw ConfigError("unknown override section '" + section + "'");
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (...) {
            parsed = value;  // plain strings (model names) need no quoting
        }
        cfg[section][field] = parsed;
    }
}

void validate_config(const json& cfg) {
    reject_unknown_keys(cfg, {"dataset", "model", "train"}, "config");
    if (cfg.contains("dataset")) reject_unknown_keys(cfg["dataset"], kDatasetKeys, "dataset");
    if (cfg.contains("model")) reject_unknown_keys(cfg["model"], kModelKeys, "model");
    if (cfg.contains("train")) reject_unknown_keys(cfg["train"], kTrainKeys, "train");
}

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("MESHCLASS_SEED");
    if (!s || !*s) return std::nullopt;
    return std::strtoull(s, nullptr, 10);
}

RunConfig run_config_from(const json& cfg, const std::string& model_flag) {
    std::string name = model_flag;
    if (name.empty() && cfg.contains("model") && cfg["model"].contains("model"))
        name = cfg["model"]["model"].get<std::string>();
    if (name.empty()) throw ConfigError("no model selected (use --model or model.model)");
    RunConfig rc = default_config(model_from_name(name));

    json flat = config_to_json(rc);
    if (cfg.contains("model"))
        for (auto it = cfg["model"].begin(); it != cfg["model"].end(); ++it)
            flat[it.key()] = it.value();
    if (cfg.contains("train"))
        for (auto it = cfg["train"].begin(); it != cfg["train"].end(); ++it)
            flat[it.key()] = it.value();
    flat["model"] = name;
    rc = config_from_json(flat);

    bool seed_given = cfg.contains("train") && cfg["train"].contains("seed");
    if (!seed_given)
        if (auto es = env_seed()) rc.seed = *es;  // last-resort override
    if (rc.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (rc.epochs < 0) throw ConfigError("train.epochs must be >= 0");
    return rc;
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

Dataset load_dataset_checked(const std::string& dir) {
    try {
        return load_dataset(dir);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

json effective_config_json(const json& cfg, const RunConfig& rc) {
    json out;
    if (cfg.contains("dataset")) out["dataset"] = cfg["dataset"];
    out["model"] = config_to_json(rc);
    out["train"] = {{"lr", rc.lr},   {"beta1", rc.beta1},   {"beta2", rc.beta2},
                    {"eps", rc.eps}, {"epochs", rc.epochs}, {"batch_size", rc.batch_size},
                    {"seed", rc.seed}};
    return out;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 const std::vector<std::string>& sets) {
    json cfg = config_path.empty() ? json{{"dataset", json::object()}} : load_json(config_path);
    apply_overrides(cfg, sets);
    validate_config(cfg);
    if (!cfg.contains("dataset")) throw ConfigError("config lacks a 'dataset' section");
    SynthSpec spec = spec_from_json(cfg["dataset"]);
    if (auto es = env_seed(); es && !cfg["dataset"].contains("seed")) spec.seed = *es;
    Dataset ds = generate(spec);
    save_dataset(ds, out_dir);
    double floor = separability_check(ds);
    json echo = cfg;
    echo["dataset"]["separability_floor"] = floor;
    write_text(fs::path(out_dir) / "config.json", echo.dump(2) + "\n");
    std::cout << "dataset written to " << out_dir << " (train " << ds.train.size() << ", test "
              << ds.test.size() << ", separability floor " << floor << ")\n";
    return 0;
}

int cmd_decimate(const std::string& mesh_path, const std::string& factors_csv,
                 const std::string& out_dir, int spiral_length) {
    TriMesh mesh;
    try {
        mesh = load_mesh(mesh_path);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    std::vector<double> factors;
    std::size_t pos = 0;
    while (pos < factors_csv.size()) {
        auto comma = factors_csv.find(',', pos);
        try {
            factors.push_back(std::stod(factors_csv.substr(pos, comma - pos)));
        } catch (...) {
            throw ConfigError("bad ratio in --factors '" + factors_csv + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (factors.empty()) throw ConfigError("--factors must name at least one ratio");
    auto h = build_hierarchy(mesh, factors);
    save_hierarchy(h, out_dir);
    for (std::size_t l = 0; l < h.levels.size(); ++l)
        save_spiral_table(build_spirals(h.levels[l], spiral_length),
                          (fs::path(out_dir) / ("spirals_" + std::to_string(l) + ".txt")).string());
    std::cout << "hierarchy with " << h.levels.size() << " levels written to " << out_dir << "\n";
    for (const auto& lvl : h.levels) std::cout << "  level: " << lvl.vertex_count() << " vertices\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& model_flag,
              const std::string& data_dir, const std::string& out_dir,
              const std::vector<std::string>& sets) {
    json cfg = config_path.empty() ? json::object() : load_json(config_path);
    apply_overrides(cfg, sets);
    validate_config(cfg);
    RunConfig rc = run_config_from(cfg, model_flag);
    rc.dataset_path = data_dir;

    Dataset ds = load_dataset_checked(data_dir);
    std::unique_ptr<Model> model;
    TrainResult result;
    try {
        model = build_model(rc, &ds.templ);
        result = train(*model, ds, rc);
    } catch (const DivergenceError&) {
        throw;
    } catch (const std::exception& e) {
        // template/topology mismatches are data problems
        if (std::string(e.what()).find("vary_topology") != std::string::npos)
            throw DataError(e.what());
        throw;
    }

    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "config.json", effective_config_json(cfg, rc).dump(2) + "\n");
    save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string(), model->parameters());

    json metrics = metrics_to_json(result.final_test);
    metrics.erase("epoch_seconds");  // timing lives in timing.json; metrics stay deterministic
    metrics["model"] = model_name(rc.model);
    metrics["best_epoch"] = result.best_epoch;
    write_text(fs::path(out_dir) / "metrics.json", metrics.dump(2) + "\n");

    json timing = {{"mean_epoch_seconds", result.mean_epoch_seconds},
                   {"total_seconds", result.total_seconds}};
    write_text(fs::path(out_dir) / "timing.json", timing.dump(2) + "\n");

    json history = json::array();
    for (const auto& e : result.history)
        history.push_back({{"epoch", e.epoch},
                           {"mean_loss", e.mean_loss},
                           {"train", metrics_to_json(e.train)},
                           {"test", metrics_to_json(e.test)},
                           {"train_seconds", e.train_seconds}});
    write_text(fs::path(out_dir) / "history.json", history.dump(2) + "\n");

    std::cout << metrics.dump(2) << "\n";
    return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& split,
             const std::string& data_override) {
    json cfg = load_json((fs::path(run_dir) / "config.json").string());
    RunConfig rc = config_from_json(cfg.at("model"));
    std::string data_dir = data_override.empty() ? rc.dataset_path : data_override;
    Dataset ds = load_dataset_checked(data_dir);
    auto model = build_model(rc, &ds.templ);
    load_checkpoint((fs::path(run_dir) / "checkpoint.bin").string(), model->parameters());
    const auto& samples = split == "train" ? ds.train : ds.test;
    Metrics m;
    try {
        m = evaluate(*model, samples);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    json out = metrics_to_json(m);
    out.erase("epoch_seconds");
    out["model"] = model_name(rc.model);
    out["split"] = split;
    write_text(fs::path(run_dir) / ("eval_" + split + ".json"), out.dump(2) + "\n");
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_export_importance(const std::string& run_dir, const std::string& sample_ref,
                          const std::string& out_path, const std::string& data_override) {
    json cfg = load_json((fs::path(run_dir) / "config.json").string());
    RunConfig rc = config_from_json(cfg.at("model"));
    if (rc.model != ModelId::MeshCnn)
        throw ConfigError("export-importance requires a meshcnn run");
    std::string data_dir = data_override.empty() ? rc.dataset_path : data_override;
    Dataset ds = load_dataset_checked(data_dir);
    auto model = build_model(rc, nullptr);
    load_checkpoint((fs::path(run_dir) / "checkpoint.bin").string(), model->parameters());

    auto slash = sample_ref.find('/');
    if (slash == std::string::npos) throw ConfigError("--sample must look like test/12");
    std::string split = sample_ref.substr(0, slash);
    std::size_t idx = 0;
    try {
        idx = std::stoul(sample_ref.substr(slash + 1));
    } catch (...) {
        throw ConfigError("bad sample index in '" + sample_ref + "'");
    }
    const auto& samples = split == "train" ? ds.train : ds.test;
    if (idx >= samples.size()) throw DataError("sample index out of range");

    auto* meshcnn = dynamic_cast<MeshCnnModel*>(model.get());
    std::unique_ptr<EdgeFeatureMesh> efm;
    {
        NoGradGuard ng;
        meshcnn->forward_with_mesh(samples[idx], efm);
    }
    efm->export_importance(out_path);
    std::cout << "edge importance written to " << out_path << "\n";
    return 0;
}

int cmd_report(const std::string& runs_dir, const std::string& json_out) {
    std::vector<std::pair<std::string, Metrics>> rows;
    json combined = json::array();
    std::vector<fs::path> dirs;
    for (const auto& ent : fs::directory_iterator(runs_dir))
        if (ent.is_directory() && fs::exists(ent.path() / "metrics.json"))
            dirs.push_back(ent.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        json m = load_json((dir / "metrics.json").string());
        Metrics metrics = metrics_from_json(m);
        if (fs::exists(dir / "timing.json")) {
            json t = load_json((dir / "timing.json").string());
            metrics.epoch_seconds = t.value("mean_epoch_seconds", 0.0);
        }
        std::string name = m.value("model", dir.filename().string());
        rows.push_back({name, metrics});
        json row = m;
        row["run"] = dir.filename().string();
        row["mean_epoch_seconds"] = metrics.epoch_seconds;
        combined.push_back(row);
    }
    if (rows.empty()) throw DataError("no runs with metrics.json under " + runs_dir);
    std::cout << metrics_table(rows);
    if (!json_out.empty()) write_text(json_out, combined.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mesh classifier benchmark"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, model_flag, mesh_path, factors, run_dir;
    std::string split = "test", sample_ref, json_out, data_override, runs_dir;
    int spiral_length = 9;
    std::vector<std::string> sets;

    auto* gen = app.add_subcommand("generate-data", "generate a synthetic dataset directory");
    gen->add_option("--config", config_path, "JSON config with a 'dataset' section");
    gen->add_option("--out", out_dir, "output dataset directory")->required();
    gen->add_option("--set", sets, "override config values (section.key=value)");

    auto* dec = app.add_subcommand("decimate", "build and cache a pooling hierarchy");
    dec->add_option("--mesh", mesh_path, "template mesh (off/obj/ply)")->required();
    dec->add_option("--factors", factors, "comma-separated reduction ratios")->required();
    dec->add_option("--out", out_dir, "output cache directory")->required();
    dec->add_option("--spiral-length", spiral_length, "spiral table length");

    auto* tr = app.add_subcommand("train", "train a model on a dataset");
    tr->add_option("--config", config_path, "JSON config (model/train sections)");
    tr->add_option("--model", model_flag, "model id: come|spiralnet|meshcnn|meshnet|pointnet");
    tr->add_option("--data", data_dir, "dataset directory")->required();
    tr->add_option("--out", out_dir, "run output directory")->required();
    tr->add_option("--set", sets, "override config values (section.key=value)");

    auto* ev = app.add_subcommand("eval", "re-evaluate a stored run");
    ev->add_option("--run", run_dir, "run directory")->required();
    ev->add_option("--split", split, "train or test");
    ev->add_option("--data", data_override, "override the recorded dataset path");

    auto* ex = app.add_subcommand("export-importance", "export per-edge pooling magnitudes");
    ex->add_option("--run", run_dir, "meshcnn run directory")->required();
    ex->add_option("--sample", sample_ref, "sample reference, e.g. test/12")->required();
    ex->add_option("--out", out_dir, "output .edgeattr path")->required();
    ex->add_option("--data", data_override, "override the recorded dataset path");

    auto* rep = app.add_subcommand("report", "tabulate metrics across runs");
    rep->add_option("--runs", runs_dir, "directory of run directories")->required();
    rep->add_option("--json", json_out, "also write a combined JSON report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_generate(config_path, out_dir, sets);
        if (dec->parsed()) return cmd_decimate(mesh_path, factors, out_dir, spiral_length);
        if (tr->parsed()) return cmd_train(config_path, model_flag, data_dir, out_dir, sets);
        if (ev->parsed()) return cmd_eval(run_dir, split, data_override);
        if (ex->parsed()) return cmd_export_importance(run_dir, sample_ref, out_dir, data_override);
        if (rep->parsed()) return cmd_report(runs_dir, json_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
