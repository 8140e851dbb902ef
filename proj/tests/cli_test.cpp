// Drives the meshclass binary end to end on a tiny dataset: every subcommand,
// the exit-code contract, determinism of metrics, and the self-describing run
// directory. Usage: cli_test <meshclass-path> <scratch-dir>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "meshnets/mesh_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
    std::printf("%s %s\n", ok ? "[ok]" : "[FAIL]", what.c_str());
    if (!ok) ++failures;
}

int run(const std::string& cmd) {
    int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    if (rc == -1) return -1;
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: cli_test <meshclass> <scratch-dir>\n";
        return 2;
    }
    const std::string bin = argv[1];
    const fs::path scratch = argv[2];
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    // tiny but learnable dataset spec
    json cfg = {{"dataset",
                 {{"template_subdivisions", 1},
                  {"samples_per_class", 8},
                  {"amp0_mean", 0.05},
                  {"amp1_mean", 0.45},
                  {"amp0_std", 0.01},
                  {"amp1_std", 0.02},
                  {"seed", 21}}},
                {"model", {{"model", "spiralnet"}, {"conv_widths", {8, 8}}, {"pool_factors", {0.5, 0.5}}}},
                {"train", {{"epochs", 3}, {"batch_size", 4}, {"lr", 0.003}, {"seed", 11}}}};
    {
        std::ofstream out(scratch / "config.json");
        out << cfg.dump(2);
    }

    const std::string data = (scratch / "data").string();
    check(run(bin + " generate-data --config " + (scratch / "config.json").string() + " --out " + data) == 0,
          "generate-data succeeds");
    check(fs::exists(fs::path(data) / "manifest.json"), "manifest.json written");
    check(fs::exists(fs::path(data) / "template.off"), "template.off written");
    check(fs::exists(fs::path(data) / "samples/train/000_0.off"), "train samples written");

    check(run(bin + " generate-data --config " + (scratch / "config.json").string() + " --out " +
              (scratch / "data2").string() + " --set dataset.bogus_key=1") == 2,
          "unknown config key exits 2");
    check(run(bin + " generate-data --out " + (scratch / "data3").string() +
              " --set dataset.not_a_field=3") == 2,
          "unknown override field exits 2");
    check(run(bin + " definitely-not-a-subcommand") == 2, "unknown subcommand exits 2");
    check(run(bin + " train --data /nonexistent --out " + (scratch / "r0").string() +
              " --model pointnet") == 3,
          "missing dataset exits 3");

    // decimate the dataset template into a hierarchy cache
    const std::string hier = (scratch / "hier").string();
    check(run(bin + " decimate --mesh " + data + "/template.off --factors 0.5,0.5 --out " + hier +
              " --spiral-length 6") == 0,
          "decimate succeeds");
    check(fs::exists(fs::path(hier) / "level_2.off"), "hierarchy levels cached");
    check(fs::exists(fs::path(hier) / "down_1.txt"), "down maps cached");
    check(fs::exists(fs::path(hier) / "spirals_0.txt"), "spiral tables cached");
    {
        auto lvl2 = meshnets::load_mesh((fs::path(hier) / "level_2.off").string());
        check(lvl2.vertex_count() == 10, "level 2 has floor(21*0.5)=10 vertices");
    }

    // train twice with the same seed: identical metrics.json
    const std::string cfg_path = (scratch / "config.json").string();
    const std::string run_a = (scratch / "runs" / "spiral_a").string();
    const std::string run_b = (scratch / "runs" / "spiral_b").string();
    check(run(bin + " train --config " + cfg_path + " --data " + data + " --out " + run_a) == 0,
          "train run A succeeds");
    check(run(bin + " train --config " + cfg_path + " --data " + data + " --out " + run_b) == 0,
          "train run B succeeds");
    check(fs::exists(fs::path(run_a) / "checkpoint.bin"), "checkpoint written");
    check(fs::exists(fs::path(run_a) / "history.json"), "history written");
    check(slurp(fs::path(run_a) / "metrics.json") == slurp(fs::path(run_b) / "metrics.json"),
          "same seed gives identical metrics JSON");

    // persisted config echoes overrides
    check(run(bin + " train --config " + cfg_path + " --data " + data + " --out " +
              (scratch / "runs" / "spiral_c").string() + " --set train.epochs=1") == 0,
          "train with override succeeds");
    {
        json stored = json::parse(slurp(scratch / "runs" / "spiral_c" / "config.json"));
        check(stored["train"]["epochs"] == 1, "override echoed into persisted config");
        check(stored["model"].contains("provenance"), "provenance notes persisted");
    }

    // eval reproduces stored metrics from the run directory alone
    check(run(bin + " eval --run " + run_a + " --split test") == 0, "eval succeeds");
    {
        json m = json::parse(slurp(fs::path(run_a) / "metrics.json"));
        json e = json::parse(slurp(fs::path(run_a) / "eval_test.json"));
        check(m["accuracy"] == e["accuracy"] && m["confusion"] == e["confusion"],
              "eval reproduces stored metrics");
    }

    // divergence exit code
    check(run(bin + " train --config " + cfg_path + " --data " + data + " --out " +
              (scratch / "runs" / "diverged").string() + " --set train.lr=1e155 --set train.epochs=2") == 4,
          "divergence exits 4");

    // template model on a vary_topology dataset is a data error
    check(run(bin + " generate-data --config " + cfg_path + " --out " + (scratch / "vt").string() +
              " --set dataset.vary_topology=true --set dataset.template_subdivisions=2") == 0,
          "vary_topology dataset generated");
    check(run(bin + " train --config " + cfg_path + " --data " + (scratch / "vt").string() +
              " --out " + (scratch / "runs" / "vt").string()) == 3,
          "template model on vary_topology data exits 3");

    // meshcnn run + importance export
    const std::string run_m = (scratch / "runs" / "meshcnn").string();
    check(run(bin + " train --model meshcnn --data " + data + " --out " + run_m +
              " --set model.conv_widths=[8,8] --set model.edge_pool_ratios=[0.8,0.8]"
              " --set model.head_widths=[16,2] --set train.epochs=2 --set train.seed=11") == 0,
          "meshcnn training succeeds");
    const std::string attr = (scratch / "imp.edgeattr").string();
    check(run(bin + " export-importance --run " + run_m + " --sample test/0 --out " + attr) == 0,
          "export-importance succeeds");
    {
        auto rows = meshnets::load_edge_attributes(attr);
        auto templ = meshnets::load_mesh(data + "/template.off");
        check(static_cast<int>(rows.size()) == templ.edge_count(),
              "one importance value per original edge");
        bool nonneg = true;
        for (const auto& r : rows) nonneg = nonneg && r.second >= 0.0;
        check(nonneg, "importance values non-negative");
    }
    check(run(bin + " export-importance --run " + run_a + " --sample test/0 --out " + attr) == 2,
          "export-importance on non-meshcnn run exits 2");

    // report over the runs directory
    {
        int rc = std::system((bin + " report --runs " + (scratch / "runs").string() + " --json " +
                              (scratch / "report.json").string() + " > " +
                              (scratch / "report.txt").string() + " 2>/dev/null")
                                 .c_str());
        check(WEXITSTATUS(rc) == 0, "report succeeds");
        std::string table = slurp(scratch / "report.txt");
        check(table.find("Method") != std::string::npos &&
                  table.find("#Params") != std::string::npos,
              "report table has the expected columns");
        check(table.find("spiralnet") != std::string::npos &&
                  table.find("meshcnn") != std::string::npos,
              "report lists the trained models");
        json rep = json::parse(slurp(scratch / "report.json"));
        check(rep.is_array() && rep.size() >= 3, "combined JSON report covers the runs");
    }

    // MESHCLASS_SEED is a last-resort seed override
    {
        json no_seed = cfg;
        no_seed["train"].erase("seed");
        std::ofstream out(scratch / "config_noseed.json");
        out << no_seed.dump(2);
        out.close();
        const std::string rs1 = (scratch / "runs" / "seed_env1").string();
        const std::string rs2 = (scratch / "runs" / "seed_env2").string();
        std::string base = "MESHCLASS_SEED=77 " + bin + " train --config " +
                           (scratch / "config_noseed.json").string() + " --data " + data;
        check(run(base + " --out " + rs1) == 0 && run(base + " --out " + rs2) == 0,
              "env-seeded runs succeed");
        check(slurp(fs::path(rs1) / "metrics.json") == slurp(fs::path(rs2) / "metrics.json"),
              "MESHCLASS_SEED drives deterministic runs");
        json stored = json::parse(slurp(fs::path(rs1) / "config.json"));
        check(stored["train"]["seed"] == 77, "env seed echoed into persisted config");
    }

    std::printf("%s: %d failure(s)\n", failures == 0 ? "PASS" : "FAIL", failures);
    return failures == 0 ? 0 : 1;
}
