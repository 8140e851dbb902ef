#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshnets/decimation.hpp"
#include "meshnets/mesh.hpp"
#include "meshnets/mesh_io.hpp"
#include "meshnets/primitives.hpp"
#include "meshnets/rng.hpp"

namespace meshnets {

// Two-class synthetic shape population: an icosphere template deformed by a
// class-dependent radial bump (Gaussian falloff around the class site,
// amplitude drawn per sample) plus smooth low-frequency displacement.
struct SynthSpec {
    int template_subdivisions = 3;  // 642 vertices
    int samples_per_class = 282;
    double test_fraction = 0.5;  // stratified split
    Vec3 site0{0, 0, 1};
    Vec3 site1{0, 0, 1};
    double amp0_mean = 0.10, amp0_std = 0.02;
    double amp1_mean = 0.32, amp1_std = 0.03;
    double bump_width = 0.55;   // radians, geodesic falloff
    double deform_scale = 0.02;  // smooth noise amplitude
    bool rotation_augment = false;
    bool vary_topology = false;  // random per-sample decimation to [0.6, 1.0)
    std::uint64_t seed = 7;
};

struct Sample {
    TriMesh mesh;
    int label = 0;
    bool shares_template = true;
};

struct Dataset {
    TriMesh templ;
    std::vector<Sample> train, test;
    SynthSpec spec;
};

namespace detail {

inline Vec3 rotate_axis_angle(const Vec3& p, const Vec3& axis, double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    return p * c + cross(axis, p) * s + axis * (dot(axis, p) * (1 - c));
}

inline TriMesh deform_sample(const TriMesh& templ, const SynthSpec& spec, int label, Rng rng) {
    const Vec3 site = normalized(label == 0 ? spec.site0 : spec.site1);
    const double amp = rng.normal(label == 0 ? spec.amp0_mean : spec.amp1_mean,
                                  label == 0 ? spec.amp0_std : spec.amp1_std);
    // low-frequency cosine displacement field, 4 waves per coordinate
    struct Wave {
        Vec3 k;
        double c, phi;
    };
    std::vector<std::array<Wave, 4>> waves(3);
    for (int d = 0; d < 3; ++d)
        for (int j = 0; j < 4; ++j) {
            Vec3 dir = normalized({rng.normal(), rng.normal(), rng.normal()});
            waves[d][j] = {dir * rng.uniform(0.5, 2.0), rng.normal(0.0, spec.deform_scale),
                           rng.uniform(0.0, 6.283185307179586)};
        }
    const double w2 = 2.0 * spec.bump_width * spec.bump_width;

    TriMesh out = templ;
    for (auto& v : out.vertices) {
        Vec3 vhat = normalized(v);
        double geo = std::acos(std::clamp(dot(vhat, site), -1.0, 1.0));
        double bump = amp * std::exp(-geo * geo / w2);
        Vec3 p = v * (1.0 + bump);
        Vec3 disp;
        for (int d = 0; d < 3; ++d) {
            double acc = 0.0;
            for (const auto& wv : waves[d]) acc += wv.c * std::cos(dot(wv.k, v) + wv.phi);
            if (d == 0) disp.x = acc;
            if (d == 1) disp.y = acc;
            if (d == 2) disp.z = acc;
        }
        v = p + disp;
    }
    if (spec.rotation_augment) {
        Vec3 axis = normalized({rng.normal(), rng.normal(), rng.normal()});
        double angle = rng.uniform(0.0, 6.283185307179586);
        for (auto& v : out.vertices) v = rotate_axis_angle(v, axis, angle);
    }
    return out;
}

inline std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    return h;
}

}  // namespace detail

// Deterministic in the spec seed: every sample derives its own stream from
// the global index, so generation order never changes the output.
inline Dataset generate(const SynthSpec& spec) {
    if (spec.samples_per_class <= 0) throw std::runtime_error("generate: counts must be positive");
    Dataset ds;
    ds.spec = spec;
    ds.templ = icosphere(spec.template_subdivisions);
    Rng root(spec.seed);

    const int train_per_class =
        spec.samples_per_class - static_cast<int>(std::round(spec.samples_per_class * spec.test_fraction));
    for (int label = 0; label < 2; ++label) {
        for (int s = 0; s < spec.samples_per_class; ++s) {
            std::uint64_t global_index =
                static_cast<std::uint64_t>(label) * spec.samples_per_class + s;
            Rng rng = root.fork(global_index);
            Sample sample;
            sample.label = label;
            sample.mesh = detail::deform_sample(ds.templ, spec, label, rng);
            sample.shares_template = true;
            if (spec.vary_topology) {
                double ratio = rng.uniform(0.6, 1.0);
                int target = std::max(4, static_cast<int>(std::floor(
                                             sample.mesh.vertex_count() * ratio)));
                if (target < sample.mesh.vertex_count()) {
                    sample.mesh = decimate(sample.mesh, target).mesh;
                }
                sample.shares_template = false;
            }
            (s < train_per_class ? ds.train : ds.test).push_back(std::move(sample));
        }
    }
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "samples" / "train");
    fs::create_directories(fs::path(dir) / "samples" / "test");
    nlohmann::json manifest;
    auto& files = manifest["files"];

    auto templ_path = (fs::path(dir) / "template.off").string();
    save_mesh(ds.templ, templ_path);

    auto dump_split = [&](const std::vector<Sample>& split, const std::string& name) {
        for (std::size_t i = 0; i < split.size(); ++i) {
            char fname[64];
            std::snprintf(fname, sizeof(fname), "%03zu_%d.off", i, split[i].label);
            auto rel = "samples/" + name + "/" + fname;
            auto path = (fs::path(dir) / rel).string();
            save_mesh(split[i].mesh, path);
            char hex[24];
            std::snprintf(hex, sizeof(hex), "%016llx",
                          static_cast<unsigned long long>(detail::fnv1a_file(path)));
            files[rel] = hex;
        }
    };
    dump_split(ds.train, "train");
    dump_split(ds.test, "test");
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a_file(templ_path)));
    files["template.off"] = hex;

    const auto& s = ds.spec;
    manifest["spec"] = {
        {"template_subdivisions", s.template_subdivisions},
        {"samples_per_class", s.samples_per_class},
        {"test_fraction", s.test_fraction},
        {"site0", {s.site0.x, s.site0.y, s.site0.z}},
        {"site1", {s.site1.x, s.site1.y, s.site1.z}},
        {"amp0_mean", s.amp0_mean},
        {"amp0_std", s.amp0_std},
        {"amp1_mean", s.amp1_mean},
        {"amp1_std", s.amp1_std},
        {"bump_width", s.bump_width},
        {"deform_scale", s.deform_scale},
        {"rotation_augment", s.rotation_augment},
        {"vary_topology", s.vary_topology},
        {"seed", s.seed},
    };
    manifest["counts"] = {{"train", ds.train.size()}, {"test", ds.test.size()}};
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for manifest under " + dir);
}

inline SynthSpec spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    if (j.contains("template_subdivisions")) s.template_subdivisions = j["template_subdivisions"];
    if (j.contains("samples_per_class")) s.samples_per_class = j["samples_per_class"];
    if (j.contains("test_fraction")) s.test_fraction = j["test_fraction"];
    auto site = [&](const char* key, Vec3 dflt) {
        if (!j.contains(key)) return dflt;
        auto a = j[key];
        return Vec3{a[0], a[1], a[2]};
    };
    s.site0 = site("site0", s.site0);
    s.site1 = site("site1", s.site1);
    if (j.contains("amp0_mean")) s.amp0_mean = j["amp0_mean"];
    if (j.contains("amp0_std")) s.amp0_std = j["amp0_std"];
    if (j.contains("amp1_mean")) s.amp1_mean = j["amp1_mean"];
    if (j.contains("amp1_std")) s.amp1_std = j["amp1_std"];
    if (j.contains("bump_width")) s.bump_width = j["bump_width"];
    if (j.contains("deform_scale")) s.deform_scale = j["deform_scale"];
    if (j.contains("rotation_augment")) s.rotation_augment = j["rotation_augment"];
    if (j.contains("vary_topology")) s.vary_topology = j["vary_topology"];
    if (j.contains("seed")) s.seed = j["seed"];
    return s;
}

inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("missing manifest.json under " + dir);
    nlohmann::json manifest;
    in >> manifest;
    Dataset ds;
    ds.spec = spec_from_json(manifest["spec"]);
    ds.templ = load_mesh((fs::path(dir) / "template.off").string());
    for (const std::string split : {"train", "test"}) {
        std::vector<std::string> names;
        for (const auto& ent : fs::directory_iterator(fs::path(dir) / "samples" / split))
            names.push_back(ent.path().filename().string());
        std::sort(names.begin(), names.end());
        for (const auto& name : names) {
            auto us = name.find('_');
            auto dot = name.rfind('.');
            if (us == std::string::npos || dot == std::string::npos) continue;
            Sample s;
            s.label = std::stoi(name.substr(us + 1, dot - us - 1));
            s.mesh = load_mesh((fs::path(dir) / "samples" / split / name).string());
            s.shares_template = !ds.spec.vary_topology && s.mesh.faces == ds.templ.faces;
            (split == std::string("train") ? ds.train : ds.test).push_back(std::move(s));
        }
    }
    return ds;
}

// Gaussian-weighted mean radius around the positive-class bump site; the
// scalar a linear probe can classify when the classes are separable.
inline double bump_radius_statistic(const TriMesh& mesh, const SynthSpec& spec) {
    const Vec3 site = normalized(spec.site1);
    const double w2 = 2.0 * spec.bump_width * spec.bump_width;
    double num = 0.0, den = 0.0;
    for (const auto& v : mesh.vertices) {
        double r = norm(v);
        if (r <= 0.0) continue;
        double geo = std::acos(std::clamp(dot(v / r, site), -1.0, 1.0));
        double w = std::exp(-geo * geo / w2);
        num += w * r;
        den += w;
    }
    return den > 0.0 ? num / den : 0.0;
}

// Logistic regression on the bump-radius scalar: the separability floor any
// mesh network is expected to beat. Returns test accuracy.
inline double separability_check(const Dataset& ds) {
    auto stats = [&](const std::vector<Sample>& split) {
        std::vector<std::pair<double, int>> xs;
        xs.reserve(split.size());
        for (const auto& s : split) xs.push_back({bump_radius_statistic(s.mesh, ds.spec), s.label});
        return xs;
    };
    auto train = stats(ds.train), test = stats(ds.test);
    double mean = 0.0;
    for (auto& [x, y] : train) mean += x;
    mean /= static_cast<double>(train.size());
    double var = 0.0;
    for (auto& [x, y] : train) var += (x - mean) * (x - mean);
    double sd = std::sqrt(var / std::max<std::size_t>(1, train.size() - 1));
    if (sd <= 0.0) sd = 1.0;

    double w = 0.0, b = 0.0;
    for (int it = 0; it < 800; ++it) {
        double gw = 0.0, gb = 0.0;
        for (auto& [x, y] : train) {
            double z = w * (x - mean) / sd + b;
            double p = 1.0 / (1.0 + std::exp(-z));
            gw += (p - y) * (x - mean) / sd;
            gb += (p - y);
        }
        w -= 0.5 * gw / static_cast<double>(train.size());
        b -= 0.5 * gb / static_cast<double>(train.size());
    }
    int correct = 0;
    for (auto& [x, y] : test) {
        double z = w * (x - mean) / sd + b;
        correct += ((z > 0.0 ? 1 : 0) == y) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

inline double separability_check(const SynthSpec& spec) { return separability_check(generate(spec)); }

}  // namespace meshnets
