#include "regfuse/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "regfuse/alignment.hpp"
#include "regfuse/error.hpp"
#include "regfuse/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace regfuse {
namespace {

using Setter = std::function<void(const json&)>;

template <class T>
Setter set(T& field) {
    return [&field](const json& v) { field = v.get<T>(); };
}

void apply_section(const json& obj, const std::string& section, const std::map<std::string, Setter>& setters) {
    if (!obj.is_object()) throw InvalidInput("config section '" + section + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        const auto it = setters.find(key);
        const std::string name = section.empty() ? key : section + "." + key;
        if (it == setters.end()) throw InvalidInput("unknown config key '" + name + "'");
        try {
            it->second(value);
        } catch (const json::exception&) {
            throw InvalidInput("config key '" + name + "' has the wrong type");
        } catch (const InvalidInput& e) {
            throw InvalidInput("config key '" + name + "': " + e.what());
        }
    }
}

RansacObjective objective_from_string(const std::string& s) {
    if (s == "inlier_count") return RansacObjective::InlierCount;
    if (s == "overlap_fitness") return RansacObjective::OverlapFitness;
    throw InvalidInput("objective must be inlier_count or overlap_fitness");
}

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Runs fn(i) for i in [0, count) on `workers` threads. fn must not throw.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn) {
    const std::size_t n_threads = std::min<std::size_t>(std::max(1u, workers), count);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

std::string pair_id_for(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06d", index);
    return buf;
}

bool parse_int(const std::string& s, int& out) {
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

std::string flags_text(const RegistrationResult& r) {
    std::string out;
    for (const auto& f : r.degenerate_flags) out += f + "\n";
    return out;
}

}  // namespace

std::string to_string(ModelChoice m) {
    switch (m) {
        case ModelChoice::A: return "a";
        case ModelChoice::B: return "b";
        case ModelChoice::Fuse: return "fuse";
    }
    return "fuse";
}

ModelChoice model_from_string(const std::string& name) {
    if (name == "a") return ModelChoice::A;
    if (name == "b") return ModelChoice::B;
    if (name == "fuse") return ModelChoice::Fuse;
    throw InvalidInput("model must be a, b or fuse");
}

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    auto& g = cfg.gen;
    auto& a = cfg.reg.a;
    auto& b = cfg.reg.b;
    auto& f = cfg.reg.fusion;

    const std::map<std::string, Setter> gen_keys{
        {"categories", set(g.categories)},
        {"pairs_per_category", set(g.pairs_per_category)},
        {"rot_level", set(g.rot_level)},
        {"mixed_rotation", set(g.mixed_rotation)},
        {"overlap_target", set(g.overlap_target)},
        {"noise_sigma", set(g.noise_sigma)},
        {"noise_clip", set(g.noise_clip)},
        {"points_per_cloud", set(g.points_per_cloud)},
        {"generate_points", set(g.generate_points)},
        {"max_translation", set(g.max_translation)},
        {"shapes",
         [&g](const json& v) {
             g.shapes.clear();
             for (const auto& s : v) g.shapes.push_back(shape_kind_from_string(s.get<std::string>()));
         }},
    };
    const std::map<std::string, Setter> a_keys{
        {"refine_iterations", set(a.refine_iterations)},
        {"inner_steps", set(a.inner_steps)},
        {"keep_fraction", set(a.keep_fraction)},
        {"sigma", set(a.sigma)},
        {"ratio", set(a.ratio)},
        {"require_mutual", set(a.require_mutual)},
        {"use_fmr", set(a.use_fmr)},
        {"temperature", set(a.temperature)},
        {"descriptor_radius", set(a.descriptor_radius)},
        {"normal_radius", set(a.normal_radius)},
        {"bandwidth_start", set(a.bandwidth_start)},
        {"bandwidth_end", set(a.bandwidth_end)},
        {"hard_final_step", set(a.hard_final_step)},
        {"global_step", set(a.global_step)},
        {"global_temperature", set(a.global_temperature)},
        {"consistency_eps", set(a.consistency_eps)},
    };
    const std::map<std::string, Setter> b_keys{
        {"max_iterations", set(b.max_iterations)},
        {"inlier_tau", set(b.inlier_tau)},
        {"objective", [&b](const json& v) { b.objective = objective_from_string(v.get<std::string>()); }},
        {"source_keep_fraction", set(b.source_keep_fraction)},
        {"descriptor_radius", set(b.descriptor_radius)},
        {"normal_radius", set(b.normal_radius)},
        {"sigma", set(b.sigma)},
        {"early_exit_ratio", set(b.early_exit_ratio)},
        {"edge_similarity", set(b.edge_similarity)},
        {"mutual", set(b.mutual)},
        {"geometric_rounds", set(b.geometric_rounds)},
        {"polish_scale", set(b.polish_scale)},
    };
    const std::map<std::string, Setter> fusion_keys{
        {"d1", set(f.d1)},
        {"d2", set(f.d2)},
        {"d3", set(f.d3)},
        {"d4", set(f.d4)},
        {"tau", set(cfg.reg.tau)},
        {"thresholds_file", set(cfg.reg.thresholds_file)},
    };
    const std::map<std::string, Setter> top_keys{
        {"seed", set(cfg.seed)},
        {"workers", set(cfg.workers)},
        {"model", [&cfg](const json& v) { cfg.reg.model = model_from_string(v.get<std::string>()); }},
        {"gen", [&](const json& v) { apply_section(v, "gen", gen_keys); }},
        {"pipeline_a", [&](const json& v) { apply_section(v, "pipeline_a", a_keys); }},
        {"pipeline_b", [&](const json& v) { apply_section(v, "pipeline_b", b_keys); }},
        {"fusion", [&](const json& v) { apply_section(v, "fusion", fusion_keys); }},
    };
    apply_section(root, "", top_keys);
    return cfg;
}

RunConfig load_run_config(const fs::path& path) { return parse_run_config(io::read_file(path)); }

void validate(const RunConfig& cfg) {
    if (cfg.workers < 1) throw InvalidInput("workers must be at least 1");
    const auto& g = cfg.gen;
    if (g.categories < 1) throw InvalidInput("gen.categories must be at least 1");
    if (g.pairs_per_category < 1) throw InvalidInput("gen.pairs_per_category must be at least 1");
    PairSpec probe;
    probe.rot_level = g.rot_level;
    probe.overlap_target = g.overlap_target;
    probe.noise_sigma = g.noise_sigma;
    probe.noise_clip = g.noise_clip;
    probe.points_per_cloud = std::max(g.points_per_cloud, g.generate_points);
    probe.max_translation = g.max_translation;
    validate(probe);
    if (g.points_per_cloud < 32) throw InvalidInput("gen.points_per_cloud must be at least 32");
    validate(cfg.reg.a);
    validate(cfg.reg.b);
    validate(cfg.reg.fusion);
    if (!(cfg.reg.tau > 0.0)) throw InvalidInput("fusion.tau must be positive");
}

ShapeKind default_category_shape(int category) {
    const int c = ((category % 16) + 16) % 16;
    if (c < 10) return ShapeKind::RandomBlob;
    if (c < 12) return ShapeKind::Plane;
    if (c < 14) return ShapeKind::Cylinder;
    if (c == 14) return ShapeKind::Box;
    return ShapeKind::Composite;
}

RngSeed pair_seed(RngSeed run_seed, const std::string& pair_id) { return derive_seed(run_seed, fnv1a(pair_id)); }

std::vector<PairRef> list_pairs(const fs::path& dataset_dir) {
    const fs::path root = dataset_dir / "pairs";
    if (!fs::is_directory(root)) throw FormatError("no pairs directory under " + dataset_dir.string());
    std::vector<PairRef> out;
    for (const auto& cat : fs::directory_iterator(root)) {
        if (!cat.is_directory()) continue;
        int category = 0;
        if (!parse_int(cat.path().filename().string(), category)) continue;
        for (const auto& pair : fs::directory_iterator(cat.path())) {
            if (pair.is_directory()) out.push_back({category, pair.path().filename().string(), pair.path()});
        }
    }
    std::sort(out.begin(), out.end(), [](const PairRef& x, const PairRef& y) {
        return x.category != y.category ? x.category < y.category : x.pair_id < y.pair_id;
    });
    return out;
}

BatchReport generate_dataset(const RunConfig& cfg, const fs::path& out_dir) {
    validate(cfg);
    const auto& g = cfg.gen;
    const int total = g.categories * g.pairs_per_category;
    std::vector<std::string> errors(static_cast<std::size_t>(total));
    fs::create_directories(out_dir / "pairs");

    parallel_for(static_cast<std::size_t>(total), cfg.workers, [&](std::size_t i) {
        const int index = static_cast<int>(i);
        const int category = index / g.pairs_per_category;
        const std::string id = pair_id_for(index);
        try {
            PairSpec spec;
            spec.shape = g.shapes.empty() ? default_category_shape(category)
                                          : g.shapes[static_cast<std::size_t>(category) % g.shapes.size()];
            spec.rot_level = g.mixed_rotation ? index % 2 : g.rot_level;
            spec.overlap_target = g.overlap_target;
            spec.noise_sigma = g.noise_sigma;
            spec.noise_clip = g.noise_clip;
            spec.points_per_cloud = std::max(g.points_per_cloud, g.generate_points);
            spec.max_translation = g.max_translation;
            spec.category_id = category;
            spec.seed = pair_seed(RngSeed{cfg.seed}, id);
            GeneratedPair pair = generate_pair(spec);
            if (spec.points_per_cloud > g.points_per_cloud) pair = subsample_pair(pair, g.points_per_cloud, spec.seed);
            const fs::path dir = out_dir / "pairs" / std::to_string(category) / id;
            fs::create_directories(dir);
            io::save_cloud(dir / "src.xyz", pair.src);
            io::save_cloud(dir / "tgt.xyz", pair.tgt);
            io::save_transform(dir / "gt.txt", pair.gt);
            io::save_mask(dir / "mask.txt", pair.overlap_mask_src);
        } catch (const std::exception& e) {
            errors[i] = id + ": " + e.what();
        }
    });

    BatchReport report;
    for (const auto& e : errors) {
        if (e.empty()) {
            ++report.processed;
        } else {
            report.failures.push_back(e);
        }
    }
    return report;
}

BatchReport register_dataset(const RunConfig& cfg, const fs::path& dataset_dir, const fs::path& results_dir,
                             bool resume) {
    validate(cfg);
    const auto pairs = list_pairs(dataset_dir);
    const auto& reg = cfg.reg;
    ThresholdTable table(reg.fusion);
    if (!reg.thresholds_file.empty()) table = read_thresholds(reg.thresholds_file);

    enum class Outcome { Done, Skipped, Failed };
    std::vector<Outcome> outcome(pairs.size(), Outcome::Done);
    std::vector<std::string> errors(pairs.size());
    fs::create_directories(results_dir);

    parallel_for(pairs.size(), cfg.workers, [&](std::size_t i) {
        const PairRef& p = pairs[i];
        const fs::path out = results_dir / std::to_string(p.category) / p.pair_id;
        if (resume && fs::exists(out / "transform.txt") &&
            (reg.model != ModelChoice::Fuse || fs::exists(out / "decision.csv"))) {
            outcome[i] = Outcome::Skipped;
            return;
        }
        try {
            const PointCloud src = io::read_cloud(p.dir / "src.xyz");
            const PointCloud tgt = io::read_cloud(p.dir / "tgt.xyz");
            const RngSeed seed = pair_seed(RngSeed{cfg.seed}, p.pair_id);
            const FusionThresholds& th = table.lookup(p.category);
            const double tau = th.tau.value_or(reg.tau);
            PipelineAConfig a = reg.a;
            a.tau = tau;
            RansacConfig b = reg.b;
            b.tau = tau;
            b.seed = seed;
            b.workers = 1;
            fs::create_directories(out);

            if (reg.model == ModelChoice::A) {
                const auto r = register_a(src, tgt, a, seed);
                io::write_file_atomic(out / "flags.txt", flags_text(r));
                io::save_transform(out / "transform.txt", r.transform);
            } else if (reg.model == ModelChoice::B) {
                const auto r = ransac_register(src, tgt, b);
                io::write_file_atomic(out / "flags.txt", flags_text(r));
                io::save_transform(out / "transform.txt", r.transform);
            } else {
                const auto [r1, r2] = register_a_bidirectional(src, tgt, a, seed);
                const auto r3 = ransac_register(src, tgt, b);
                FusionInput in{r1.transform, r2.transform, r3.transform, r1.overlap, r3.overlap};
                const FusionDecision d = fuse(in, th);
                io::save_transform(out / "t1.txt", r1.transform);
                io::save_transform(out / "t2.txt", r2.transform);
                io::save_transform(out / "t3.txt", r3.transform);
                io::write_file_atomic(out / "flags.txt", flags_text(r1) + flags_text(r3));
                io::write_file_atomic(out / "decision.csv", decision_csv_row(p.pair_id, d) + "\n");
                io::save_transform(out / "transform.txt", d.transform);
            }
        } catch (const std::exception& e) {
            outcome[i] = Outcome::Failed;
            errors[i] = p.pair_id + ": " + e.what();
        }
    });

    BatchReport report;
    std::string decisions = std::string(kDecisionCsvHeader) + "\n";
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        switch (outcome[i]) {
            case Outcome::Done: ++report.processed; break;
            case Outcome::Skipped: ++report.skipped; break;
            case Outcome::Failed: report.failures.push_back(errors[i]); break;
        }
        if (reg.model == ModelChoice::Fuse && outcome[i] != Outcome::Failed) {
            decisions += io::read_file(results_dir / std::to_string(pairs[i].category) / pairs[i].pair_id /
                                       "decision.csv");
        }
    }
    if (reg.model == ModelChoice::Fuse) io::write_file_atomic(results_dir / "decisions.csv", decisions);
    std::string failures = "pair_id,message\n";
    for (const auto& f : report.failures) {
        const auto colon = f.find(": ");
        std::string msg = f.substr(colon + 2);
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        failures += f.substr(0, colon) + "," + msg + "\n";
    }
    io::write_file_atomic(results_dir / "errors.csv", failures);
    return report;
}

std::vector<CategorySummary> summarize(const std::vector<PairEvaluation>& pairs) {
    std::map<int, CategorySummary> by_cat;
    CategorySummary total{"total"};
    auto add = [](CategorySummary& s, const PairMetrics& m) {
        ++s.count;
        s.error_r_deg += m.error_r_deg;
        s.error_t += m.error_t;
        s.mae_r_deg += m.mae_r_deg;
        s.mae_t += m.mae_t;
        s.mse += m.mse;
    };
    for (const auto& p : pairs) {
        auto& s = by_cat[p.category];
        s.label = std::to_string(p.category);
        add(s, p.metrics);
        add(total, p.metrics);
    }
    std::vector<CategorySummary> out;
    auto finish = [&out](CategorySummary s) {
        if (s.count > 0) {
            const double n = static_cast<double>(s.count);
            s.error_r_deg /= n;
            s.error_t /= n;
            s.mae_r_deg /= n;
            s.mae_t /= n;
            s.mse /= n;
        }
        out.push_back(s);
    };
    for (const auto& [cat, s] : by_cat) finish(s);
    finish(total);
    return out;
}

std::string metrics_csv(const std::vector<PairEvaluation>& pairs) {
    std::string out = std::string(kMetricsCsvHeader) + "\n";
    for (const auto& p : pairs) {
        out += std::to_string(p.category) + "," + p.pair_id;
        for (double v : {p.metrics.error_r_deg, p.metrics.error_t, p.metrics.mae_r_deg, p.metrics.mae_t, p.metrics.mse}) {
            out += "," + io::format_csv_number(v);
        }
        out += "\n";
    }
    return out;
}

std::string summary_csv(const std::vector<CategorySummary>& summary) {
    std::string out = std::string(kSummaryCsvHeader) + "\n";
    for (const auto& s : summary) {
        out += s.label + "," + std::to_string(s.count);
        for (double v : {s.error_r_deg, s.error_t, s.mae_r_deg, s.mae_t, s.mse}) out += "," + io::format_csv_number(v);
        out += "\n";
    }
    return out;
}

EvalReport evaluate_results(const fs::path& dataset_dir, const fs::path& results_dir) {
    if (!fs::is_directory(results_dir)) throw FormatError("results directory " + results_dir.string() + " not found");
    EvalReport report;
    const auto pairs = list_pairs(dataset_dir);
    std::map<std::pair<int, std::string>, bool> known;
    for (const auto& p : pairs) {
        known[{p.category, p.pair_id}] = true;
        const fs::path pred = results_dir / std::to_string(p.category) / p.pair_id / "transform.txt";
        if (!fs::exists(pred)) {
            report.batch.warnings.push_back(p.pair_id + ": no prediction, excluded");
            ++report.batch.skipped;
            continue;
        }
        try {
            const RigidTransform gt = io::read_transform(p.dir / "gt.txt");
            const RigidTransform t = io::read_transform(pred);
            report.pairs.push_back({p.category, p.pair_id, evaluate_pair(t, gt)});
            ++report.batch.processed;
        } catch (const std::exception& e) {
            report.batch.failures.push_back(p.pair_id + ": " + e.what());
        }
    }
    // Predictions without a matching dataset pair.
    for (const auto& cat : fs::directory_iterator(results_dir)) {
        int category = 0;
        if (!cat.is_directory() || !parse_int(cat.path().filename().string(), category)) continue;
        for (const auto& pair : fs::directory_iterator(cat.path())) {
            const std::string id = pair.path().filename().string();
            if (pair.is_directory() && !known.count({category, id})) {
                report.batch.warnings.push_back(id + ": prediction without a dataset pair, excluded");
            }
        }
    }
    std::sort(report.batch.warnings.begin(), report.batch.warnings.end());
    report.summary = summarize(report.pairs);
    return report;
}

EvalReport evaluate_dataset(const fs::path& dataset_dir, const fs::path& results_dir, const fs::path& out_dir) {
    EvalReport report = evaluate_results(dataset_dir, results_dir);
    fs::create_directories(out_dir);
    io::write_file_atomic(out_dir / "metrics.csv", metrics_csv(report.pairs));
    io::write_file_atomic(out_dir / "summary.csv", summary_csv(report.summary));
    return report;
}

}  // namespace regfuse
