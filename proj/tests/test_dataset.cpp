#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>

#include <unistd.h>

#include "regfuse/dataset.hpp"
#include "regfuse/error.hpp"
#include "regfuse/io.hpp"

using namespace regfuse;
namespace fs = std::filesystem;

namespace {

// Scratch directory removed when the test ends.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag)
        : path_(fs::temp_directory_path() / ("regfuse_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

// Relative path → contents for every regular file below `root`.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_file(e.path());
    }
    return out;
}

RunConfig small_run(int categories, int pairs) {
    RunConfig cfg;
    cfg.seed = 17;
    cfg.gen.categories = categories;
    cfg.gen.pairs_per_category = pairs;
    cfg.reg.b.max_iterations = 5000;
    return cfg;
}

}  // namespace

TEST(RunConfigParse, DefaultsAndOverrides) {
    const RunConfig d = parse_run_config("{}");
    EXPECT_EQ(d.seed, 0u);
    EXPECT_EQ(d.workers, 1u);
    EXPECT_EQ(d.gen.categories, 16);
    EXPECT_EQ(d.gen.pairs_per_category, 10);
    EXPECT_EQ(d.reg.model, ModelChoice::Fuse);
    EXPECT_EQ(d.reg.b.max_iterations, 100000u);
    EXPECT_EQ(d.reg.a.refine_iterations, 2);
    EXPECT_EQ(d.reg.fusion.d1, 15.0);

    const RunConfig c = parse_run_config(R"({
        "seed": 5, "workers": 3, "model": "b",
        "gen": {"categories": 2, "overlap_target": 0.5, "shapes": ["plane", "box"]},
        "pipeline_a": {"refine_iterations": 3, "use_fmr": false},
        "pipeline_b": {"max_iterations": 2000000, "objective": "overlap_fitness"},
        "fusion": {"d1": 10, "tau": 0.04, "thresholds_file": "th.txt"}
    })");
    EXPECT_EQ(c.seed, 5u);
    EXPECT_EQ(c.workers, 3u);
    EXPECT_EQ(c.reg.model, ModelChoice::B);
    EXPECT_EQ(c.gen.categories, 2);
    EXPECT_EQ(c.gen.overlap_target, 0.5);
    ASSERT_EQ(c.gen.shapes.size(), 2u);
    EXPECT_EQ(c.gen.shapes[1], ShapeKind::Box);
    EXPECT_EQ(c.reg.a.refine_iterations, 3);
    EXPECT_FALSE(c.reg.a.use_fmr);
    EXPECT_EQ(c.reg.b.max_iterations, 2000000u);
    EXPECT_EQ(c.reg.b.objective, RansacObjective::OverlapFitness);
    EXPECT_EQ(c.reg.fusion.d1, 10.0);
    EXPECT_EQ(c.reg.tau, 0.04);
    EXPECT_EQ(c.reg.thresholds_file, "th.txt");
}

TEST(RunConfigParse, RejectsUnknownAndMistypedKeys) {
    auto message = [](const std::string& text) {
        try {
            parse_run_config(text);
        } catch (const InvalidInput& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message(R"({"sed": 1})").find("sed"), std::string::npos);
    EXPECT_NE(message(R"({"gen": {"overlap": 0.5}})").find("gen.overlap"), std::string::npos);
    EXPECT_NE(message(R"({"pipeline_b": {"iterations": 5}})").find("pipeline_b.iterations"), std::string::npos);
    EXPECT_NE(message(R"({"seed": "x"})").find("seed"), std::string::npos);
    EXPECT_NE(message(R"({"gen": 3})"), "no error");
    EXPECT_NE(message("{not json"), "no error");
    EXPECT_NE(message(R"({"model": "c"})"), "no error");
}

TEST(RunConfigValidate, RejectsBadValues) {
    RunConfig cfg;
    cfg.gen.overlap_target = 1.5;
    EXPECT_THROW(validate(cfg), InvalidInput);
    cfg = RunConfig{};
    cfg.workers = 0;
    EXPECT_THROW(validate(cfg), InvalidInput);
    cfg = RunConfig{};
    cfg.reg.fusion.d3 = 2.0;
    EXPECT_THROW(validate(cfg), InvalidInput);
    cfg = RunConfig{};
    cfg.reg.b.max_iterations = 0;
    EXPECT_THROW(validate(cfg), InvalidInput);
    EXPECT_NO_THROW(validate(RunConfig{}));
}

TEST(GenerateDataset, LayoutAndByteIdenticalRerun) {
    ScratchDir dir("gen");
    RunConfig cfg = small_run(16, 10);
    BatchReport r = generate_dataset(cfg, dir / "a");
    EXPECT_TRUE(r.ok());
    EXPECT_EQ(r.processed, 160u);
    const auto pairs = list_pairs(dir / "a");
    ASSERT_EQ(pairs.size(), 160u);
    for (const auto& p : pairs) {
        for (const char* f : {"src.xyz", "tgt.xyz", "gt.txt", "mask.txt"}) EXPECT_TRUE(fs::exists(p.dir / f));
    }
    // Ordered by category, numerically.
    EXPECT_EQ(pairs.front().category, 0);
    EXPECT_EQ(pairs[20].category, 2);
    EXPECT_EQ(pairs.back().category, 15);

    cfg.workers = 4;
    generate_dataset(cfg, dir / "b");
    EXPECT_EQ(snapshot(dir / "a"), snapshot(dir / "b"));
    cfg.seed = 18;
    generate_dataset(cfg, dir / "c");
    EXPECT_NE(snapshot(dir / "a"), snapshot(dir / "c"));
}

TEST(RegisterDataset, ModelAOnExactCopies) {
    ScratchDir dir("exact");
    RunConfig cfg = small_run(2, 2);
    cfg.gen.overlap_target = 1.0;
    cfg.reg.model = ModelChoice::A;
    generate_dataset(cfg, dir / "data");
    const BatchReport reg = register_dataset(cfg, dir / "data", dir / "res", false);
    EXPECT_TRUE(reg.ok());
    EXPECT_EQ(reg.processed, 4u);
    const EvalReport ev = evaluate_results(dir / "data", dir / "res");
    ASSERT_EQ(ev.pairs.size(), 4u);
    for (const auto& p : ev.pairs) EXPECT_LT(p.metrics.error_r_deg, 0.01) << p.pair_id;
    EXPECT_FALSE(fs::exists(dir / "res" / "decisions.csv"));
}

TEST(RegisterDataset, FuseWritesOneDecisionPerPairAndResumes) {
    ScratchDir dir("fuse");
    RunConfig cfg = small_run(2, 2);
    generate_dataset(cfg, dir / "data");
    BatchReport reg = register_dataset(cfg, dir / "data", dir / "res", false);
    ASSERT_TRUE(reg.ok());

    std::istringstream lines(io::read_file(dir / "res" / "decisions.csv"));
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, kDecisionCsvHeader);
    std::vector<std::string> ids;
    while (std::getline(lines, line)) ids.push_back(line.substr(0, line.find(',')));
    const auto pairs = list_pairs(dir / "data");
    ASSERT_EQ(ids.size(), pairs.size());
    for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(ids[i], pairs[i].pair_id);

    const fs::path first = dir / "res" / std::to_string(pairs[0].category) / pairs[0].pair_id;
    const fs::path second = dir / "res" / std::to_string(pairs[1].category) / pairs[1].pair_id;
    for (const char* f : {"t1.txt", "t2.txt", "t3.txt", "transform.txt", "decision.csv", "flags.txt"}) {
        EXPECT_TRUE(fs::exists(first / f)) << f;
    }
    const std::string decisions = io::read_file(dir / "res" / "decisions.csv");
    const std::string kept = io::read_file(second / "transform.txt");

    // Simulate an interrupted run: one pair lost its outputs.
    fs::remove_all(first);
    reg = register_dataset(cfg, dir / "data", dir / "res", true);
    EXPECT_TRUE(reg.ok());
    EXPECT_EQ(reg.processed, 1u);
    EXPECT_EQ(reg.skipped, pairs.size() - 1);
    EXPECT_EQ(io::read_file(second / "transform.txt"), kept);
    EXPECT_EQ(io::read_file(dir / "res" / "decisions.csv"), decisions);
}

TEST(RegisterDataset, BrokenPairIsRecordedAndOthersContinue) {
    ScratchDir dir("broken");
    RunConfig cfg = small_run(1, 3);
    cfg.reg.model = ModelChoice::B;
    generate_dataset(cfg, dir / "data");
    const auto pairs = list_pairs(dir / "data");
    io::write_file_atomic(pairs[1].dir / "src.xyz", "1 2 three\n");
    const BatchReport reg = register_dataset(cfg, dir / "data", dir / "res", false);
    EXPECT_FALSE(reg.ok());
    ASSERT_EQ(reg.failures.size(), 1u);
    EXPECT_EQ(reg.failures[0].rfind(pairs[1].pair_id, 0), 0u);
    EXPECT_EQ(reg.processed, 2u);
    EXPECT_TRUE(fs::exists(dir / "res" / "0" / pairs[2].pair_id / "transform.txt"));
    EXPECT_NE(io::read_file(dir / "res" / "errors.csv").find(pairs[1].pair_id), std::string::npos);
}

TEST(EvaluateDataset, GroundTruthPredictionsScoreZero) {
    ScratchDir dir("gt");
    RunConfig cfg = small_run(12, 2);
    generate_dataset(cfg, dir / "data");
    for (const auto& p : list_pairs(dir / "data")) {
        const fs::path out = dir / "res" / std::to_string(p.category) / p.pair_id;
        fs::create_directories(out);
        fs::copy_file(p.dir / "gt.txt", out / "transform.txt");
    }
    const EvalReport ev = evaluate_dataset(dir / "data", dir / "res", dir / "res");
    EXPECT_TRUE(ev.batch.ok());
    for (const auto& p : ev.pairs) {
        EXPECT_EQ(p.metrics.error_r_deg, 0.0);
        EXPECT_EQ(p.metrics.error_t, 0.0);
        EXPECT_EQ(p.metrics.mse, 0.0);
    }
    // Categories ascend numerically (10 after 9), then the total row.
    ASSERT_EQ(ev.summary.size(), 13u);
    for (int c = 0; c < 12; ++c) EXPECT_EQ(ev.summary[static_cast<std::size_t>(c)].label, std::to_string(c));
    EXPECT_EQ(ev.summary.back().label, "total");
    EXPECT_EQ(ev.summary.back().count, 24u);
    EXPECT_TRUE(fs::exists(dir / "res" / "metrics.csv"));
    EXPECT_EQ(io::read_file(dir / "res" / "summary.csv").rfind(kSummaryCsvHeader, 0), 0u);
}

TEST(EvaluateDataset, MissingPredictionsAreWarnedAndExcluded) {
    ScratchDir dir("missing");
    RunConfig cfg = small_run(1, 3);
    generate_dataset(cfg, dir / "data");
    const auto pairs = list_pairs(dir / "data");
    for (std::size_t i = 0; i < 2; ++i) {
        const fs::path out = dir / "res" / "0" / pairs[i].pair_id;
        fs::create_directories(out);
        fs::copy_file(pairs[i].dir / "gt.txt", out / "transform.txt");
    }
    const EvalReport ev = evaluate_results(dir / "data", dir / "res");
    EXPECT_EQ(ev.pairs.size(), 2u);
    EXPECT_EQ(ev.batch.warnings.size(), 1u);
    EXPECT_TRUE(ev.batch.ok());
}

TEST(Summarize, TotalIsMeanOfPairs) {
    std::mt19937_64 rng(91);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    std::vector<PairEvaluation> pairs;
    for (int i = 0; i < 37; ++i) {
        PairEvaluation p;
        p.category = static_cast<int>(rng() % 5) * 3;
        p.pair_id = std::to_string(i);
        p.metrics = {u(rng), u(rng) / 100, u(rng), u(rng) / 100, 0.0};
        p.metrics.mse = challenge_mse(p.metrics.error_r_deg, p.metrics.error_t);
        pairs.push_back(p);
    }
    const auto summary = summarize(pairs);
    double r = 0.0, t = 0.0, mse = 0.0;
    for (const auto& p : pairs) {
        r += p.metrics.error_r_deg;
        t += p.metrics.error_t;
        mse += p.metrics.mse;
    }
    const auto& total = summary.back();
    EXPECT_NEAR(total.error_r_deg, r / 37, 1e-12);
    EXPECT_NEAR(total.error_t, t / 37, 1e-12);
    EXPECT_NEAR(total.mse, mse / 37, 1e-12);
    for (std::size_t i = 1; i + 1 < summary.size(); ++i) {
        EXPECT_LT(std::stoi(summary[i - 1].label), std::stoi(summary[i].label));
    }
}

TEST(EndToEnd, ReportsIdenticalAcrossWorkerCounts) {
    ScratchDir dir("e2e");
    std::map<std::string, std::string> reference;
    for (unsigned workers : {1u, 3u}) {
        RunConfig cfg = small_run(2, 2);
        cfg.workers = workers;
        cfg.gen.mixed_rotation = true;
        cfg.gen.noise_sigma = 0.01;
        const fs::path data = dir / ("data" + std::to_string(workers));
        const fs::path res = dir / ("res" + std::to_string(workers));
        generate_dataset(cfg, data);
        register_dataset(cfg, data, res, false);
        evaluate_dataset(data, res, res);
        std::map<std::string, std::string> reports;
        for (const char* f : {"metrics.csv", "summary.csv", "decisions.csv"}) reports[f] = io::read_file(res / f);
        if (reference.empty()) {
            reference = reports;
        } else {
            EXPECT_EQ(reports, reference);
        }
    }
}
