// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            run criteria 1-10
//   acceptance 5 8        run only the listed criteria
//
// Exit status is 0 iff every selected criterion passed.
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "regfuse/alignment.hpp"
#include "regfuse/datagen.hpp"
#include "regfuse/dataset.hpp"
#include "regfuse/fusion.hpp"
#include "regfuse/io.hpp"
#include "regfuse/metrics.hpp"
#include "regfuse/pipeline_a.hpp"
#include "regfuse/ransac.hpp"
#include "test_support.hpp"

using namespace regfuse;
namespace rt = regfuse::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag)
        : path_(fs::temp_directory_path() / ("regfuse_accept_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() { fs::remove_all(path_); }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

GeneratedPair synthetic_pair(std::uint64_t base, int i, int rot_level, double noise, std::size_t points,
                             std::size_t generate_points = 0) {
    PairSpec s;
    s.seed = derive_seed(RngSeed{base}, static_cast<std::uint64_t>(i));
    s.rot_level = rot_level;
    s.noise_sigma = noise;
    s.points_per_cloud = generate_points ? generate_points : points;
    const GeneratedPair p = generate_pair(s);
    return generate_points ? subsample_pair(p, points, s.seed) : p;
}

// 1. Challenge MSE arithmetic against the reference totals.
Outcome criterion1() {
    const double a = challenge_mse(3.16656, 0.029237);
    const double b = challenge_mse(2.96546, 0.02632);
    const bool pass = std::abs(a - 0.08451) < 5e-5 && std::abs(b - 0.07808) < 5e-5;
    return {pass, "mse(3.16656, 0.029237) = " + fmt("%.6f", a) + ", mse(2.96546, 0.02632) = " + fmt("%.6f", b)};
}

// 2. Kabsch exactness on noiseless instances plus zero-weight exclusion.
Outcome criterion2() {
    std::mt19937_64 rng(2002);
    std::normal_distribution<double> g;
    double worst_r = 0.0, worst_t = 0.0, worst_shift = 0.0;
    for (int inst = 0; inst < 1000; ++inst) {
        const PointCloud src = rt::random_cloud(64, rng);
        const RigidTransform gt = rt::oracle_transform(rng);
        CorrespondenceSet corr;
        for (std::size_t i = 0; i < src.size(); ++i) corr.push_back({i, gt(src[i]), 1.0});
        const RigidTransform t = weighted_kabsch(src, corr);
        const PairMetrics m = evaluate_pair(t, gt);
        worst_r = std::max(worst_r, m.error_r_deg);
        worst_t = std::max(worst_t, m.error_t);

        // Wild targets with zero weight must not move the solution.
        CorrespondenceSet polluted = corr;
        for (std::size_t i = 0; i < 16; ++i) polluted.push_back({i, Vec3(g(rng), g(rng), g(rng)) * 10.0, 0.0});
        const RigidTransform tp = weighted_kabsch(src, polluted);
        worst_shift = std::max({worst_shift, (tp.rotation() - t.rotation()).cwiseAbs().maxCoeff(),
                                (tp.translation() - t.translation()).cwiseAbs().maxCoeff()});
    }
    const bool pass = worst_r < 1e-6 && worst_t < 1e-9 && worst_shift < 1e-12;
    return {pass, "worst Error(R) " + fmt("%.3g", worst_r) + " deg, worst Error(t) " + fmt("%.3g", worst_t) +
                      ", zero-weight shift " + fmt("%.3g", worst_shift)};
}

// 3. No small perturbation of the Kabsch solution lowers the weighted residual.
Outcome criterion3() {
    std::mt19937_64 rng(2003);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> w(0.1, 1.0), angle(0.0, 1.0), step(0.0, 0.01);
    int improved = 0;
    double worst_gain = 0.0;
    for (int inst = 0; inst < 1000; ++inst) {
        const PointCloud src = rt::random_cloud(64, rng);
        const RigidTransform gt = rt::oracle_transform(rng);
        CorrespondenceSet corr;
        for (std::size_t i = 0; i < src.size(); ++i) {
            corr.push_back({i, gt(src[i]) + 0.05 * Vec3(g(rng), g(rng), g(rng)), w(rng)});
        }
        const RigidTransform t = weighted_kabsch(src, corr);
        const double best = weighted_sq_residual(src, corr, t);
        for (int k = 0; k < 50; ++k) {
            const Vec3 dir = Vec3(g(rng), g(rng), g(rng)).normalized();
            const RigidTransform p(rt::small_rotation(angle(rng), rng) * t.rotation(), t.translation() + step(rng) * dir);
            const double r = weighted_sq_residual(src, corr, p);
            // Round-off allowance relative to the residual's size.
            if (r < best - 1e-12 * std::max(1.0, best)) {
                ++improved;
                worst_gain = std::max(worst_gain, best - r);
            }
        }
    }
    return {improved == 0, std::to_string(improved) + " of 50000 perturbations improved the residual" +
                               (improved ? " (largest gain " + fmt("%.3g", worst_gain) + ")" : std::string())};
}

// 4. Metric oracles: quaternion geodesic and brute-force chamfer.
Outcome criterion4() {
    std::mt19937_64 rng(2004);
    double worst_rot = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Mat3 a = rt::oracle_rotation(rng), b = rt::oracle_rotation(rng);
        worst_rot = std::max(worst_rot, std::abs(error_rot_isotropic(a, b) - rt::quaternion_geodesic_deg(a, b)));
    }
    std::uniform_int_distribution<std::size_t> size(1, 500);
    double worst_chamfer = 0.0;
    for (int i = 0; i < 50; ++i) {
        const PointCloud a = rt::random_cloud(size(rng), rng), b = rt::random_cloud(size(rng), rng);
        worst_chamfer = std::max(worst_chamfer, std::abs(chamfer_distance(a, b) - rt::brute_chamfer(a, b)));
    }
    return {worst_rot < 1e-9 && worst_chamfer < 1e-12,
            "worst rotation deviation " + fmt("%.3g", worst_rot) + " deg, worst chamfer deviation " +
                fmt("%.3g", worst_chamfer)};
}

// 5. Pipeline A on 200 moderate-rotation noiseless pairs.
Outcome criterion5() {
    int good = 0;
    std::vector<double> et, er;
    for (int i = 0; i < 200; ++i) {
        const GeneratedPair p = synthetic_pair(5005, i, 0, 0.0, 512);
        const PairMetrics m = evaluate_pair(register_a(p.src, p.tgt, PipelineAConfig{}).transform, p.gt);
        good += m.error_r_deg < 2.0;
        er.push_back(m.error_r_deg);
        et.push_back(m.error_t);
    }
    return {good >= 180 && rt::median(et) < 0.02, std::to_string(good) + "/200 under 2 deg, median Error(R) " +
                                                      fmt("%.4g", rt::median(er)) + " deg, median Error(t) " +
                                                      fmt("%.4g", rt::median(et))};
}

// 6. Pipeline B on 200 unrestricted-rotation noisy pairs, plus budget ordering.
Outcome criterion6() {
    std::vector<double> at_default, at_10k, at_100k;
    for (int i = 0; i < 200; ++i) {
        const GeneratedPair p = synthetic_pair(6006, i, 1, 0.01, 512);
        RansacConfig cfg;
        cfg.seed = derive_seed(RngSeed{66}, static_cast<std::uint64_t>(i));
        at_default.push_back(evaluate_pair(ransac_register(p.src, p.tgt, cfg).transform, p.gt).error_r_deg);
        cfg.early_exit_ratio = 2.0;
        cfg.max_iterations = 10000;
        at_10k.push_back(evaluate_pair(ransac_register(p.src, p.tgt, cfg).transform, p.gt).error_r_deg);
        cfg.max_iterations = 100000;
        at_100k.push_back(evaluate_pair(ransac_register(p.src, p.tgt, cfg).transform, p.gt).error_r_deg);
    }
    const double med = rt::median(at_default), m10 = rt::median(at_10k), m100 = rt::median(at_100k);
    return {med < 8.0 && m100 <= m10, "median Error(R) " + fmt("%.4g", med) + " deg; without early exit 10k " +
                                          fmt("%.4g", m10) + " deg, 100k " + fmt("%.4g", m100) + " deg"};
}

// 7. Fusion truth table, rule boundaries and trace completeness.
Outcome criterion7() {
    std::vector<std::string> problems;
    const FusionThresholds th;
    for (int mask = 0; mask < 16; ++mask) {
        const bool l1 = mask & 1, l2 = mask & 2, l3 = mask & 4, l4 = mask & 8;
        FusionInput in;
        in.t1 = RigidTransform(rot_z(l2 ? 10.0 : 90.0), Vec3(0.1, 0.2, 0.3));
        const RigidTransform back = invert(in.t1);
        in.t2 = l1 ? back : RigidTransform(rot_x(40.0) * back.rotation(), back.translation());
        in.t3 = RigidTransform(rot_y(5.0), Vec3::Zero());
        in.ol1 = l3 ? 0.5 : 0.1;
        in.ol3 = l4 ? in.ol1 - 0.1 : in.ol1 + 0.2;
        const FusionDecision d = fuse(in, th);
        const bool want_a = (l1 && l2 && l3) || l4;
        if (d.l1 != l1 || d.l2 != l2 || d.l3 != l3 || d.l4 != l4 || (d.chosen == Model::A) != want_a ||
            !(d.transform == (want_a ? in.t1 : in.t3))) {
            problems.push_back("truth table row " + std::to_string(mask));
        }
    }
    const RigidTransform r33(rot_x(33.0), Vec3::Zero());
    const double a33 = rotation_angle_deg(r33.rotation());
    if (rule_l1(r33, RigidTransform(), a33)) problems.push_back("l1 boundary");
    if (rule_l2(r33, a33)) problems.push_back("l2 boundary");
    if (!rule_l3(0.3, 0.3)) problems.push_back("l3 boundary");
    if (rule_l4(0.5, 0.6, 0.1) || rule_l4(0.25, 0.5, 0.25)) problems.push_back("l4 boundary");

    ScratchDir dir("c7");
    RunConfig cfg;
    cfg.seed = 7;
    cfg.gen.categories = 16;
    cfg.gen.pairs_per_category = 1;
    cfg.gen.mixed_rotation = true;
    cfg.reg.b.max_iterations = 10000;
    generate_dataset(cfg, dir / "data");
    register_dataset(cfg, dir / "data", dir / "res", false);
    const auto pairs = list_pairs(dir / "data");
    std::istringstream csv(io::read_file(dir / "res" / "decisions.csv"));
    std::string line;
    std::getline(csv, line);
    if (line != kDecisionCsvHeader) problems.push_back("decision header");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
        const bool complete = fields.size() == 10 &&
                              std::none_of(fields.begin(), fields.end(), [](const std::string& f) { return f.empty(); });
        if (!complete || rows >= pairs.size() || fields[0] != pairs[rows].pair_id) {
            problems.push_back("decision row " + std::to_string(rows));
        }
        ++rows;
    }
    if (rows != pairs.size()) problems.push_back("decision row count");
    std::string detail = "16 truth-table rows, 4 rule boundaries, " + std::to_string(rows) + " decision rows for " +
                         std::to_string(pairs.size()) + " pairs";
    for (const auto& p : problems) detail += "; bad " + p;
    return {problems.empty(), detail};
}

// 8. Fused median against either pipeline alone on a mixed-rotation set.
Outcome criterion8() {
    ScratchDir dir("c8");
    RunConfig cfg;
    cfg.seed = 8;
    cfg.gen.categories = 16;
    cfg.gen.pairs_per_category = 10;
    cfg.gen.mixed_rotation = true;
    generate_dataset(cfg, dir / "data");
    register_dataset(cfg, dir / "data", dir / "res", false);
    std::vector<double> a, b, fused;
    int chose_a = 0;
    for (const auto& p : list_pairs(dir / "data")) {
        const RigidTransform gt = io::read_transform(p.dir / "gt.txt");
        const fs::path out = dir / "res" / std::to_string(p.category) / p.pair_id;
        a.push_back(evaluate_pair(io::read_transform(out / "t1.txt"), gt).error_r_deg);
        b.push_back(evaluate_pair(io::read_transform(out / "t3.txt"), gt).error_r_deg);
        fused.push_back(evaluate_pair(io::read_transform(out / "transform.txt"), gt).error_r_deg);
        chose_a += io::read_file(out / "decision.csv").find(",A,") != std::string::npos;
    }
    const double ma = rt::median(a), mb = rt::median(b), mf = rt::median(fused);
    return {mf <= std::min(ma, mb) + 0.5,
            std::to_string(fused.size()) + " pairs: median Error(R) fused " + fmt("%.4g", mf) + " deg, A " +
                fmt("%.4g", ma) + " deg, B " + fmt("%.4g", mb) + " deg (A chosen " + std::to_string(chose_a) + "x)"};
}

// 9. Pipeline A under noise and under 2048 to 1024 subsampling.
Outcome criterion9() {
    constexpr int kPairs = 20;
    std::vector<double> base, noisy, sparse;
    for (int i = 0; i < kPairs; ++i) {
        const GeneratedPair p0 = synthetic_pair(9009, i, 0, 0.0, 2048);
        base.push_back(evaluate_pair(register_a(p0.src, p0.tgt, PipelineAConfig{}).transform, p0.gt).error_r_deg);
        const GeneratedPair pn = synthetic_pair(9009, i, 0, 0.01, 2048);
        noisy.push_back(evaluate_pair(register_a(pn.src, pn.tgt, PipelineAConfig{}).transform, pn.gt).error_r_deg);
        const GeneratedPair ps = synthetic_pair(9009, i, 0, 0.0, 1024, 2048);
        sparse.push_back(evaluate_pair(register_a(ps.src, ps.tgt, PipelineAConfig{}).transform, ps.gt).error_r_deg);
    }
    const double mb = rt::median(base), mn = rt::median(noisy), ms = rt::median(sparse);
    return {mn < 2.0 * mb && ms < 2.0 * mb,
            std::to_string(kPairs) + " pairs: median Error(R) 2048 clean " + fmt("%.4g", mb) + " deg, noisy " +
                fmt("%.4g", mn) + " deg (x" + fmt("%.3g", mn / mb) + "), 1024 of 2048 " + fmt("%.4g", ms) +
                " deg (x" + fmt("%.3g", ms / mb) + ")"};
}

// 10. gen, register (fused) and eval reports identical across worker counts.
Outcome criterion10() {
    ScratchDir dir("c10");
    std::vector<std::map<std::string, std::string>> runs;
    int run = 0;
    for (unsigned workers : {1u, 4u, 1u}) {
        RunConfig cfg;
        cfg.seed = 10;
        cfg.workers = workers;
        cfg.gen.categories = 16;
        cfg.gen.pairs_per_category = 1;
        cfg.gen.mixed_rotation = true;
        cfg.gen.noise_sigma = 0.01;
        const fs::path data = dir / ("data" + std::to_string(run));
        const fs::path res = dir / ("res" + std::to_string(run));
        ++run;
        generate_dataset(cfg, data);
        register_dataset(cfg, data, res, false);
        evaluate_dataset(data, res, res);
        std::map<std::string, std::string> files;
        for (const char* f : {"metrics.csv", "summary.csv", "decisions.csv"}) files[f] = io::read_file(res / f);
        runs.push_back(files);
    }
    const bool pass = runs[0] == runs[1] && runs[0] == runs[2];
    return {pass, "3 runs (workers 1, 4, 1) x 16 pairs: metrics, summary and decision CSVs " +
                      std::string(pass ? "byte-identical" : "differ")};
}

struct Criterion {
    int id;
    double budget_s;  // 0: no stated budget
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, 0, criterion1},  {2, 5, criterion2},   {3, 30, criterion3}, {4, 0, criterion4},
        {5, 120, criterion5}, {6, 600, criterion6}, {7, 0, criterion7}, {8, 900, criterion8},
        {9, 0, criterion9},  {10, 0, criterion10},
    };
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

    bool all_pass = true;
    for (const auto& c : all) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt("%.1f s", secs);
        if (c.budget_s > 0) {
            timing += fmt(", budget %.0f s", c.budget_s);
            if (secs >= c.budget_s) {
                o.pass = false;
                o.detail += "; over time budget";
            }
        }
        std::printf("criterion %d: %s  %s (%s)\n", c.id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), timing.c_str());
        std::fflush(stdout);
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
