#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "regfuse/datagen.hpp"
#include "regfuse/fusion.hpp"
#include "regfuse/metrics.hpp"
#include "regfuse/pipeline_a.hpp"
#include "regfuse/ransac.hpp"

namespace regfuse {

struct GenConfig {
    int categories = 16;
    int pairs_per_category = 10;
    int rot_level = 0;
    /// Alternate rot_level 0 and 1 by pair index instead of using rot_level.
    bool mixed_rotation = false;
    double overlap_target = 0.7;
    double noise_sigma = 0.0;
    double noise_clip = 0.5;
    std::size_t points_per_cloud = 512;
    /// When larger than points_per_cloud, views are cut at this density and
    /// each is then subsampled to points_per_cloud.
    std::size_t generate_points = 0;
    double max_translation = 0.5;
    /// Shape per category, cycled; empty means the built-in assignment.
    std::vector<ShapeKind> shapes;
};

enum class ModelChoice { A, B, Fuse };

std::string to_string(ModelChoice m);
ModelChoice model_from_string(const std::string& name);

struct RegisterConfig {
    ModelChoice model = ModelChoice::Fuse;
    PipelineAConfig a;
    RansacConfig b;
    FusionThresholds fusion;
    /// Optional per-category thresholds file; overrides `fusion`.
    std::string thresholds_file;
    /// Overlap threshold for OL1 and OL3 unless the category sets its own.
    double tau = 0.05;
};

struct RunConfig {
    std::uint64_t seed = 0;
    unsigned workers = 1;
    GenConfig gen;
    RegisterConfig reg;
};

/// JSON with optional top-level keys seed, workers, model and the sections
/// gen, pipeline_a, pipeline_b, fusion. Unknown keys or wrongly typed values
/// throw InvalidInput naming the key.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
void validate(const RunConfig& cfg);

/// Built-in category shapes: 0-9 blobs, 10-11 planes, 12-13 cylinders,
/// 14 box, 15 composite; wraps around beyond 16.
ShapeKind default_category_shape(int category);

struct PairRef {
    int category = 0;
    std::string pair_id;
    std::filesystem::path dir;
};

/// Pairs under `<dataset>/pairs`, ordered by category then pair id.
std::vector<PairRef> list_pairs(const std::filesystem::path& dataset_dir);

/// Stable per-pair seed from the run seed and the pair id.
RngSeed pair_seed(RngSeed run_seed, const std::string& pair_id);

struct BatchReport {
    std::size_t processed = 0;
    std::size_t skipped = 0;
    std::vector<std::string> failures;  // "<pair_id>: <message>"
    std::vector<std::string> warnings;
    bool ok() const { return failures.empty(); }
};

/// Writes `<out>/pairs/<category>/<pair_id>/{src.xyz,tgt.xyz,gt.txt,mask.txt}`.
BatchReport generate_dataset(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Runs the selected model on every pair, writing
/// `<results>/<category>/<pair_id>/transform.txt` (plus t1/t2/t3 and a
/// decision row for the fused model) and, for the fused model,
/// `<results>/decisions.csv`. With `resume`, pairs that already have a
/// transform are left alone.
BatchReport register_dataset(const RunConfig& cfg, const std::filesystem::path& dataset_dir,
                             const std::filesystem::path& results_dir, bool resume);

struct PairEvaluation {
    int category = 0;
    std::string pair_id;
    PairMetrics metrics;
};

struct CategorySummary {
    std::string label;  // category id or "total"
    std::size_t count = 0;
    double error_r_deg = 0.0;
    double error_t = 0.0;
    double mae_r_deg = 0.0;
    double mae_t = 0.0;
    double mse = 0.0;
};

struct EvalReport {
    std::vector<PairEvaluation> pairs;
    std::vector<CategorySummary> summary;  // ascending category, then total
    BatchReport batch;
};

EvalReport evaluate_results(const std::filesystem::path& dataset_dir, const std::filesystem::path& results_dir);
std::vector<CategorySummary> summarize(const std::vector<PairEvaluation>& pairs);

inline constexpr const char* kMetricsCsvHeader = "category,pair_id,error_r_deg,error_t,mae_r_deg,mae_t,mse";
inline constexpr const char* kSummaryCsvHeader = "category,count,error_r_deg,error_t,mae_r_deg,mae_t,mse";

std::string metrics_csv(const std::vector<PairEvaluation>& pairs);
std::string summary_csv(const std::vector<CategorySummary>& summary);

/// Writes metrics.csv and summary.csv into `out_dir`.
EvalReport evaluate_dataset(const std::filesystem::path& dataset_dir, const std::filesystem::path& results_dir,
                            const std::filesystem::path& out_dir);

}  // namespace regfuse
