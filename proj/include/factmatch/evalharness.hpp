#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "factmatch/corpus.hpp"
#include "factmatch/detection.hpp"
#include "factmatch/folds.hpp"
#include "factmatch/ports.hpp"
#include "factmatch/retrieval.hpp"
#include "factmatch/stats.hpp"

namespace factmatch::eval {

inline constexpr double kSignificanceLevel = 0.01;

struct ArmConfig {
    std::string name;
    std::string port;
    nlohmann::json hyperparams = nlohmann::json::object();
    /// Overrides EvalConfig::oversample for this arm.
    std::optional<bool> oversample;
};

/// Versioned run configuration.
struct EvalConfig {
    static constexpr int kVersion = 1;

    TaskKind task = TaskKind::detect;
    FoldMode mode = FoldMode::lto;
    std::size_t n_folds = 5;
    std::uint64_t seed = 42;
    std::vector<ArmConfig> arms;
    bool oversample = true;
    std::size_t negatives_per_positive = 10;
    retrieval::NegativeMode negative_mode = retrieval::NegativeMode::per_positive;
    std::vector<std::size_t> k_grid{1, 3, 5, 10, 20};
    double threshold = 0.5;
    bool parallel_folds = true;
    /// Arm the others are tested against; empty means the first arm.
    std::string baseline;

    void validate() const;
    std::size_t baseline_index() const;
    /// Missing keys take defaults; `ports` may list names or
    /// {name, port, hyperparams, oversample} objects.
    static EvalConfig from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;
};

/// Everything cross-validation reads from the annotation store.
struct EvalInputs {
    const AnnotationStore& store;
    detection::DetectionDataset dataset;
    std::size_t excluded = 0;
    /// Non-empty relevance sets only.
    retrieval::RelevanceMap relevant;

    static EvalInputs from_store(const AnnotationStore& store);
};

/// LTO over dataset tweets (detect) or positive tweets (retrieve); LCO over claims.
FoldPlan make_plan(const EvalInputs& inputs, const EvalConfig& config);

struct Arm {
    std::string name;
    std::string port;
    std::shared_ptr<const detection::ClassifierPort> classifier;
    std::shared_ptr<const retrieval::RankerPort> ranker;
    bool oversample = true;
};

struct FoldMetrics {
    std::string metric;
    std::vector<double> values;
    MeanCi aggregate;
};

struct ArmResult {
    std::string name;
    std::string port;
    bool oversample = true;
    std::vector<FoldMetrics> metrics;

    const FoldMetrics& at(std::string_view metric) const;
};

/// Metric names in report order.
std::vector<std::string> metric_names(TaskKind task, const std::vector<std::size_t>& k_grid);

/// Runs every fold of `plan` for one arm. Fold i uses seed + i. Any failure is
/// rethrown as StageError("fold", i) for the lowest failing fold.
ArmResult cross_validate(const EvalInputs& inputs, const FoldPlan& plan, const Arm& arm, const EvalConfig& config);

struct Comparison {
    std::string baseline;
    std::string candidate;
    std::string metric;
    MeanCi baseline_stats;
    MeanCi candidate_stats;
    Significance test;
    bool significant = false;
};

std::vector<Comparison> compare_arms(const std::vector<ArmResult>& arms, std::size_t baseline_index);

struct FoldSummary {
    std::size_t train = 0;
    std::size_t valid = 0;
    std::size_t test = 0;
    std::size_t test_positive = 0;
    std::size_t held_out_claims = 0;
    std::size_t dropped_pairs = 0;
};

struct EvalRun {
    EvalConfig config;
    std::size_t excluded_tweets = 0;
    std::vector<FoldSummary> folds;
    std::size_t dropped_pairs = 0;
    std::vector<ArmResult> arms;
    std::vector<Comparison> comparisons;
};

std::vector<Arm> make_arms(const EvalConfig& config, const PortContext& ctx);

/// Plan, cross-validate every arm, compare against the baseline.
EvalRun run_eval(const AnnotationStore& store, const EvalConfig& config, const PortContext& ctx);

}  // namespace factmatch::eval
