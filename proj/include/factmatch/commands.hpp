#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "factmatch/candidates.hpp"
#include "factmatch/corpus.hpp"
#include "factmatch/evalharness.hpp"
#include "factmatch/gateway.hpp"
#include "factmatch/manifest.hpp"
#include "factmatch/ports.hpp"
#include "factmatch/retrieval.hpp"

namespace factmatch::app {

namespace fs = std::filesystem;

struct CommandResult {
    RunManifest manifest;
    fs::path manifest_path;
};

/// Claims, tweets and the optional pool and annotation files that make up
/// an annotation store.
struct DataPaths {
    fs::path claims;
    fs::path tweets;
    std::optional<fs::path> pool;
    std::optional<fs::path> annotations;
};

/// Pool pairs become unlabeled candidates, then annotations are replayed.
std::shared_ptr<AnnotationStore> load_store(const DataPaths& paths, Clock clock = system_now);

/// Records every existing path of `paths` as a manifest input.
void add_inputs(RunManifest& m, const DataPaths& paths);

struct IngestOptions {
    fs::path claims;
    fs::path tweets;
    fs::path out_dir;
    std::optional<IngestFilter> filter;
};

/// Validates and normalizes both corpora into out_dir/claims.json and
/// out_dir/tweets.jsonl.
CommandResult cmd_ingest(const IngestOptions& opts);

struct EncoderConfig {
    /// "hash" or "gateway".
    std::string kind = "hash";
    std::size_t dim = 256;

    static EncoderConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

std::shared_ptr<const candidates::EncoderPort> make_encoder(const EncoderConfig& config,
                                                            std::shared_ptr<const gateway::Client> client);

struct CandidatesOptions {
    fs::path claims;
    fs::path tweets;
    fs::path out;
    std::size_t k = 100;
    EncoderConfig encoder;
    std::shared_ptr<const gateway::Client> client;
};

/// Writes the top-k pool as JSON lines to `out`.
CommandResult cmd_candidates(const CandidatesOptions& opts);

struct ExportOptions {
    DataPaths data;
    fs::path out;
};

CommandResult cmd_annotate_export(const ExportOptions& opts);

struct TrainOptions {
    eval::TaskKind task = eval::TaskKind::detect;
    std::string port;
    nlohmann::json hyperparams = nlohmann::json::object();
    DataPaths data;
    fs::path out;
    std::uint64_t seed = 42;
    bool oversample = true;
    std::size_t negatives_per_positive = 10;
    retrieval::NegativeMode negative_mode = retrieval::NegativeMode::per_positive;
    eval::PortContext ports;
};

/// Fits one model on all labeled data (10% of tweets held out for validation
/// on the detect task) and saves it to `out`.
CommandResult cmd_train(const TrainOptions& opts);

struct EvalOptions {
    DataPaths data;
    eval::EvalConfig config;
    fs::path out_dir;
    eval::PortContext ports;
};

struct EvalResult : CommandResult {
    fs::path report_json;
    fs::path report_markdown;
};

/// Writes out_dir/<run_id>/{report.json, report.md, manifest.json}.
EvalResult cmd_eval(const EvalOptions& opts);

struct PredictOptions {
    fs::path claims;
    fs::path tweets;
    fs::path detector;
    fs::path ranker;
    fs::path out_dir;
    std::size_t top_n = 3;
    double threshold = 0.5;
    eval::PortContext ports;
};

struct PredictResult : CommandResult {
    fs::path predictions;
};

/// One pipeline record per tweet in out_dir/<run_id>/predictions.jsonl.
PredictResult cmd_predict(const PredictOptions& opts);

struct AuditOptions {
    fs::path predictions;
    std::size_t n_per_class = 100;
    std::uint64_t seed = 42;
    fs::path out;
    /// Adds tweet text to the worksheet when given.
    std::optional<fs::path> tweets;
};

struct AuditResult : CommandResult {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

/// CSV worksheet of n predicted-claim and n predicted-no-claim tweets drawn
/// uniformly by seed. A class with fewer rows is taken whole, with a warning.
AuditResult cmd_audit_sample(const AuditOptions& opts);

struct ReportOptions {
    fs::path report_json;
    std::optional<fs::path> out;
};

/// Re-renders the markdown tables of a saved report.
std::string cmd_report(const ReportOptions& opts);

/// Quotes a CSV field when needed.
std::string csv_field(std::string_view s);

}  // namespace factmatch::app
