#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "factmatch/candidates.hpp"
#include "factmatch/corpus.hpp"
#include "factmatch/detection.hpp"
#include "factmatch/retrieval.hpp"

namespace factmatch::app {

struct Lease {
    candidates::PoolEntry pair;
    std::string annotator;
    Timestamp expires_at{};
};

enum class LabelStatus { ok, not_found, conflict, bad_request };

struct LabelOutcome {
    LabelStatus status = LabelStatus::ok;
    std::string message;
    std::optional<AnnotationPair> pair;
};

/// Hands out pool pairs to annotators and records their labels. Pairs are
/// served by (rank, claim id, tweet id); a served pair is leased to one
/// annotator until it is labeled or the lease expires. All writes go through
/// one mutex, and each accepted label is appended to the log file.
class AnnotationQueue {
  public:
    AnnotationQueue(std::shared_ptr<AnnotationStore> store, const candidates::PairPool& pool,
                    std::chrono::seconds lease_ttl, Clock clock = system_now,
                    std::optional<std::filesystem::path> log_path = std::nullopt);

    /// The annotator's live lease if it has one, otherwise the first free
    /// unlabeled pair; nullopt when nothing is left to hand out.
    std::optional<Lease> next(std::string_view annotator);

    /// Labels need `relabel` once the pair is terminal; a pair leased to
    /// someone else is a conflict.
    LabelOutcome label(std::string_view tweet_id, std::string_view claim_id, Label label,
                       std::string_view annotator, bool relabel = false);

    /// {labeled, total, annotators: {name: count}, claims_complete, claims_total, active_leases}
    nlohmann::json progress() const;

    const AnnotationStore& store() const noexcept { return *store_; }

  private:
    using Key = std::pair<std::string, std::string>;

    bool live(const Lease& l, Timestamp now) const { return l.expires_at > now; }

    std::shared_ptr<AnnotationStore> store_;
    std::vector<candidates::PoolEntry> order_;
    std::chrono::seconds ttl_;
    Clock clock_;
    mutable std::mutex mutex_;
    std::map<Key, Lease> leases_;
    std::optional<std::ofstream> log_;
};

struct ServiceConfig {
    std::chrono::seconds lease_ttl{600};
    std::optional<std::filesystem::path> annotations_log;
    /// Served at /console when set.
    std::optional<std::filesystem::path> console_dir;
    std::size_t top_n = 3;
    double threshold = 0.5;
    Clock clock = system_now;
};

/// HTTP front end:
///   GET  /health
///   GET  /pairs/next?annotator=NAME       200 pair card | 204
///   POST /pairs/{tweet_id}/{claim_id}/label {label, annotator, relabel?}
///   GET  /progress
///   POST /predict {text, tweet_id?}        pipeline record
/// Errors are {code, message}.
class Service {
  public:
    Service(std::shared_ptr<AnnotationStore> store, const candidates::PairPool& pool, ServiceConfig config = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    void set_models(std::shared_ptr<const detection::DetectorModel> detector,
                    std::shared_ptr<const retrieval::RankerModel> ranker);

    AnnotationQueue& queue();

    /// Binds (port 0 picks a free one) and serves on a background thread.
    /// Returns the bound port.
    int start(const std::string& host, int port);
    void stop();
    /// Blocks until stop() is called.
    void wait();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace factmatch::app
