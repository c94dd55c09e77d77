#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "factmatch/corpus.hpp"
#include "factmatch/gateway.hpp"
#include "factmatch/textproc.hpp"

namespace factmatch::detection {

enum class ClassLabel { no_claim = 0, claim = 1 };

std::string_view to_string(ClassLabel l);

struct DetectionItem {
    std::string tweet_id;
    std::string text;
    ClassLabel label = ClassLabel::no_claim;

    friend bool operator==(const DetectionItem&, const DetectionItem&) = default;
};

struct DetectionDataset {
    std::vector<DetectionItem> items;

    std::size_t size() const noexcept { return items.size(); }
    bool empty() const noexcept { return items.empty(); }
    std::size_t count(ClassLabel l) const;
    std::vector<std::string> texts() const;
};

struct BuildResult {
    DetectionDataset dataset;
    /// Tweets left out because at least one of their pairs is still unlabeled
    /// and none is relevant.
    std::size_t excluded = 0;
};

/// A tweet is `claim` iff it has at least one relevant pair. Tweets come out
/// in TweetSet order.
BuildResult build_detection_dataset(const AnnotationStore& store);

/// Duplicates minority items (uniform, with replacement) until both classes
/// have the majority count, then shuffles with `seed`. Throws InvalidArgument
/// when a class is missing.
DetectionDataset oversample_minority(const DetectionDataset& dataset, std::uint64_t seed);

/// A trained detector. predict() is pure and thread-safe.
class DetectorModel {
  public:
    virtual ~DetectorModel() = default;
    /// Probability of the claim class, one per text, each in [0, 1].
    virtual std::vector<double> predict(std::span<const std::string> texts) const = 0;
    virtual void save(std::ostream& out) const = 0;
    virtual std::string describe() const = 0;
};

/// Something that can train a DetectorModel. fit() must be safe to call
/// concurrently (cross-validation folds may run in parallel).
class ClassifierPort {
  public:
    virtual ~ClassifierPort() = default;
    virtual std::unique_ptr<DetectorModel> fit(const DetectionDataset& train, const DetectionDataset& valid) const = 0;
    virtual std::string name() const = 0;
};

/// Validates the training set (non-empty, both classes) and delegates.
std::shared_ptr<const DetectorModel> train_detector(const ClassifierPort& port, const DetectionDataset& train,
                                                    const DetectionDataset& valid);

struct Detection {
    ClassLabel label = ClassLabel::no_claim;
    double probability = 0.0;
};

/// `claim` iff probability >= threshold.
Detection detect(const DetectorModel& model, std::string_view text, double threshold = 0.5);
ClassLabel decide(double probability, double threshold = 0.5);

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    /// Set when the class was never predicted (precision reported as 0).
    bool precision_undefined = false;
    /// Set when the class never occurs in the truth (recall reported as 0).
    bool recall_undefined = false;
};

struct PerClassMetrics {
    ClassMetrics claim;
    ClassMetrics no_claim;
    double accuracy = 0.0;
    Confusion confusion;

    /// Unweighted mean over the two classes.
    ClassMetrics macro() const;
};

/// Positive class = claim.
PerClassMetrics metrics_from_confusion(const Confusion& c);
Confusion confusion_of(std::span<const ClassLabel> truth, std::span<const ClassLabel> predicted);
PerClassMetrics evaluate_detector(const DetectorModel& model, const DetectionDataset& test, double threshold = 0.5);

// Native baseline: TF-IDF features + L2-regularized logistic regression.

struct LogisticConfig {
    double learning_rate = 2.0;
    double l2 = 1e-4;
    std::size_t max_iterations = 1000;
    /// Stop once every gradient component is below this.
    double tolerance = 1e-6;
    /// Validation log-loss is checked every `check_every` iterations; training
    /// stops after `patience` checks without improvement and keeps the best weights.
    std::size_t check_every = 25;
    std::size_t patience = 4;
    text::TokenizerOptions tokenizer;
};

class TfIdfLogisticModel final : public DetectorModel {
  public:
    TfIdfLogisticModel(text::TfIdfModel vectorizer, std::vector<double> weights, double bias,
                       std::size_t iterations);

    std::vector<double> predict(std::span<const std::string> texts) const override;
    void save(std::ostream& out) const override;
    std::string describe() const override;

    static std::unique_ptr<TfIdfLogisticModel> load(std::istream& in);

    const std::vector<double>& weights() const noexcept { return weights_; }
    double bias() const noexcept { return bias_; }
    std::size_t iterations() const noexcept { return iterations_; }
    const text::TfIdfModel& vectorizer() const noexcept { return vectorizer_; }

  private:
    text::TfIdfModel vectorizer_;
    std::vector<double> weights_;
    double bias_;
    std::size_t iterations_;
};

class TfIdfLogisticPort final : public ClassifierPort {
  public:
    explicit TfIdfLogisticPort(LogisticConfig config = {}) : config_(config) {}
    std::unique_ptr<DetectorModel> fit(const DetectionDataset& train, const DetectionDataset& valid) const override;
    std::string name() const override { return "tfidf-lr"; }

  private:
    LogisticConfig config_;
};

/// Detector trained and served by the model gateway. Only the remote model id
/// is persisted.
class GatewayDetectorModel final : public DetectorModel {
  public:
    GatewayDetectorModel(std::shared_ptr<const gateway::Client> client, gateway::RemoteModelRef ref);
    std::vector<double> predict(std::span<const std::string> texts) const override;
    void save(std::ostream& out) const override;
    std::string describe() const override;
    const gateway::RemoteModelRef& ref() const noexcept { return ref_; }

  private:
    std::shared_ptr<const gateway::Client> client_;
    gateway::RemoteModelRef ref_;
};

class GatewayClassifierPort final : public ClassifierPort {
  public:
    /// `hyperparams` are forwarded to /v1/train verbatim.
    GatewayClassifierPort(std::shared_ptr<const gateway::Client> client, nlohmann::json hyperparams);
    std::unique_ptr<DetectorModel> fit(const DetectionDataset& train, const DetectionDataset& valid) const override;
    std::string name() const override { return "gateway-classify"; }

  private:
    std::shared_ptr<const gateway::Client> client_;
    nlohmann::json hyperparams_;
};

/// Reads either model file kind; remote models need `client`.
std::unique_ptr<DetectorModel> load_detector(std::istream& in, std::shared_ptr<const gateway::Client> client = nullptr);

}  // namespace factmatch::detection
