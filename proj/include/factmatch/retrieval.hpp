#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "factmatch/candidates.hpp"
#include "factmatch/corpus.hpp"
#include "factmatch/detection.hpp"
#include "factmatch/gateway.hpp"
#include "factmatch/textproc.hpp"

namespace factmatch::retrieval {

enum class PairLabel { positive, negative };

struct LabeledPair {
    std::string tweet_id;
    std::string claim_id;
    PairLabel label = PairLabel::positive;

    friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

struct RetrievalDataset {
    std::vector<LabeledPair> pairs;

    std::size_t size() const noexcept { return pairs.size(); }
    std::size_t count(PairLabel l) const;
};

struct PositivePair {
    std::string tweet_id;
    std::string claim_id;
};

/// tweet id -> claim ids a human marked relevant.
using RelevanceMap = std::map<std::string, std::set<std::string>>;

enum class NegativeMode {
    /// n negatives for every positive pair (the default; 10 x positives).
    per_positive,
    /// n negatives for every tweet, however many positives it has.
    per_tweet,
};

/// For each tweet (in first-appearance order) emits its positives followed by
/// its negatives. Negatives are drawn uniformly without replacement from
/// `candidate_claims` minus every claim relevant to the tweet, so a tweet
/// never sees the same negative twice. Throws InvalidArgument naming the tweet
/// when too few unrelated claims remain.
RetrievalDataset sample_negatives(std::span<const PositivePair> positives,
                                  std::span<const std::string> candidate_claims, const RelevanceMap& relevant,
                                  std::size_t n, std::uint64_t seed, NegativeMode mode = NegativeMode::per_positive);

struct ClaimRef {
    std::string_view id;
    std::string_view text;
};

/// A fitted pair scorer. score() is pure and thread-safe.
class RankerModel {
  public:
    virtual ~RankerModel() = default;
    /// One relevance score per claim, nominally in [0, 1].
    virtual std::vector<double> score(std::string_view tweet_text, std::span<const ClaimRef> claims) const = 0;
    virtual void save(std::ostream& out) const = 0;
    virtual std::string describe() const = 0;
};

struct FitContext {
    const ClaimSet& claims;
    const TweetSet& tweets;
};

class RankerPort {
  public:
    virtual ~RankerPort() = default;
    virtual std::unique_ptr<RankerModel> fit(const RetrievalDataset& train, const FitContext& ctx) const = 0;
    virtual std::string name() const = 0;
};

struct ScoredClaim {
    std::string claim_id;
    double score = 0.0;

    friend bool operator==(const ScoredClaim&, const ScoredClaim&) = default;
};

struct RankedClaims {
    /// Descending score, ascending claim id on ties, each claim once.
    std::vector<ScoredClaim> entries;
    /// Scores outside [0, 1] that were clamped at the port boundary.
    std::size_t clamped = 0;
};

/// Scores every claim once and orders them. Out-of-range scores are clamped
/// to [0, 1] with a warning; non-finite scores raise ProtocolError.
RankedClaims rank_claims(const RankerModel& ranker, std::string_view tweet_text, std::span<const ClaimRef> claims);
RankedClaims rank_claims(const RankerModel& ranker, std::string_view tweet_text, const ClaimSet& claims);

using Rankings = std::map<std::string, RankedClaims>;

/// Fraction of ranked tweets whose top-k holds at least one relevant claim.
/// Throws InvalidArgument for k == 0, no tweets, or a tweet without truth.
double hit_ratio_at_k(const Rankings& rankings, const RelevanceMap& truth, std::size_t k);
/// Mean over tweets of |relevant in top-k| / |relevant|.
double recall_at_k(const Rankings& rankings, const RelevanceMap& truth, std::size_t k);

struct PipelineResult {
    std::string claim_id;
    double score = 0.0;
    std::size_t rank = 0;
};

struct PipelineRecord {
    std::string tweet_id;
    detection::ClassLabel gate = detection::ClassLabel::no_claim;
    double gate_probability = 0.0;
    std::vector<PipelineResult> results;

    nlohmann::json to_json() const;
    static PipelineRecord from_json(const nlohmann::json& j);
};

/// Detection gate, then retrieval for tweets that pass. Gated-out tweets never
/// reach the ranker. Failures are rethrown as StageError("detect"|"retrieve").
PipelineRecord run_pipeline(const detection::DetectorModel& detector, const RankerModel& ranker,
                            std::string_view tweet_id, std::string_view tweet_text, const ClaimSet& claims,
                            std::size_t top_n = 3, double threshold = 0.5);

// Rankers -------------------------------------------------------------------

/// Okapi BM25 over the claim corpus; score s maps to s / (1 + s).
class Bm25RankerModel final : public RankerModel {
  public:
    explicit Bm25RankerModel(text::Bm25Index index);
    std::vector<double> score(std::string_view tweet_text, std::span<const ClaimRef> claims) const override;
    void save(std::ostream& out) const override;
    std::string describe() const override { return "bm25"; }
    const text::Bm25Index& index() const noexcept { return index_; }

  private:
    text::Bm25Index index_;
    std::map<std::string, std::size_t, std::less<>> position_;
};

class Bm25RankerPort final : public RankerPort {
  public:
    explicit Bm25RankerPort(text::Bm25Params params = {}, text::TokenizerOptions options = {})
        : params_(params), options_(options)
    {}
    /// Untrained: indexes ctx.claims, ignores the pair dataset.
    std::unique_ptr<RankerModel> fit(const RetrievalDataset& train, const FitContext& ctx) const override;
    std::string name() const override { return "bm25"; }

  private:
    text::Bm25Params params_;
    text::TokenizerOptions options_;
};

/// TF-IDF cosine between tweet and claim, vectorizer fitted on the claims.
class TfIdfCosineRankerModel final : public RankerModel {
  public:
    /// `claims` are (id, text) pairs whose vectors are precomputed.
    TfIdfCosineRankerModel(text::TfIdfModel model, std::vector<std::pair<std::string, std::string>> claims);
    std::vector<double> score(std::string_view tweet_text, std::span<const ClaimRef> claims) const override;
    void save(std::ostream& out) const override;
    std::string describe() const override { return "tfidf-cosine"; }

  private:
    text::TfIdfModel model_;
    std::map<std::string, std::size_t, std::less<>> position_;
    std::vector<std::pair<std::string, std::string>> claims_;
    std::vector<text::SparseVector> claim_vectors_;
};

class TfIdfCosineRankerPort final : public RankerPort {
  public:
    explicit TfIdfCosineRankerPort(text::TokenizerOptions options = {}) : options_(options) {}
    std::unique_ptr<RankerModel> fit(const RetrievalDataset& train, const FitContext& ctx) const override;
    std::string name() const override { return "tfidf-cosine"; }

  private:
    text::TokenizerOptions options_;
};

/// Bi-encoder baseline: (1 + cosine) / 2 between embeddings.
class EncoderCosineRankerModel final : public RankerModel {
  public:
    /// Embeddings of `claims` ((id, text) pairs) are computed once up front;
    /// other claims are embedded on demand.
    EncoderCosineRankerModel(std::shared_ptr<const candidates::EncoderPort> encoder,
                             std::vector<std::pair<std::string, std::string>> claims);
    std::vector<double> score(std::string_view tweet_text, std::span<const ClaimRef> claims) const override;
    void save(std::ostream& out) const override;
    std::string describe() const override { return "encoder-cosine(" + encoder_->name() + ")"; }

  private:
    std::shared_ptr<const candidates::EncoderPort> encoder_;
    std::vector<std::pair<std::string, std::string>> claims_;
    std::map<std::string, std::size_t, std::less<>> position_;
    candidates::DenseMatrix claim_vectors_;
};

class EncoderCosineRankerPort final : public RankerPort {
  public:
    explicit EncoderCosineRankerPort(std::shared_ptr<const candidates::EncoderPort> encoder);
    std::unique_ptr<RankerModel> fit(const RetrievalDataset& train, const FitContext& ctx) const override;
    std::string name() const override { return "encoder-cosine"; }

  private:
    std::shared_ptr<const candidates::EncoderPort> encoder_;
};

/// 1.0 when the trimmed, case-folded texts are identical, else 0.0.
class ExactMatchRanker final : public RankerModel, public RankerPort {
  public:
    std::vector<double> score(std::string_view tweet_text, std::span<const ClaimRef> claims) const override;
    void save(std::ostream& out) const override;
    std::string describe() const override { return "exact-match"; }
    std::unique_ptr<RankerModel> fit(const RetrievalDataset& train, const FitContext& ctx) const override;
    std::string name() const override { return "exact-match"; }
};

/// Cross-encoder trained and served by the model gateway.
class GatewayRankerModel final : public RankerModel {
  public:
    GatewayRankerModel(std::shared_ptr<const gateway::Client> client, gateway::RemoteModelRef ref);
    std::vector<double> score(std::string_view tweet_text, std::span<const ClaimRef> claims) const override;
    void save(std::ostream& out) const override;
    std::string describe() const override { return "gateway-cross-encoder(" + ref_.model_id + ")"; }

  private:
    std::shared_ptr<const gateway::Client> client_;
    gateway::RemoteModelRef ref_;
};

class GatewayRankerPort final : public RankerPort {
  public:
    GatewayRankerPort(std::shared_ptr<const gateway::Client> client, nlohmann::json hyperparams);
    std::unique_ptr<RankerModel> fit(const RetrievalDataset& train, const FitContext& ctx) const override;
    std::string name() const override { return "gateway-cross-encoder"; }

  private:
    std::shared_ptr<const gateway::Client> client_;
    nlohmann::json hyperparams_;
};

/// Reads any ranker file written by RankerModel::save. Encoder-cosine models
/// need `encoder`, remote models need `client`.
std::unique_ptr<RankerModel> load_ranker(std::istream& in, std::shared_ptr<const gateway::Client> client = nullptr,
                                         std::shared_ptr<const candidates::EncoderPort> encoder = nullptr);

}  // namespace factmatch::retrieval
