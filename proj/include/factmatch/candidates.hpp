#pragma once

#include <cstddef>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "factmatch/corpus.hpp"
#include "factmatch/gateway.hpp"
#include "factmatch/kernels.hpp"
#include "factmatch/textproc.hpp"

namespace factmatch::candidates {

using kernels::DenseMatrix;

/// Maps texts to fixed-dimension dense vectors. Same text, same vector.
class EncoderPort {
  public:
    virtual ~EncoderPort() = default;
    virtual std::vector<std::vector<double>> encode(std::span<const std::string> texts) const = 0;
    /// 0 when unknown until the first call.
    virtual std::size_t dim() const = 0;
    virtual std::string name() const = 0;
};

/// Feature hashing of tokens (FNV-1a, signed buckets), L2-normalized.
/// Deterministic across runs and platforms; no model weights needed.
class HashEncoder final : public EncoderPort {
  public:
    explicit HashEncoder(std::size_t dim = 256, text::TokenizerOptions options = {});

    std::vector<std::vector<double>> encode(std::span<const std::string> texts) const override;
    std::vector<double> encode_one(std::string_view text) const;
    std::size_t dim() const override { return dim_; }
    std::string name() const override { return "hash-" + std::to_string(dim_); }

  private:
    std::size_t dim_;
    text::TokenizerOptions options_;
};

/// Remote encoder behind /v1/embed.
class GatewayEncoder final : public EncoderPort {
  public:
    explicit GatewayEncoder(std::shared_ptr<const gateway::Client> client);

    std::vector<std::vector<double>> encode(std::span<const std::string> texts) const override;
    std::size_t dim() const override { return 0; }
    std::string name() const override { return "gateway:" + client_->endpoint().base_url; }

  private:
    std::shared_ptr<const gateway::Client> client_;
};

/// Row i is the embedding of texts[i]. Texts are sent in batches of
/// `batch_size`; a failing batch is reported as StageError("encode", batch).
DenseMatrix encode_all(const EncoderPort& encoder, std::span<const std::string> texts, std::size_t batch_size = 256);

struct ScoredTweet {
    std::string tweet_id;
    double similarity = 0.0;

    friend bool operator==(const ScoredTweet&, const ScoredTweet&) = default;
};

/// Descending cosine, ties by ascending tweet id, min(k, n) entries.
std::vector<ScoredTweet> top_k_tweets(std::span<const double> claim_vec, const DenseMatrix& tweet_vecs,
                                      std::span<const std::string> tweet_ids, std::size_t k);

struct PoolEntry {
    std::string claim_id;
    std::string tweet_id;
    std::size_t rank = 0;  // 1-based within the claim
    double similarity = 0.0;

    friend bool operator==(const PoolEntry&, const PoolEntry&) = default;
};

/// Candidate pairs for annotation, grouped by claim in claim-id order, each
/// group in rank order.
class PairPool {
  public:
    PairPool() = default;
    explicit PairPool(std::vector<PoolEntry> entries);

    const std::vector<PoolEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t distinct_tweets() const;
    std::size_t distinct_claims() const;

    void export_jsonl(std::ostream& out) const;
    static PairPool import_jsonl(std::istream& in, const std::string& origin = "<stream>");

  private:
    std::vector<PoolEntry> entries_;
};

/// Top-k tweets per claim by embedding cosine, merged into one pool.
PairPool build_pair_pool(const ClaimSet& claims, const TweetSet& tweets, const EncoderPort& encoder,
                         std::size_t k = 100);

}  // namespace factmatch::candidates
