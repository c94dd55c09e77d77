#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "factmatch/corpus.hpp"
#include "factmatch/rng.hpp"

namespace factmatch::testing {

Timestamp fixed_time();
Clock fixed_clock();

/// Zero-padded so lexicographic order equals numeric order.
std::string claim_id(std::size_t i);
std::string tweet_id(std::size_t i);

Claim make_claim(std::string id, std::string text);
Tweet make_tweet(std::string id, std::string text, std::string lang = "en", TweetKind kind = TweetKind::original,
                 std::string created_at = "2022-03-01T12:00:00Z");

/// 5,872 tweets over 83 claims; 8,300 pairs of which 3,637 relevant;
/// 2,359 tweets have a relevant claim (1,278 of them two).
std::shared_ptr<AnnotationStore> full_scale_store();

struct Corpus {
    std::shared_ptr<const ClaimSet> claims;
    std::shared_ptr<const TweetSet> tweets;
};

/// `n_claims` topical claims with `tweets_per_claim` tweets drawn from each
/// claim's vocabulary.
Corpus pool_corpus(std::size_t n_claims = 83, std::size_t tweets_per_claim = 100, std::uint64_t seed = 1);

/// 20 claims with disjoint vocabularies, 400 tweets: 200 on-topic (10 per
/// claim, each relevant to its claim) and 200 from an unrelated vocabulary.
/// Every tweet also has one not_relevant pair.
std::shared_ptr<AnnotationStore> separable_store(std::uint64_t seed = 7);

/// Random store with terminal labels only, for property tests.
std::shared_ptr<AnnotationStore> random_store(Rng& rng, std::size_t min_claims = 5, std::size_t max_claims = 30,
                                              std::size_t min_tweets = 10, std::size_t max_tweets = 80);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);
void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Writes claims.json / tweets.jsonl / annotations.jsonl for a store.
struct StoreFiles {
    std::filesystem::path claims;
    std::filesystem::path tweets;
    std::filesystem::path annotations;
};
StoreFiles write_store(const AnnotationStore& store, const std::filesystem::path& dir);

}  // namespace factmatch::testing
