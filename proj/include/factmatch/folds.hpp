#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factmatch/corpus.hpp"
#include "factmatch/retrieval.hpp"

namespace factmatch::eval {

enum class FoldMode { lto, lco };

std::string_view to_string(FoldMode m);
FoldMode parse_fold_mode(std::string_view s);

struct Fold {
    std::vector<std::string> train;
    std::vector<std::string> valid;
    std::vector<std::string> test;
    /// LCO only: the claim group held out by this fold.
    std::vector<std::string> claims;
    /// LCO only: relevant pairs of this fold's tweets whose claim sits in another group.
    std::size_t dropped_pairs = 0;
};

struct FoldPlan {
    FoldMode mode = FoldMode::lto;
    std::size_t n_folds = 5;
    std::uint64_t seed = 0;
    std::vector<Fold> folds;
    /// Relevance kept for retrieval. LTO: everything; LCO: only pairs whose
    /// claim lies in the tweet's own fold group.
    retrieval::RelevanceMap relevant;

    std::size_t dropped_pairs() const;
};

/// Share of the non-test tweets held out for validation.
inline constexpr double kValidationFraction = 0.1;

/// Shuffles `ids` with `seed` and cuts them into n near-equal test sets (the
/// first size % n folds get one extra). The rest of each fold is split
/// 90/10 into train/valid. Throws InvalidArgument when |ids| < n.
FoldPlan make_lto_folds(std::span<const std::string> ids, std::size_t n, std::uint64_t seed,
                        const retrieval::RelevanceMap& relevant = {});

/// Claims (sorted, then shuffled by seed) are cut into n near-equal groups.
/// A positive tweet goes to the fold holding most of its relevant claims,
/// ties to the fold of its lowest claim id; its relevant pairs in other
/// groups are dropped. `no_claim_tweets` are shuffled and dealt round-robin.
FoldPlan make_lco_folds(const retrieval::RelevanceMap& relevant, std::span<const std::string> claim_ids,
                        std::span<const std::string> no_claim_tweets, std::size_t n, std::uint64_t seed);

/// Convenience overload over an annotation store: positives are tweets with
/// a relevant pair, no-claim tweets are those whose pairs are all labeled
/// not_relevant.
FoldPlan make_lco_folds(const AnnotationStore& store, std::size_t n, std::uint64_t seed);

/// Sizes of an n-way near-equal partition of `total` items.
std::vector<std::size_t> partition_sizes(std::size_t total, std::size_t n);

}  // namespace factmatch::eval
