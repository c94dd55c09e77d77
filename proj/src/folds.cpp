#include "factmatch/folds.hpp"

#include <algorithm>
#include <map>

#include "factmatch/detection.hpp"
#include "factmatch/error.hpp"
#include "factmatch/rng.hpp"

namespace factmatch::eval {

std::string_view to_string(FoldMode m)
{
    return m == FoldMode::lto ? "lto" : "lco";
}

FoldMode parse_fold_mode(std::string_view s)
{
    if (s == "lto" || s == "LTO") {
        return FoldMode::lto;
    }
    if (s == "lco" || s == "LCO") {
        return FoldMode::lco;
    }
    throw InvalidArgument("unknown fold mode '" + std::string(s) + "' (expected lto or lco)");
}

std::size_t FoldPlan::dropped_pairs() const
{
    std::size_t total = 0;
    for (const auto& f : folds) {
        total += f.dropped_pairs;
    }
    return total;
}

std::vector<std::size_t> partition_sizes(std::size_t total, std::size_t n)
{
    if (n == 0) {
        throw InvalidArgument("partition into zero parts");
    }
    std::vector<std::size_t> sizes(n, total / n);
    for (std::size_t i = 0; i < total % n; ++i) {
        ++sizes[i];
    }
    return sizes;
}

namespace {

// Fills train/valid of every fold from the tweets outside its test set.
// `order` fixes the traversal so the split is deterministic.
void split_remainder(FoldPlan& plan, const std::vector<std::string>& order)
{
    for (auto& fold : plan.folds) {
        std::set<std::string_view> test(fold.test.begin(), fold.test.end());
        std::vector<std::string> rest;
        rest.reserve(order.size() - fold.test.size());
        for (const auto& id : order) {
            if (test.count(id) == 0) {
                rest.push_back(id);
            }
        }
        const auto n_valid = static_cast<std::size_t>(static_cast<double>(rest.size()) * kValidationFraction);
        fold.valid.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_valid));
        fold.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_valid), rest.end());
    }
}

void check_unique(std::span<const std::string> ids)
{
    std::set<std::string_view> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            throw DuplicateIdError(id);
        }
    }
}

}  // namespace

FoldPlan make_lto_folds(std::span<const std::string> ids, std::size_t n, std::uint64_t seed,
                        const retrieval::RelevanceMap& relevant)
{
    if (n < 2) {
        throw InvalidArgument("need at least 2 folds");
    }
    if (ids.size() < n) {
        throw InvalidArgument("too few items for " + std::to_string(n) + " folds: " + std::to_string(ids.size()));
    }
    check_unique(ids);
    std::vector<std::string> order(ids.begin(), ids.end());
    auto rng = make_rng(seed);
    shuffle_in_place(std::span<std::string>(order), rng);

    FoldPlan plan;
    plan.mode = FoldMode::lto;
    plan.n_folds = n;
    plan.seed = seed;
    plan.relevant = relevant;
    plan.folds.resize(n);
    std::size_t offset = 0;
    const auto sizes = partition_sizes(order.size(), n);
    for (std::size_t f = 0; f < n; ++f) {
        plan.folds[f].test.assign(order.begin() + static_cast<std::ptrdiff_t>(offset),
                                  order.begin() + static_cast<std::ptrdiff_t>(offset + sizes[f]));
        offset += sizes[f];
    }
    split_remainder(plan, order);
    return plan;
}

FoldPlan make_lco_folds(const retrieval::RelevanceMap& relevant, std::span<const std::string> claim_ids,
                        std::span<const std::string> no_claim_tweets, std::size_t n, std::uint64_t seed)
{
    if (n < 2) {
        throw InvalidArgument("need at least 2 folds");
    }
    if (claim_ids.size() < n) {
        throw InvalidArgument("too few claims for " + std::to_string(n) + " folds: "
                              + std::to_string(claim_ids.size()));
    }
    check_unique(claim_ids);
    check_unique(no_claim_tweets);

    std::vector<std::string> claims(claim_ids.begin(), claim_ids.end());
    std::sort(claims.begin(), claims.end());
    auto rng = make_rng(seed);
    shuffle_in_place(std::span<std::string>(claims), rng);

    FoldPlan plan;
    plan.mode = FoldMode::lco;
    plan.n_folds = n;
    plan.seed = seed;
    plan.folds.resize(n);

    std::map<std::string, std::size_t, std::less<>> group_of;
    std::size_t offset = 0;
    const auto sizes = partition_sizes(claims.size(), n);
    for (std::size_t f = 0; f < n; ++f) {
        for (std::size_t i = 0; i < sizes[f]; ++i) {
            group_of.emplace(claims[offset + i], f);
            plan.folds[f].claims.push_back(claims[offset + i]);
        }
        std::sort(plan.folds[f].claims.begin(), plan.folds[f].claims.end());
        offset += sizes[f];
    }

    // Positive tweets, in id order (RelevanceMap is sorted).
    std::vector<std::string> order;
    for (const auto& [tweet, rel] : relevant) {
        if (rel.empty()) {
            continue;
        }
        std::vector<std::size_t> votes(n, 0);
        for (const auto& c : rel) {
            auto it = group_of.find(c);
            if (it == group_of.end()) {
                throw UnknownIdError("tweet " + tweet + " is relevant to unknown claim " + c);
            }
            ++votes[it->second];
        }
        const std::size_t best = *std::max_element(votes.begin(), votes.end());
        // Claims iterate in ascending id, so the first tied group hit is the
        // group of the lowest claim id.
        std::size_t fold = n;
        for (const auto& c : rel) {
            const auto g = group_of.find(c)->second;
            if (votes[g] == best) {
                fold = g;
                break;
            }
        }
        auto& kept = plan.relevant[tweet];
        for (const auto& c : rel) {
            if (group_of.find(c)->second == fold) {
                kept.insert(c);
            } else {
                ++plan.folds[fold].dropped_pairs;
            }
        }
        plan.folds[fold].test.push_back(tweet);
        order.push_back(tweet);
    }

    std::vector<std::string> negatives(no_claim_tweets.begin(), no_claim_tweets.end());
    std::sort(negatives.begin(), negatives.end());
    shuffle_in_place(std::span<std::string>(negatives), rng);
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        if (relevant.count(negatives[i]) != 0 && !relevant.at(negatives[i]).empty()) {
            throw InvalidArgument("tweet " + negatives[i] + " is listed as no-claim but has relevant claims");
        }
        plan.folds[i % n].test.push_back(negatives[i]);
    }
    order.insert(order.end(), negatives.begin(), negatives.end());

    // Train/valid traversal order is itself shuffled so validation tweets are
    // not biased towards low ids.
    shuffle_in_place(std::span<std::string>(order), rng);
    split_remainder(plan, order);
    return plan;
}

FoldPlan make_lco_folds(const AnnotationStore& store, std::size_t n, std::uint64_t seed)
{
    const auto built = detection::build_detection_dataset(store);
    std::vector<std::string> no_claim;
    for (const auto& item : built.dataset.items) {
        if (item.label == detection::ClassLabel::no_claim) {
            no_claim.push_back(item.tweet_id);
        }
    }
    std::vector<std::string> claim_ids;
    for (const auto& c : store.claims()) {
        claim_ids.push_back(c.id);
    }
    auto relevant = store.relevant_claims();
    std::erase_if(relevant, [](const auto& kv) { return kv.second.empty(); });
    return make_lco_folds(relevant, claim_ids, no_claim, n, seed);
}

}  // namespace factmatch::eval
