#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "factmatch/timeutil.hpp"

namespace factmatch {

enum class Verdict { false_claim, unsubstantiated };
enum class TweetKind { original, reply, quote };
enum class Label { relevant, not_relevant, unlabeled };

std::string_view to_string(Verdict v);
std::string_view to_string(TweetKind k);
std::string_view to_string(Label l);
std::optional<Verdict> parse_verdict(std::string_view s);
std::optional<TweetKind> parse_tweet_kind(std::string_view s);
std::optional<Label> parse_label(std::string_view s);

inline bool is_terminal(Label l) { return l != Label::unlabeled; }

struct Claim {
    std::string id;
    std::string text;
    Verdict verdict = Verdict::false_claim;
    Date verified_date{};
    std::optional<std::string> source_url;
};

struct Tweet {
    std::string id;
    std::string text;
    Timestamp created_at{};
    std::string lang;
    TweetKind kind = TweetKind::original;
};

/// Ordered, id-indexed, immutable collection. Lookup by id is O(1).
template <typename Record>
class RecordSet {
  public:
    RecordSet() = default;
    explicit RecordSet(std::vector<Record> records);

    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const Record& operator[](std::size_t i) const { return records_[i]; }
    auto begin() const noexcept { return records_.begin(); }
    auto end() const noexcept { return records_.end(); }
    const std::vector<Record>& records() const noexcept { return records_; }

    bool contains(std::string_view id) const { return index_.find(std::string(id)) != index_.end(); }
    const Record* find(std::string_view id) const;
    /// Throws UnknownIdError.
    const Record& at(std::string_view id) const;

  private:
    std::vector<Record> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

using ClaimSet = RecordSet<Claim>;
using TweetSet = RecordSet<Tweet>;

extern template class RecordSet<Claim>;
extern template class RecordSet<Tweet>;

struct IngestFilter {
    Date start{};
    Date end{};
    std::set<std::string> languages;
    std::set<TweetKind> kinds;

    /// Validates start <= end and non-empty sets; throws InvalidArgument.
    static IngestFilter make(Date start, Date end, std::set<std::string> languages, std::set<TweetKind> kinds);

    bool accepts(const Tweet& t) const;
};

/// Claims file: a JSON array of {id, text, verdict, verified_date, source_url?}.
ClaimSet load_claims(const std::filesystem::path& path);
ClaimSet parse_claims(std::string_view json_text, const std::string& origin = "<memory>");

/// Tweets file: one JSON object per line. Retweets are always dropped; the
/// filter, when given, is applied after parsing. Output keeps input order.
TweetSet load_tweets(const std::filesystem::path& path);
TweetSet load_tweets(const std::filesystem::path& path, const IngestFilter& filter);
TweetSet parse_tweets(std::istream& in, const std::optional<IngestFilter>& filter = std::nullopt,
                      const std::string& origin = "<stream>");

void write_claims(std::ostream& out, const ClaimSet& claims);
void write_tweets(std::ostream& out, const TweetSet& tweets);

struct AnnotationPair {
    std::string tweet_id;
    std::string claim_id;
    Label label = Label::unlabeled;
    std::string annotator;
    std::optional<Timestamp> labeled_at;

    friend bool operator==(const AnnotationPair&, const AnnotationPair&) = default;
};

enum class RecordOutcome { inserted, updated, unchanged };

/// Ground-truth store of (tweet, claim) labels. Single writer / many readers:
/// every method is safe to call concurrently, writes are serialized.
class AnnotationStore {
  public:
    AnnotationStore(std::shared_ptr<const ClaimSet> claims, std::shared_ptr<const TweetSet> tweets,
                    Clock clock = system_now);

    AnnotationStore(const AnnotationStore&) = delete;
    AnnotationStore& operator=(const AnnotationStore&) = delete;

    /// Registers an unlabeled candidate pair; no-op when the pair exists.
    /// Returns true when inserted.
    bool add_candidate(std::string_view tweet_id, std::string_view claim_id);

    /// Upserts a terminal label. Identical label is a no-op. Throws
    /// UnknownIdError for ids outside the loaded sets and
    /// InvalidTransitionError when `label` is not terminal.
    RecordOutcome record_annotation(std::string_view tweet_id, std::string_view claim_id, Label label,
                                    std::string_view annotator);

    std::optional<AnnotationPair> find(std::string_view tweet_id, std::string_view claim_id) const;
    std::size_t size() const;
    /// Sorted by (tweet_id, claim_id).
    std::vector<AnnotationPair> pairs() const;

    /// Relevant claim ids per tweet, for every tweet present in the store.
    std::map<std::string, std::set<std::string>> relevant_claims() const;

    /// JSON lines, one record per pair, sorted by (tweet_id, claim_id).
    void export_jsonl(std::ostream& out) const;
    /// Accepts export output as well as append-only logs (last record for a
    /// pair wins). Ids must exist in the loaded sets.
    void import_jsonl(std::istream& in, const std::string& origin = "<stream>");
    /// Serialized single line for one pair, as written by export and logs.
    static std::string to_json_line(const AnnotationPair& p);

    const ClaimSet& claims() const noexcept { return *claims_; }
    const TweetSet& tweets() const noexcept { return *tweets_; }
    std::shared_ptr<const ClaimSet> claims_ptr() const noexcept { return claims_; }
    std::shared_ptr<const TweetSet> tweets_ptr() const noexcept { return tweets_; }

  private:
    using Key = std::pair<std::string, std::string>;

    void check_ids(std::string_view tweet_id, std::string_view claim_id) const;

    std::shared_ptr<const ClaimSet> claims_;
    std::shared_ptr<const TweetSet> tweets_;
    Clock clock_;
    mutable std::shared_mutex mutex_;
    std::map<Key, AnnotationPair> pairs_;
};

struct CorpusStats {
    std::size_t tweets_with_claim = 0;
    std::size_t tweets_without_claim = 0;
    std::size_t pairs_relevant = 0;
    std::size_t pairs_not_relevant = 0;
    std::size_t pairs_unlabeled = 0;
    /// number of relevant claims -> number of tweets; only keys >= 1.
    std::map<std::size_t, std::size_t> claims_per_tweet;

    std::size_t tweets() const noexcept { return tweets_with_claim + tweets_without_claim; }
    double with_claim_fraction() const noexcept
    {
        return tweets() == 0 ? 0.0 : static_cast<double>(tweets_with_claim) / static_cast<double>(tweets());
    }
};

CorpusStats corpus_stats(const AnnotationStore& store);

}  // namespace factmatch
