#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace factmatch::text {

struct TokenizerOptions {
    bool remove_stopwords = false;
    bool stem = false;

    friend bool operator==(const TokenizerOptions&, const TokenizerOptions&) = default;
};

using TokenStream = std::vector<std::string>;

/// Lowercases ASCII, drops URLs and @-mentions, treats '#' and every other
/// ASCII non-alphanumeric byte as a separator. Bytes >= 0x80 are kept as part
/// of words so UTF-8 sequences survive intact.
TokenStream tokenize(std::string_view text, const TokenizerOptions& options = {});

bool is_stopword(std::string_view term);
/// Light plural-stripping stemmer (ies->y, es->e, s->"" with the usual guards).
std::string stem(std::string_view term);

struct SparseEntry {
    std::uint32_t index = 0;
    double weight = 0.0;

    friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Indices strictly increasing, no zero weights.
using SparseVector = std::vector<SparseEntry>;

double dot(std::span<const SparseEntry> a, std::span<const SparseEntry> b);
double norm(std::span<const SparseEntry> v);
/// 0.0 when either side is empty or has zero norm.
double cosine(std::span<const SparseEntry> a, std::span<const SparseEntry> b);

class TfIdfModel {
  public:
    /// Smoothed idf: ln((1 + N) / (1 + df)) + 1. Throws InvalidArgument on an empty corpus.
    static TfIdfModel fit(std::span<const TokenStream> docs, TokenizerOptions options = {});

    /// Raw tf x idf, L2 normalized; out-of-vocabulary terms dropped.
    SparseVector vectorize(std::span<const std::string> tokens) const;
    SparseVector vectorize(std::string_view text) const;

    std::size_t vocabulary_size() const noexcept { return terms_.size(); }
    std::size_t doc_count() const noexcept { return doc_count_; }
    /// -1 when absent.
    std::int64_t index_of(std::string_view term) const;
    double idf(std::size_t index) const { return idf_[index]; }
    const std::string& term(std::size_t index) const { return terms_[index]; }
    const TokenizerOptions& options() const noexcept { return options_; }

    void save(std::ostream& out) const;
    static TfIdfModel load(std::istream& in);

    friend bool operator==(const TfIdfModel& a, const TfIdfModel& b)
    {
        return a.terms_ == b.terms_ && a.idf_ == b.idf_ && a.doc_count_ == b.doc_count_ && a.options_ == b.options_;
    }

  private:
    std::vector<std::string> terms_;  // sorted; position = vocabulary index
    std::vector<double> idf_;
    std::unordered_map<std::string, std::uint32_t> lookup_;
    std::size_t doc_count_ = 0;
    TokenizerOptions options_;

    void rebuild_lookup();
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;

    friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Okapi BM25 over an in-memory inverted index.
class Bm25Index {
  public:
    struct Posting {
        std::uint32_t doc = 0;
        std::uint32_t tf = 0;
    };

    static Bm25Index build(std::span<const std::pair<std::string, TokenStream>> docs, Bm25Params params = {},
                           TokenizerOptions options = {});

    /// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)); query tokens are summed
    /// as given, so a repeated query term counts once per occurrence. Result is
    /// descending by score with ascending doc id on ties, zero scores omitted,
    /// at most k entries.
    std::vector<ScoredDoc> rank(std::span<const std::string> query, std::size_t k) const;

    /// Score of every document for `query`, in build order.
    std::vector<double> score_all(std::span<const std::string> query) const;

    std::size_t doc_count() const noexcept { return doc_ids_.size(); }
    double avg_doc_len() const noexcept { return avg_doc_len_; }
    const Bm25Params& params() const noexcept { return params_; }
    const TokenizerOptions& options() const noexcept { return options_; }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }

    void save(std::ostream& out) const;
    static Bm25Index load(std::istream& in);

  private:
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_len_ = 0.0;
    Bm25Params params_;
    TokenizerOptions options_;
};

}  // namespace factmatch::text
