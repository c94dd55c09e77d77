#include "factmatch/textproc.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "factmatch/binary_io.hpp"
#include "factmatch/error.hpp"

namespace factmatch::text {

namespace {

bool is_word_byte(unsigned char c)
{
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool is_space(unsigned char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool starts_with_nocase(std::string_view text, std::size_t pos, std::string_view prefix)
{
    if (pos + prefix.size() > text.size()) {
        return false;
    }
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char c = text[pos + i];
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>(c - 'A' + 'a');
        }
        if (c != prefix[i]) {
            return false;
        }
    }
    return true;
}

const std::set<std::string_view>& stopwords()
{
    static const std::set<std::string_view> words{
        "a",     "about", "above", "after", "again", "against", "all",   "am",    "an",    "and",   "any",
        "are",   "as",    "at",    "be",    "because", "been",  "before", "being", "below", "between", "both",
        "but",   "by",    "can",   "did",   "do",    "does",    "doing", "down",  "during", "each", "few",
        "for",   "from",  "further", "had", "has",   "have",    "having", "he",   "her",   "here",  "hers",
        "him",   "his",   "how",   "i",     "if",    "in",      "into",  "is",    "it",    "its",   "itself",
        "just",  "me",    "more",  "most",  "my",    "no",      "nor",   "not",   "now",   "of",    "off",
        "on",    "once",  "only",  "or",    "other", "our",     "ours",  "out",   "over",  "own",   "same",
        "she",   "should", "so",   "some",  "such",  "than",    "that",  "the",   "their", "theirs", "them",
        "then",  "there", "these", "they",  "this",  "those",   "through", "to",  "too",   "under", "until",
        "up",    "very",  "was",   "we",    "were",  "what",    "when",  "where", "which", "while", "who",
        "whom",  "why",   "will",  "with",  "you",   "your",    "yours"};
    return words;
}

}  // namespace

bool is_stopword(std::string_view term)
{
    return stopwords().count(term) != 0;
}

std::string stem(std::string_view w)
{
    auto ends = [&](std::string_view s) { return w.size() >= s.size() && w.substr(w.size() - s.size()) == s; };
    if (w.size() > 3 && ends("ies") && !ends("eies") && !ends("aies")) {
        return std::string(w.substr(0, w.size() - 3)) + "y";
    }
    if (w.size() > 3 && ends("es") && !ends("aes") && !ends("ees") && !ends("oes")) {
        return std::string(w.substr(0, w.size() - 1));
    }
    if (w.size() > 2 && ends("s") && !ends("us") && !ends("ss")) {
        return std::string(w.substr(0, w.size() - 1));
    }
    return std::string(w);
}

TokenStream tokenize(std::string_view text, const TokenizerOptions& options)
{
    TokenStream out;
    std::string current;
    auto flush = [&] {
        if (current.empty()) {
            return;
        }
        if (!(options.remove_stopwords && is_stopword(current))) {
            out.push_back(options.stem ? stem(current) : current);
        }
        current.clear();
    };

    std::size_t i = 0;
    while (i < text.size()) {
        auto c = static_cast<unsigned char>(text[i]);
        bool at_boundary = current.empty();
        if (at_boundary
            && (starts_with_nocase(text, i, "http://") || starts_with_nocase(text, i, "https://")
                || starts_with_nocase(text, i, "www."))) {
            while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) {
                ++i;
            }
            continue;
        }
        if (c == '@' && i + 1 < text.size()
            && (is_word_byte(static_cast<unsigned char>(text[i + 1])) || text[i + 1] == '_')) {
            flush();
            ++i;
            while (i < text.size() && (is_word_byte(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
                ++i;
            }
            continue;
        }
        if (is_word_byte(c)) {
            current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
        } else {
            flush();
        }
        ++i;
    }
    flush();
    return out;
}

double dot(std::span<const SparseEntry> a, std::span<const SparseEntry> b)
{
    double sum = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].index == b[j].index) {
            sum += a[i].weight * b[j].weight;
            ++i;
            ++j;
        } else if (a[i].index < b[j].index) {
            ++i;
        } else {
            ++j;
        }
    }
    return sum;
}

double norm(std::span<const SparseEntry> v)
{
    double sum = 0.0;
    for (const auto& e : v) {
        sum += e.weight * e.weight;
    }
    return std::sqrt(sum);
}

double cosine(std::span<const SparseEntry> a, std::span<const SparseEntry> b)
{
    if (a.empty() || b.empty()) {
        return 0.0;
    }
    double na = norm(a);
    double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

TfIdfModel TfIdfModel::fit(std::span<const TokenStream> docs, TokenizerOptions options)
{
    if (docs.empty()) {
        throw InvalidArgument("tf-idf: empty corpus");
    }
    std::map<std::string, std::size_t> df;
    for (const auto& doc : docs) {
        std::set<std::string_view> unique(doc.begin(), doc.end());
        for (auto term : unique) {
            ++df[std::string(term)];
        }
    }
    TfIdfModel model;
    model.doc_count_ = docs.size();
    model.options_ = options;
    const double n = static_cast<double>(docs.size());
    for (const auto& [term, count] : df) {
        model.terms_.push_back(term);
        model.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    model.rebuild_lookup();
    return model;
}

void TfIdfModel::rebuild_lookup()
{
    lookup_.clear();
    lookup_.reserve(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        lookup_.emplace(terms_[i], static_cast<std::uint32_t>(i));
    }
}

std::int64_t TfIdfModel::index_of(std::string_view term) const
{
    auto it = lookup_.find(std::string(term));
    return it == lookup_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

SparseVector TfIdfModel::vectorize(std::span<const std::string> tokens) const
{
    std::map<std::uint32_t, double> tf;
    for (const auto& t : tokens) {
        auto it = lookup_.find(t);
        if (it != lookup_.end()) {
            tf[it->second] += 1.0;
        }
    }
    SparseVector v;
    v.reserve(tf.size());
    for (const auto& [index, count] : tf) {
        v.push_back({index, count * idf_[index]});
    }
    double n = norm(v);
    if (n > 0.0) {
        for (auto& e : v) {
            e.weight /= n;
        }
    }
    return v;
}

SparseVector TfIdfModel::vectorize(std::string_view text) const
{
    auto tokens = tokenize(text, options_);
    return vectorize(std::span<const std::string>(tokens));
}

namespace {
constexpr std::string_view kTfIdfMagic{"FMTFIDF\0", 8};
constexpr std::string_view kBm25Magic{"FMBM25\0\0", 8};
constexpr std::uint32_t kTfIdfVersion = 1;
constexpr std::uint32_t kBm25Version = 1;

void write_options(std::ostream& out, const TokenizerOptions& o)
{
    binary::write_u32(out, (o.remove_stopwords ? 1U : 0U) | (o.stem ? 2U : 0U));
}

TokenizerOptions read_options(std::istream& in)
{
    auto bits = binary::read_u32(in);
    return TokenizerOptions{(bits & 1U) != 0, (bits & 2U) != 0};
}
}  // namespace

void TfIdfModel::save(std::ostream& out) const
{
    binary::write_header(out, kTfIdfMagic, kTfIdfVersion);
    write_options(out, options_);
    binary::write_u64(out, doc_count_);
    binary::write_u64(out, terms_.size());
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        binary::write_string(out, terms_[i]);
        binary::write_f64(out, idf_[i]);
    }
}

TfIdfModel TfIdfModel::load(std::istream& in)
{
    binary::expect_header(in, kTfIdfMagic, kTfIdfVersion);
    TfIdfModel m;
    m.options_ = read_options(in);
    m.doc_count_ = binary::read_u64(in);
    auto n = binary::read_u64(in);
    for (std::uint64_t i = 0; i < n; ++i) {
        m.terms_.push_back(binary::read_string(in));
        m.idf_.push_back(binary::read_f64(in));
    }
    m.rebuild_lookup();
    return m;
}

Bm25Index Bm25Index::build(std::span<const std::pair<std::string, TokenStream>> docs, Bm25Params params,
                           TokenizerOptions options)
{
    if (!(params.k1 > 0.0) || params.b < 0.0 || params.b > 1.0) {
        throw InvalidArgument("bm25: require k1 > 0 and 0 <= b <= 1");
    }
    Bm25Index index;
    index.params_ = params;
    index.options_ = options;
    std::set<std::string_view> seen_ids;
    double total = 0.0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const auto& [id, tokens] = docs[d];
        if (!seen_ids.insert(id).second) {
            throw DuplicateIdError(id);
        }
        index.doc_ids_.push_back(id);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total += static_cast<double>(tokens.size());
        std::map<std::string_view, std::uint32_t> tf;
        for (const auto& t : tokens) {
            ++tf[t];
        }
        for (const auto& [term, count] : tf) {
            auto it = index.postings_.find(term);
            if (it == index.postings_.end()) {
                it = index.postings_.emplace(std::string(term), std::vector<Posting>{}).first;
            }
            it->second.push_back({static_cast<std::uint32_t>(d), count});
        }
    }
    index.avg_doc_len_ = docs.empty() ? 0.0 : total / static_cast<double>(docs.size());
    return index;
}

std::vector<double> Bm25Index::score_all(std::span<const std::string> query) const
{
    std::vector<double> scores(doc_ids_.size(), 0.0);
    const double n = static_cast<double>(doc_ids_.size());
    for (const auto& term : query) {
        auto it = postings_.find(term);
        if (it == postings_.end()) {
            continue;
        }
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const Posting& p : it->second) {
            const double tf = static_cast<double>(p.tf);
            const double len_ratio = avg_doc_len_ > 0.0 ? doc_lengths_[p.doc] / avg_doc_len_ : 0.0;
            const double denom = tf + params_.k1 * (1.0 - params_.b + params_.b * len_ratio);
            scores[p.doc] += idf * tf * (params_.k1 + 1.0) / denom;
        }
    }
    return scores;
}

std::vector<ScoredDoc> Bm25Index::rank(std::span<const std::string> query, std::size_t k) const
{
    if (k == 0) {
        throw InvalidArgument("bm25: k must be >= 1");
    }
    if (query.empty()) {
        return {};
    }
    auto scores = score_all(query);
    std::vector<ScoredDoc> ranked;
    for (std::size_t d = 0; d < scores.size(); ++d) {
        if (scores[d] > 0.0) {
            ranked.push_back({doc_ids_[d], scores[d]});
        }
    }
    auto better = [](const ScoredDoc& a, const ScoredDoc& b) {
        return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    };
    if (ranked.size() > k) {
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<long>(k), ranked.end(), better);
        ranked.resize(k);
    } else {
        std::sort(ranked.begin(), ranked.end(), better);
    }
    return ranked;
}

void Bm25Index::save(std::ostream& out) const
{
    binary::write_header(out, kBm25Magic, kBm25Version);
    write_options(out, options_);
    binary::write_f64(out, params_.k1);
    binary::write_f64(out, params_.b);
    binary::write_u64(out, doc_ids_.size());
    for (std::size_t d = 0; d < doc_ids_.size(); ++d) {
        binary::write_string(out, doc_ids_[d]);
        binary::write_u32(out, doc_lengths_[d]);
    }
    binary::write_u64(out, postings_.size());
    for (const auto& [term, list] : postings_) {
        binary::write_string(out, term);
        binary::write_u64(out, list.size());
        for (const auto& p : list) {
            binary::write_u32(out, p.doc);
            binary::write_u32(out, p.tf);
        }
    }
}

Bm25Index Bm25Index::load(std::istream& in)
{
    binary::expect_header(in, kBm25Magic, kBm25Version);
    Bm25Index index;
    index.options_ = read_options(in);
    index.params_.k1 = binary::read_f64(in);
    index.params_.b = binary::read_f64(in);
    auto n = binary::read_u64(in);
    double total = 0.0;
    for (std::uint64_t d = 0; d < n; ++d) {
        index.doc_ids_.push_back(binary::read_string(in));
        index.doc_lengths_.push_back(binary::read_u32(in));
        total += index.doc_lengths_.back();
    }
    index.avg_doc_len_ = n == 0 ? 0.0 : total / static_cast<double>(n);
    auto terms = binary::read_u64(in);
    for (std::uint64_t t = 0; t < terms; ++t) {
        auto term = binary::read_string(in);
        auto count = binary::read_u64(in);
        std::vector<Posting> list;
        list.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            Posting p;
            p.doc = binary::read_u32(in);
            p.tf = binary::read_u32(in);
            if (p.doc >= n) {
                throw FormatVersionError("bm25: posting references unknown document");
            }
            list.push_back(p);
        }
        index.postings_.emplace(std::move(term), std::move(list));
    }
    return index;
}

}  // namespace factmatch::text
