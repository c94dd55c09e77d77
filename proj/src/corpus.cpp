#include "factmatch/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "factmatch/error.hpp"

namespace factmatch {

using nlohmann::json;

std::string_view to_string(Verdict v)
{
    return v == Verdict::false_claim ? "false" : "unsubstantiated";
}

std::string_view to_string(TweetKind k)
{
    switch (k) {
    case TweetKind::original: return "original";
    case TweetKind::reply: return "reply";
    case TweetKind::quote: return "quote";
    }
    return "original";
}

std::string_view to_string(Label l)
{
    switch (l) {
    case Label::relevant: return "relevant";
    case Label::not_relevant: return "not_relevant";
    case Label::unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

std::optional<Verdict> parse_verdict(std::string_view s)
{
    if (s == "false") return Verdict::false_claim;
    if (s == "unsubstantiated") return Verdict::unsubstantiated;
    return std::nullopt;
}

std::optional<TweetKind> parse_tweet_kind(std::string_view s)
{
    if (s == "original") return TweetKind::original;
    if (s == "reply") return TweetKind::reply;
    if (s == "quote") return TweetKind::quote;
    return std::nullopt;
}

std::optional<Label> parse_label(std::string_view s)
{
    if (s == "relevant") return Label::relevant;
    if (s == "not_relevant") return Label::not_relevant;
    if (s == "unlabeled") return Label::unlabeled;
    return std::nullopt;
}

template <typename Record>
RecordSet<Record>::RecordSet(std::vector<Record> records) : records_(std::move(records))
{
    index_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (!index_.emplace(records_[i].id, i).second) {
            throw DuplicateIdError(records_[i].id);
        }
    }
}

template <typename Record>
const Record* RecordSet<Record>::find(std::string_view id) const
{
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &records_[it->second];
}

template <typename Record>
const Record& RecordSet<Record>::at(std::string_view id) const
{
    const Record* r = find(id);
    if (r == nullptr) {
        throw UnknownIdError("unknown id: " + std::string(id));
    }
    return *r;
}

template class RecordSet<Claim>;
template class RecordSet<Tweet>;

IngestFilter IngestFilter::make(Date start, Date end, std::set<std::string> languages, std::set<TweetKind> kinds)
{
    if (!start.ok() || !end.ok() || std::chrono::sys_days{start} > std::chrono::sys_days{end}) {
        throw InvalidArgument("ingest filter: start date must not be after end date");
    }
    if (languages.empty() || kinds.empty()) {
        throw InvalidArgument("ingest filter: language and kind sets must be non-empty");
    }
    return IngestFilter{start, end, std::move(languages), std::move(kinds)};
}

bool IngestFilter::accepts(const Tweet& t) const
{
    auto day = std::chrono::sys_days{utc_date(t.created_at)};
    return day >= std::chrono::sys_days{start} && day <= std::chrono::sys_days{end} && languages.count(t.lang) != 0
           && kinds.count(t.kind) != 0;
}

namespace {

std::string_view trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\r\n\f\v";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::size_t line_of(std::string_view text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

/// Byte offsets where each element of a top-level JSON array starts.
std::vector<std::size_t> array_element_offsets(std::string_view text)
{
    std::vector<std::size_t> out;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    bool expect_element = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (depth == 1 && expect_element && c != ' ' && c != '\n' && c != '\r' && c != '\t' && c != ']') {
            out.push_back(i);
            expect_element = false;
        }
        switch (c) {
        case '"': in_string = true; break;
        case '[':
        case '{':
            ++depth;
            if (depth == 1) {
                expect_element = true;
            }
            break;
        case ']':
        case '}': --depth; break;
        case ',':
            if (depth == 1) {
                expect_element = true;
            }
            break;
        default: break;
        }
    }
    return out;
}

const json& require_field(const json& obj, const char* name)
{
    auto it = obj.find(name);
    if (it == obj.end()) {
        throw std::invalid_argument(std::string("missing field '") + name + "'");
    }
    return *it;
}

std::string require_string(const json& obj, const char* name)
{
    const json& v = require_field(obj, name);
    if (!v.is_string()) {
        throw std::invalid_argument(std::string("field '") + name + "' must be a string");
    }
    return v.get<std::string>();
}

std::string require_text(const json& obj, const char* name)
{
    auto s = require_string(obj, name);
    if (trim(s).empty()) {
        throw std::invalid_argument(std::string("field '") + name + "' is empty");
    }
    return s;
}

Claim claim_from_json(const json& j)
{
    if (!j.is_object()) {
        throw std::invalid_argument("claim must be an object");
    }
    Claim c;
    c.id = require_text(j, "id");
    c.text = require_text(j, "text");
    auto verdict = parse_verdict(require_string(j, "verdict"));
    if (!verdict) {
        throw std::invalid_argument("verdict must be 'false' or 'unsubstantiated'");
    }
    c.verdict = *verdict;
    auto date = parse_date(require_string(j, "verified_date"));
    if (!date) {
        throw std::invalid_argument("verified_date must be YYYY-MM-DD");
    }
    c.verified_date = *date;
    if (auto it = j.find("source_url"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) {
            throw std::invalid_argument("source_url must be a string");
        }
        c.source_url = it->get<std::string>();
    }
    return c;
}

}  // namespace

ClaimSet parse_claims(std::string_view text, const std::string& origin)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin, line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
    }
    if (!doc.is_array()) {
        throw ParseError(origin, 1, "claims file must be a JSON array");
    }
    auto offsets = array_element_offsets(text);
    std::vector<Claim> claims;
    claims.reserve(doc.size());
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        std::size_t line = i < offsets.size() ? line_of(text, offsets[i]) : 0;
        try {
            claims.push_back(claim_from_json(doc[i]));
        } catch (const std::invalid_argument& e) {
            throw ParseError(origin, line, e.what());
        }
        if (!seen.emplace(claims.back().id, line).second) {
            throw DuplicateIdError(claims.back().id);
        }
    }
    return ClaimSet(std::move(claims));
}

ClaimSet load_claims(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingFileError(path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_claims(buf.str(), path.string());
}

TweetSet parse_tweets(std::istream& in, const std::optional<IngestFilter>& filter, const std::string& origin)
{
    std::vector<Tweet> kept;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(origin, lineno, e.what());
        }
        Tweet t;
        std::string kind;
        try {
            if (!j.is_object()) {
                throw std::invalid_argument("tweet record must be an object");
            }
            t.id = require_text(j, "id");
            t.text = require_text(j, "text");
            auto ts = parse_rfc3339(require_string(j, "created_at"));
            if (!ts) {
                throw std::invalid_argument("created_at must be RFC 3339");
            }
            t.created_at = *ts;
            t.lang = require_string(j, "lang");
            kind = require_string(j, "kind");
        } catch (const std::invalid_argument& e) {
            throw ParseError(origin, lineno, e.what());
        }
        if (!seen.emplace(t.id, lineno).second) {
            throw DuplicateIdError(t.id);
        }
        if (kind == "retweet") {
            continue;
        }
        auto parsed = parse_tweet_kind(kind);
        if (!parsed) {
            throw ParseError(origin, lineno, "unknown tweet kind '" + kind + "'");
        }
        t.kind = *parsed;
        if (filter && !filter->accepts(t)) {
            continue;
        }
        kept.push_back(std::move(t));
    }
    return TweetSet(std::move(kept));
}

namespace {

TweetSet load_tweets_impl(const std::filesystem::path& path, const std::optional<IngestFilter>& filter)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingFileError(path.string());
    }
    return parse_tweets(in, filter, path.string());
}

}  // namespace

TweetSet load_tweets(const std::filesystem::path& path)
{
    return load_tweets_impl(path, std::nullopt);
}

TweetSet load_tweets(const std::filesystem::path& path, const IngestFilter& filter)
{
    return load_tweets_impl(path, filter);
}

void write_claims(std::ostream& out, const ClaimSet& claims)
{
    out << "[\n";
    for (std::size_t i = 0; i < claims.size(); ++i) {
        const Claim& c = claims[i];
        json j = json::object();
        j["id"] = c.id;
        j["text"] = c.text;
        j["verdict"] = to_string(c.verdict);
        j["verified_date"] = format_date(c.verified_date);
        if (c.source_url) {
            j["source_url"] = *c.source_url;
        }
        out << "  " << j.dump() << (i + 1 < claims.size() ? ",\n" : "\n");
    }
    out << "]\n";
}

void write_tweets(std::ostream& out, const TweetSet& tweets)
{
    for (const Tweet& t : tweets) {
        json j = json::object();
        j["id"] = t.id;
        j["text"] = t.text;
        j["created_at"] = format_rfc3339(t.created_at);
        j["lang"] = t.lang;
        j["kind"] = to_string(t.kind);
        out << j.dump() << '\n';
    }
}

AnnotationStore::AnnotationStore(std::shared_ptr<const ClaimSet> claims, std::shared_ptr<const TweetSet> tweets,
                                 Clock clock)
    : claims_(std::move(claims)), tweets_(std::move(tweets)), clock_(std::move(clock))
{
    if (!claims_ || !tweets_) {
        throw InvalidArgument("annotation store needs claim and tweet sets");
    }
}

void AnnotationStore::check_ids(std::string_view tweet_id, std::string_view claim_id) const
{
    if (!tweets_->contains(tweet_id)) {
        throw UnknownIdError("unknown tweet id: " + std::string(tweet_id));
    }
    if (!claims_->contains(claim_id)) {
        throw UnknownIdError("unknown claim id: " + std::string(claim_id));
    }
}

bool AnnotationStore::add_candidate(std::string_view tweet_id, std::string_view claim_id)
{
    check_ids(tweet_id, claim_id);
    std::unique_lock lock(mutex_);
    Key key{std::string(tweet_id), std::string(claim_id)};
    if (pairs_.count(key) != 0) {
        return false;
    }
    pairs_.emplace(key, AnnotationPair{key.first, key.second, Label::unlabeled, {}, std::nullopt});
    return true;
}

RecordOutcome AnnotationStore::record_annotation(std::string_view tweet_id, std::string_view claim_id, Label label,
                                                 std::string_view annotator)
{
    check_ids(tweet_id, claim_id);
    if (!is_terminal(label)) {
        throw InvalidTransitionError("cannot set a pair back to unlabeled");
    }
    std::unique_lock lock(mutex_);
    Key key{std::string(tweet_id), std::string(claim_id)};
    auto it = pairs_.find(key);
    if (it == pairs_.end()) {
        pairs_.emplace(key, AnnotationPair{key.first, key.second, label, std::string(annotator), clock_()});
        return RecordOutcome::inserted;
    }
    AnnotationPair& p = it->second;
    if (p.label == label) {
        return RecordOutcome::unchanged;
    }
    p.label = label;
    p.annotator = std::string(annotator);
    p.labeled_at = clock_();
    return RecordOutcome::updated;
}

std::optional<AnnotationPair> AnnotationStore::find(std::string_view tweet_id, std::string_view claim_id) const
{
    std::shared_lock lock(mutex_);
    auto it = pairs_.find(Key{std::string(tweet_id), std::string(claim_id)});
    if (it == pairs_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t AnnotationStore::size() const
{
    std::shared_lock lock(mutex_);
    return pairs_.size();
}

std::vector<AnnotationPair> AnnotationStore::pairs() const
{
    std::shared_lock lock(mutex_);
    std::vector<AnnotationPair> out;
    out.reserve(pairs_.size());
    for (const auto& [key, p] : pairs_) {
        out.push_back(p);
    }
    return out;
}

std::map<std::string, std::set<std::string>> AnnotationStore::relevant_claims() const
{
    std::shared_lock lock(mutex_);
    std::map<std::string, std::set<std::string>> out;
    for (const auto& [key, p] : pairs_) {
        auto& claims = out[p.tweet_id];
        if (p.label == Label::relevant) {
            claims.insert(p.claim_id);
        }
    }
    return out;
}

std::string AnnotationStore::to_json_line(const AnnotationPair& p)
{
    json j = json::object();
    j["tweet_id"] = p.tweet_id;
    j["claim_id"] = p.claim_id;
    j["label"] = to_string(p.label);
    j["annotator"] = p.annotator;
    j["labeled_at"] = p.labeled_at ? json(format_rfc3339(*p.labeled_at)) : json(nullptr);
    return j.dump();
}

void AnnotationStore::export_jsonl(std::ostream& out) const
{
    for (const auto& p : pairs()) {
        out << to_json_line(p) << '\n';
    }
}

void AnnotationStore::import_jsonl(std::istream& in, const std::string& origin)
{
    std::vector<AnnotationPair> parsed;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        AnnotationPair p;
        try {
            json j = json::parse(line);
            if (!j.is_object()) {
                throw std::invalid_argument("annotation record must be an object");
            }
            p.tweet_id = require_text(j, "tweet_id");
            p.claim_id = require_text(j, "claim_id");
            auto label = parse_label(require_string(j, "label"));
            if (!label) {
                throw std::invalid_argument("unknown label");
            }
            p.label = *label;
            if (auto it = j.find("annotator"); it != j.end() && it->is_string()) {
                p.annotator = it->get<std::string>();
            }
            if (auto it = j.find("labeled_at"); it != j.end() && !it->is_null()) {
                auto ts = it->is_string() ? parse_rfc3339(it->get<std::string>()) : std::nullopt;
                if (!ts) {
                    throw std::invalid_argument("labeled_at must be RFC 3339 or null");
                }
                p.labeled_at = *ts;
            }
        } catch (const json::exception& e) {
            throw ParseError(origin, lineno, e.what());
        } catch (const std::invalid_argument& e) {
            throw ParseError(origin, lineno, e.what());
        }
        check_ids(p.tweet_id, p.claim_id);
        parsed.push_back(std::move(p));
    }
    std::unique_lock lock(mutex_);
    for (auto& p : parsed) {
        Key key{p.tweet_id, p.claim_id};
        pairs_.insert_or_assign(std::move(key), std::move(p));
    }
}

CorpusStats corpus_stats(const AnnotationStore& store)
{
    CorpusStats stats;
    std::map<std::string, std::size_t> relevant_per_tweet;
    for (const auto& p : store.pairs()) {
        auto& count = relevant_per_tweet[p.tweet_id];
        switch (p.label) {
        case Label::relevant:
            ++count;
            ++stats.pairs_relevant;
            break;
        case Label::not_relevant: ++stats.pairs_not_relevant; break;
        case Label::unlabeled: ++stats.pairs_unlabeled; break;
        }
    }
    for (const auto& [tweet, count] : relevant_per_tweet) {
        if (count > 0) {
            ++stats.tweets_with_claim;
            ++stats.claims_per_tweet[count];
        } else {
            ++stats.tweets_without_claim;
        }
    }
    return stats;
}

}  // namespace factmatch
