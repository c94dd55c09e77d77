#include "factmatch/retrieval.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "factmatch/binary_io.hpp"
#include "factmatch/error.hpp"
#include "factmatch/kernels.hpp"
#include "factmatch/log.hpp"
#include "factmatch/rng.hpp"

namespace factmatch::retrieval {

using nlohmann::json;

std::size_t RetrievalDataset::count(PairLabel l) const
{
    return static_cast<std::size_t>(
        std::count_if(pairs.begin(), pairs.end(), [l](const LabeledPair& p) { return p.label == l; }));
}

RetrievalDataset sample_negatives(std::span<const PositivePair> positives,
                                  std::span<const std::string> candidate_claims, const RelevanceMap& relevant,
                                  std::size_t n, std::uint64_t seed, NegativeMode mode)
{
    std::vector<std::string> pool_base(candidate_claims.begin(), candidate_claims.end());
    std::sort(pool_base.begin(), pool_base.end());
    pool_base.erase(std::unique(pool_base.begin(), pool_base.end()), pool_base.end());

    // Group positives by tweet, keeping first-appearance order.
    std::vector<std::string> tweet_order;
    std::map<std::string, std::vector<std::string>> by_tweet;
    for (const auto& p : positives) {
        auto [it, inserted] = by_tweet.try_emplace(p.tweet_id);
        if (inserted) {
            tweet_order.push_back(p.tweet_id);
        }
        if (std::find(it->second.begin(), it->second.end(), p.claim_id) != it->second.end()) {
            throw DuplicateIdError(p.tweet_id + "/" + p.claim_id);
        }
        it->second.push_back(p.claim_id);
    }

    auto rng = make_rng(seed);
    RetrievalDataset out;
    out.pairs.reserve(positives.size() * (n + 1));
    for (const auto& tweet : tweet_order) {
        const auto& claims = by_tweet[tweet];
        std::set<std::string_view> excluded(claims.begin(), claims.end());
        if (auto it = relevant.find(tweet); it != relevant.end()) {
            excluded.insert(it->second.begin(), it->second.end());
        }
        std::vector<std::string_view> pool;
        for (const auto& c : pool_base) {
            if (excluded.count(c) == 0) {
                pool.push_back(c);
            }
        }
        const std::size_t needed = mode == NegativeMode::per_positive ? claims.size() * n : n;
        if (pool.size() < needed) {
            throw InvalidArgument("sample_negatives: tweet " + tweet + " needs " + std::to_string(needed)
                                  + " unrelated claims, only " + std::to_string(pool.size()) + " available");
        }
        // Partial Fisher-Yates: the first `needed` slots become the sample.
        for (std::size_t i = 0; i < needed; ++i) {
            std::size_t j = i + uniform_index(rng, pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        for (const auto& c : claims) {
            out.pairs.push_back({tweet, c, PairLabel::positive});
        }
        for (std::size_t i = 0; i < needed; ++i) {
            out.pairs.push_back({tweet, std::string(pool[i]), PairLabel::negative});
        }
    }
    return out;
}

RankedClaims rank_claims(const RankerModel& ranker, std::string_view tweet_text, std::span<const ClaimRef> claims)
{
    if (claims.empty()) {
        throw InvalidArgument("rank_claims: no claims to rank");
    }
    auto scores = ranker.score(tweet_text, claims);
    if (scores.size() != claims.size()) {
        throw ProtocolError("ranker returned " + std::to_string(scores.size()) + " scores for "
                            + std::to_string(claims.size()) + " claims");
    }
    RankedClaims out;
    out.entries.reserve(claims.size());
    for (std::size_t i = 0; i < claims.size(); ++i) {
        double s = scores[i];
        if (!std::isfinite(s)) {
            throw ProtocolError("ranker returned a non-finite score for claim " + std::string(claims[i].id));
        }
        if (s < 0.0 || s > 1.0) {
            ++out.clamped;
            s = std::clamp(s, 0.0, 1.0);
        }
        out.entries.push_back({std::string(claims[i].id), s});
    }
    if (out.clamped > 0) {
        log_warning("ranker " + ranker.describe() + ": clamped " + std::to_string(out.clamped)
                    + " score(s) into [0,1]");
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const ScoredClaim& a, const ScoredClaim& b) {
        return a.score != b.score ? a.score > b.score : a.claim_id < b.claim_id;
    });
    for (std::size_t i = 1; i < out.entries.size(); ++i) {
        if (out.entries[i].claim_id == out.entries[i - 1].claim_id) {
            throw DuplicateIdError(out.entries[i].claim_id);
        }
    }
    return out;
}

namespace {

std::vector<ClaimRef> refs_of(const ClaimSet& claims)
{
    std::vector<ClaimRef> refs;
    refs.reserve(claims.size());
    for (const auto& c : claims) {
        refs.push_back({c.id, c.text});
    }
    return refs;
}

template <typename PerTweet>
double average_over_tweets(const Rankings& rankings, const RelevanceMap& truth, std::size_t k, PerTweet per_tweet)
{
    if (k == 0) {
        throw InvalidArgument("k must be >= 1");
    }
    if (rankings.empty()) {
        throw InvalidArgument("no rankings to evaluate");
    }
    double total = 0.0;
    for (const auto& [tweet, ranked] : rankings) {
        auto it = truth.find(tweet);
        if (it == truth.end() || it->second.empty()) {
            throw InvalidArgument("no relevant claims recorded for tweet " + tweet);
        }
        std::size_t hits = 0;
        const std::size_t depth = std::min(k, ranked.entries.size());
        for (std::size_t i = 0; i < depth; ++i) {
            hits += it->second.count(ranked.entries[i].claim_id);
        }
        total += per_tweet(hits, it->second.size());
    }
    return total / static_cast<double>(rankings.size());
}

}  // namespace

RankedClaims rank_claims(const RankerModel& ranker, std::string_view tweet_text, const ClaimSet& claims)
{
    auto refs = refs_of(claims);
    return rank_claims(ranker, tweet_text, refs);
}

double hit_ratio_at_k(const Rankings& rankings, const RelevanceMap& truth, std::size_t k)
{
    return average_over_tweets(rankings, truth, k,
                               [](std::size_t hits, std::size_t) { return hits > 0 ? 1.0 : 0.0; });
}

double recall_at_k(const Rankings& rankings, const RelevanceMap& truth, std::size_t k)
{
    return average_over_tweets(rankings, truth, k, [](std::size_t hits, std::size_t relevant) {
        return static_cast<double>(hits) / static_cast<double>(relevant);
    });
}

json PipelineRecord::to_json() const
{
    json results_json = json::array();
    for (const auto& r : results) {
        json e = json::object();
        e["claim_id"] = r.claim_id;
        e["score"] = r.score;
        e["rank"] = r.rank;
        results_json.push_back(std::move(e));
    }
    json j = json::object();
    j["tweet_id"] = tweet_id;
    j["gate"] = detection::to_string(gate);
    j["gate_probability"] = gate_probability;
    j["results"] = std::move(results_json);
    return j;
}

PipelineRecord PipelineRecord::from_json(const json& j)
{
    PipelineRecord r;
    r.tweet_id = j.at("tweet_id").get<std::string>();
    auto gate = j.at("gate").get<std::string>();
    if (gate != "claim" && gate != "no_claim") {
        throw InvalidArgument("pipeline record: gate must be claim or no_claim");
    }
    r.gate = gate == "claim" ? detection::ClassLabel::claim : detection::ClassLabel::no_claim;
    r.gate_probability = j.at("gate_probability").get<double>();
    for (const auto& e : j.at("results")) {
        r.results.push_back({e.at("claim_id").get<std::string>(), e.at("score").get<double>(),
                             e.at("rank").get<std::size_t>()});
    }
    return r;
}

PipelineRecord run_pipeline(const detection::DetectorModel& detector, const RankerModel& ranker,
                            std::string_view tweet_id, std::string_view tweet_text, const ClaimSet& claims,
                            std::size_t top_n, double threshold)
{
    PipelineRecord record;
    record.tweet_id = std::string(tweet_id);
    detection::Detection gate;
    try {
        gate = detection::detect(detector, tweet_text, threshold);
    } catch (const std::exception& e) {
        throw StageError("detect", 0, e.what());
    }
    record.gate = gate.label;
    record.gate_probability = gate.probability;
    if (gate.label == detection::ClassLabel::no_claim) {
        return record;
    }
    RankedClaims ranked;
    try {
        ranked = rank_claims(ranker, tweet_text, claims);
    } catch (const std::exception& e) {
        throw StageError("retrieve", 1, e.what());
    }
    const std::size_t keep = std::min(top_n, ranked.entries.size());
    for (std::size_t i = 0; i < keep; ++i) {
        record.results.push_back({ranked.entries[i].claim_id, ranked.entries[i].score, i + 1});
    }
    return record;
}

// --- rankers ---------------------------------------------------------------------

namespace {

constexpr std::string_view kTfIdfCosineMagic{"FMTFCOS\0", 8};
constexpr std::string_view kEncoderCosineMagic{"FMENCCOS", 8};
constexpr std::string_view kExactMagic{"FMEXACT\0", 8};
constexpr std::string_view kBm25IndexMagic{"FMBM25\0\0", 8};

void write_claim_list(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& claims)
{
    binary::write_u64(out, claims.size());
    for (const auto& [id, text] : claims) {
        binary::write_string(out, id);
        binary::write_string(out, text);
    }
}

std::vector<std::pair<std::string, std::string>> read_claim_list(std::istream& in)
{
    auto n = binary::read_u64(in);
    std::vector<std::pair<std::string, std::string>> claims;
    for (std::uint64_t i = 0; i < n; ++i) {
        auto id = binary::read_string(in);
        auto text = binary::read_string(in);
        claims.emplace_back(std::move(id), std::move(text));
    }
    return claims;
}

std::vector<std::pair<std::string, std::string>> claim_list(const ClaimSet& claims)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& c : claims) {
        out.emplace_back(c.id, c.text);
    }
    return out;
}

std::string fold_case_trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r\n");
    std::string out(s.substr(b, e - b + 1));
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

}  // namespace

Bm25RankerModel::Bm25RankerModel(text::Bm25Index index) : index_(std::move(index))
{
    for (std::size_t i = 0; i < index_.doc_ids().size(); ++i) {
        position_.emplace(index_.doc_ids()[i], i);
    }
}

std::vector<double> Bm25RankerModel::score(std::string_view tweet_text, std::span<const ClaimRef> claims) const
{
    auto query = text::tokenize(tweet_text, index_.options());
    auto raw = index_.score_all(query);
    std::vector<double> out;
    out.reserve(claims.size());
    for (const auto& c : claims) {
        auto it = position_.find(c.id);
        const double s = it == position_.end() ? 0.0 : raw[it->second];
        out.push_back(s / (1.0 + s));
    }
    return out;
}

void Bm25RankerModel::save(std::ostream& out) const
{
    index_.save(out);
}

std::unique_ptr<RankerModel> Bm25RankerPort::fit(const RetrievalDataset&, const FitContext& ctx) const
{
    std::vector<std::pair<std::string, text::TokenStream>> docs;
    for (const auto& c : ctx.claims) {
        docs.emplace_back(c.id, text::tokenize(c.text, options_));
    }
    return std::make_unique<Bm25RankerModel>(text::Bm25Index::build(docs, params_, options_));
}

TfIdfCosineRankerModel::TfIdfCosineRankerModel(text::TfIdfModel model,
                                               std::vector<std::pair<std::string, std::string>> claims)
    : model_(std::move(model)), claims_(std::move(claims))
{
    for (std::size_t i = 0; i < claims_.size(); ++i) {
        position_.emplace(claims_[i].first, i);
        claim_vectors_.push_back(model_.vectorize(std::string_view(claims_[i].second)));
    }
}

std::vector<double> TfIdfCosineRankerModel::score(std::string_view tweet_text, std::span<const ClaimRef> claims) const
{
    auto query = model_.vectorize(tweet_text);
    std::vector<text::SparseVector> docs;
    docs.reserve(claims.size());
    for (const auto& c : claims) {
        auto it = position_.find(c.id);
        docs.push_back(it != position_.end() && claims_[it->second].second == c.text
                           ? claim_vectors_[it->second]
                           : model_.vectorize(c.text));
    }
    // Non-negative weights keep cosine in [0, 1].
    return kernels::sparse_cosine_batch(query, docs);
}

void TfIdfCosineRankerModel::save(std::ostream& out) const
{
    binary::write_header(out, kTfIdfCosineMagic, 1);
    model_.save(out);
    write_claim_list(out, claims_);
}

std::unique_ptr<RankerModel> TfIdfCosineRankerPort::fit(const RetrievalDataset&, const FitContext& ctx) const
{
    std::vector<text::TokenStream> docs;
    for (const auto& c : ctx.claims) {
        docs.push_back(text::tokenize(c.text, options_));
    }
    return std::make_unique<TfIdfCosineRankerModel>(text::TfIdfModel::fit(docs, options_), claim_list(ctx.claims));
}

EncoderCosineRankerModel::EncoderCosineRankerModel(std::shared_ptr<const candidates::EncoderPort> encoder,
                                                   std::vector<std::pair<std::string, std::string>> claims)
    : encoder_(std::move(encoder)), claims_(std::move(claims))
{
    if (!encoder_) {
        throw InvalidArgument("encoder-cosine: null encoder");
    }
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < claims_.size(); ++i) {
        position_.emplace(claims_[i].first, i);
        texts.push_back(claims_[i].second);
    }
    claim_vectors_ = candidates::encode_all(*encoder_, texts);
}

std::vector<double> EncoderCosineRankerModel::score(std::string_view tweet_text,
                                                    std::span<const ClaimRef> claims) const
{
    std::string t(tweet_text);
    auto tweet_vec = candidates::encode_all(*encoder_, std::span<const std::string>(&t, 1));
    std::vector<std::string> missing_texts;
    std::vector<std::size_t> missing_slots;
    std::vector<double> out(claims.size(), 0.0);
    for (std::size_t i = 0; i < claims.size(); ++i) {
        auto it = position_.find(claims[i].id);
        if (it != position_.end() && claims_[it->second].second == claims[i].text) {
            out[i] = (1.0 + kernels::dense_cosine(tweet_vec.row(0), claim_vectors_.row(it->second))) / 2.0;
        } else {
            missing_texts.emplace_back(claims[i].text);
            missing_slots.push_back(i);
        }
    }
    if (!missing_texts.empty()) {
        auto extra = candidates::encode_all(*encoder_, missing_texts);
        for (std::size_t m = 0; m < missing_slots.size(); ++m) {
            out[missing_slots[m]] = (1.0 + kernels::dense_cosine(tweet_vec.row(0), extra.row(m))) / 2.0;
        }
    }
    return out;
}

void EncoderCosineRankerModel::save(std::ostream& out) const
{
    binary::write_header(out, kEncoderCosineMagic, 1);
    binary::write_string(out, encoder_->name());
    write_claim_list(out, claims_);
}

EncoderCosineRankerPort::EncoderCosineRankerPort(std::shared_ptr<const candidates::EncoderPort> encoder)
    : encoder_(std::move(encoder))
{
    if (!encoder_) {
        throw InvalidArgument("encoder-cosine: null encoder");
    }
}

std::unique_ptr<RankerModel> EncoderCosineRankerPort::fit(const RetrievalDataset&, const FitContext& ctx) const
{
    return std::make_unique<EncoderCosineRankerModel>(encoder_, claim_list(ctx.claims));
}

std::vector<double> ExactMatchRanker::score(std::string_view tweet_text, std::span<const ClaimRef> claims) const
{
    const auto t = fold_case_trim(tweet_text);
    std::vector<double> out;
    out.reserve(claims.size());
    for (const auto& c : claims) {
        out.push_back(fold_case_trim(c.text) == t ? 1.0 : 0.0);
    }
    return out;
}

void ExactMatchRanker::save(std::ostream& out) const
{
    binary::write_header(out, kExactMagic, 1);
}

std::unique_ptr<RankerModel> ExactMatchRanker::fit(const RetrievalDataset&, const FitContext&) const
{
    return std::make_unique<ExactMatchRanker>();
}

GatewayRankerModel::GatewayRankerModel(std::shared_ptr<const gateway::Client> client, gateway::RemoteModelRef ref)
    : client_(std::move(client)), ref_(std::move(ref))
{
    if (!client_) {
        throw InvalidArgument("gateway ranker: null client");
    }
}

std::vector<double> GatewayRankerModel::score(std::string_view tweet_text, std::span<const ClaimRef> claims) const
{
    std::vector<gateway::TextPair> pairs;
    pairs.reserve(claims.size());
    for (const auto& c : claims) {
        pairs.push_back({std::string(tweet_text), std::string(c.text)});
    }
    return client_->score_pairs(ref_, pairs);
}

void GatewayRankerModel::save(std::ostream& out) const
{
    gateway::save_remote_ref(out, ref_);
}

GatewayRankerPort::GatewayRankerPort(std::shared_ptr<const gateway::Client> client, json hyperparams)
    : client_(std::move(client)), hyperparams_(std::move(hyperparams))
{
    if (!client_) {
        throw InvalidArgument("gateway ranker: null client");
    }
}

std::unique_ptr<RankerModel> GatewayRankerPort::fit(const RetrievalDataset& train, const FitContext& ctx) const
{
    json dataset = json::array();
    for (const auto& p : train.pairs) {
        dataset.push_back({{"left", ctx.tweets.at(p.tweet_id).text},
                           {"right", ctx.claims.at(p.claim_id).text},
                           {"label", p.label == PairLabel::positive ? 1 : 0}});
    }
    auto ref = client_->train(gateway::Task::score_pairs, dataset, hyperparams_);
    return std::make_unique<GatewayRankerModel>(client_, std::move(ref));
}

std::unique_ptr<RankerModel> load_ranker(std::istream& in, std::shared_ptr<const gateway::Client> client,
                                         std::shared_ptr<const candidates::EncoderPort> encoder)
{
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != 8) {
        throw FormatVersionError("ranker file truncated");
    }
    in.seekg(-8, std::ios::cur);
    std::string_view m(magic.data(), magic.size());
    if (m == kBm25IndexMagic) {
        return std::make_unique<Bm25RankerModel>(text::Bm25Index::load(in));
    }
    if (m == kTfIdfCosineMagic) {
        binary::expect_header(in, kTfIdfCosineMagic, 1);
        auto model = text::TfIdfModel::load(in);
        return std::make_unique<TfIdfCosineRankerModel>(std::move(model), read_claim_list(in));
    }
    if (m == kEncoderCosineMagic) {
        binary::expect_header(in, kEncoderCosineMagic, 1);
        auto name = binary::read_string(in, 4096);
        if (!encoder) {
            throw InvalidArgument("encoder-cosine ranker needs an encoder (" + name + ")");
        }
        return std::make_unique<EncoderCosineRankerModel>(std::move(encoder), read_claim_list(in));
    }
    if (m == kExactMagic) {
        binary::expect_header(in, kExactMagic, 1);
        return std::make_unique<ExactMatchRanker>();
    }
    if (m == gateway::kRemoteMagic) {
        auto ref = gateway::load_remote_ref(in);
        if (ref.task != gateway::Task::score_pairs) {
            throw FormatVersionError("remote model is not a pair scorer");
        }
        if (!client) {
            throw InvalidArgument("remote ranker needs a gateway endpoint");
        }
        return std::make_unique<GatewayRankerModel>(std::move(client), std::move(ref));
    }
    throw FormatVersionError("unrecognized ranker file");
}

}  // namespace factmatch::retrieval
