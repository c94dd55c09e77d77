#include "factmatch/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "factmatch/error.hpp"

namespace factmatch::candidates {

namespace {

std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

HashEncoder::HashEncoder(std::size_t dim, text::TokenizerOptions options) : dim_(dim), options_(options)
{
    if (dim_ == 0) {
        throw InvalidArgument("hash encoder: dim must be >= 1");
    }
}

std::vector<double> HashEncoder::encode_one(std::string_view text) const
{
    std::vector<double> v(dim_, 0.0);
    for (const auto& token : text::tokenize(text, options_)) {
        const auto h = fnv1a(token);
        const double sign = ((h >> 63U) & 1U) != 0 ? -1.0 : 1.0;
        v[h % dim_] += sign;
    }
    double n = 0.0;
    for (double x : v) {
        n += x * x;
    }
    if (n > 0.0) {
        n = std::sqrt(n);
        for (double& x : v) {
            x /= n;
        }
    }
    return v;
}

std::vector<std::vector<double>> HashEncoder::encode(std::span<const std::string> texts) const
{
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(encode_one(t));
    }
    return out;
}

GatewayEncoder::GatewayEncoder(std::shared_ptr<const gateway::Client> client) : client_(std::move(client))
{
    if (!client_) {
        throw InvalidArgument("gateway encoder: null client");
    }
}

std::vector<std::vector<double>> GatewayEncoder::encode(std::span<const std::string> texts) const
{
    return client_->embed(texts);
}

DenseMatrix encode_all(const EncoderPort& encoder, std::span<const std::string> texts, std::size_t batch_size)
{
    if (batch_size == 0) {
        throw InvalidArgument("encode_all: batch_size must be >= 1");
    }
    DenseMatrix m;
    m.rows = texts.size();
    std::size_t batch = 0;
    for (std::size_t begin = 0; begin < texts.size(); begin += batch_size, ++batch) {
        const std::size_t end = std::min(texts.size(), begin + batch_size);
        std::vector<std::vector<double>> rows;
        try {
            rows = encoder.encode(texts.subspan(begin, end - begin));
        } catch (const std::exception& e) {
            throw StageError("encode", batch, e.what());
        }
        if (rows.size() != end - begin) {
            throw StageError("encode", batch, "encoder returned wrong number of vectors");
        }
        for (auto& r : rows) {
            if (m.cols == 0 && m.data.empty()) {
                if (r.empty()) {
                    throw StageError("encode", batch, "encoder returned an empty vector");
                }
                m.cols = r.size();
                m.data.reserve(m.rows * m.cols);
            }
            if (r.size() != m.cols) {
                throw StageError("encode", batch, "non-uniform embedding dimension");
            }
            m.data.insert(m.data.end(), r.begin(), r.end());
        }
    }
    return m;
}

std::vector<ScoredTweet> top_k_tweets(std::span<const double> claim_vec, const DenseMatrix& tweet_vecs,
                                      std::span<const std::string> tweet_ids, std::size_t k)
{
    if (k == 0) {
        throw InvalidArgument("top_k_tweets: k must be >= 1");
    }
    if (tweet_ids.size() != tweet_vecs.rows) {
        throw InvalidArgument("top_k_tweets: id count does not match rows");
    }
    if (tweet_vecs.rows > 0 && claim_vec.size() != tweet_vecs.cols) {
        throw InvalidArgument("dimension mismatch: claim " + std::to_string(claim_vec.size()) + " vs tweets "
                              + std::to_string(tweet_vecs.cols));
    }
    DenseMatrix claim(1, claim_vec.size());
    std::copy(claim_vec.begin(), claim_vec.end(), claim.data.begin());
    DenseMatrix sims = tweet_vecs.rows == 0 ? DenseMatrix(1, 0) : kernels::cosine_matrix(claim, tweet_vecs);
    std::vector<ScoredTweet> out;
    for (const auto& r : kernels::top_k(sims.row(0), tweet_ids, k)) {
        out.push_back({tweet_ids[r.index], r.score});
    }
    return out;
}

PairPool::PairPool(std::vector<PoolEntry> entries) : entries_(std::move(entries))
{
    std::set<std::pair<std::string_view, std::string_view>> seen;
    for (const auto& e : entries_) {
        if (!seen.emplace(e.claim_id, e.tweet_id).second) {
            throw DuplicateIdError(e.claim_id + "/" + e.tweet_id);
        }
        if (!std::isfinite(e.similarity) || e.rank < 1) {
            throw InvalidArgument("pair pool: invalid entry for " + e.claim_id + "/" + e.tweet_id);
        }
    }
}

std::size_t PairPool::distinct_tweets() const
{
    std::set<std::string_view> s;
    for (const auto& e : entries_) {
        s.insert(e.tweet_id);
    }
    return s.size();
}

std::size_t PairPool::distinct_claims() const
{
    std::set<std::string_view> s;
    for (const auto& e : entries_) {
        s.insert(e.claim_id);
    }
    return s.size();
}

void PairPool::export_jsonl(std::ostream& out) const
{
    for (const auto& e : entries_) {
        nlohmann::json j = nlohmann::json::object();
        j["claim_id"] = e.claim_id;
        j["tweet_id"] = e.tweet_id;
        j["rank"] = e.rank;
        j["similarity"] = e.similarity;
        out << j.dump() << '\n';
    }
}

PairPool PairPool::import_jsonl(std::istream& in, const std::string& origin)
{
    std::vector<PoolEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            auto j = nlohmann::json::parse(line);
            PoolEntry e;
            e.claim_id = j.at("claim_id").get<std::string>();
            e.tweet_id = j.at("tweet_id").get<std::string>();
            e.rank = j.at("rank").get<std::size_t>();
            e.similarity = j.at("similarity").get<double>();
            entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(origin, lineno, e.what());
        }
    }
    return PairPool(std::move(entries));
}

PairPool build_pair_pool(const ClaimSet& claims, const TweetSet& tweets, const EncoderPort& encoder, std::size_t k)
{
    if (claims.empty() || tweets.empty()) {
        throw InvalidArgument("build_pair_pool: claim and tweet sets must be non-empty");
    }
    if (k == 0) {
        throw InvalidArgument("build_pair_pool: k must be >= 1");
    }
    // Claims are processed in id order so the pool layout does not depend on file order.
    std::vector<const Claim*> ordered;
    for (const auto& c : claims) {
        ordered.push_back(&c);
    }
    std::sort(ordered.begin(), ordered.end(), [](const Claim* a, const Claim* b) { return a->id < b->id; });

    std::vector<std::string> claim_texts;
    for (const auto* c : ordered) {
        claim_texts.push_back(c->text);
    }
    std::vector<std::string> tweet_texts;
    std::vector<std::string> tweet_ids;
    for (const auto& t : tweets) {
        tweet_texts.push_back(t.text);
        tweet_ids.push_back(t.id);
    }
    auto claim_vecs = encode_all(encoder, claim_texts);
    auto tweet_vecs = encode_all(encoder, tweet_texts);
    auto sims = kernels::cosine_matrix(claim_vecs, tweet_vecs);
    auto ranked = kernels::top_k_rows(sims, tweet_ids, k);

    std::vector<PoolEntry> entries;
    for (std::size_t c = 0; c < ordered.size(); ++c) {
        for (std::size_t r = 0; r < ranked[c].size(); ++r) {
            entries.push_back({ordered[c]->id, tweet_ids[ranked[c][r].index], r + 1, ranked[c][r].score});
        }
    }
    return PairPool(std::move(entries));
}

}  // namespace factmatch::candidates
