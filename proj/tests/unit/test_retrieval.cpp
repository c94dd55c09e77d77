#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "factmatch/error.hpp"
#include "factmatch/log.hpp"
#include "factmatch/retrieval.hpp"
#include "fixtures.hpp"
#include "mock_gateway.hpp"
#include "oracles.hpp"

using namespace factmatch;
using namespace factmatch::retrieval;
using namespace factmatch::testing;

namespace {

std::vector<std::string> claim_ids(std::size_t n)
{
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(claim_id(i));
    }
    return ids;
}

class TableRanker final : public RankerModel {
  public:
    explicit TableRanker(std::map<std::string, double> scores) : scores_(std::move(scores)) {}
    std::vector<double> score(std::string_view, std::span<const ClaimRef> claims) const override
    {
        ++calls;
        std::vector<double> out;
        for (const auto& c : claims) {
            out.push_back(scores_.at(std::string(c.id)));
        }
        return out;
    }
    void save(std::ostream&) const override {}
    std::string describe() const override { return "table"; }
    mutable std::atomic<int> calls{0};

  private:
    std::map<std::string, double> scores_;
};

class CountingRanker final : public RankerModel {
  public:
    std::vector<double> score(std::string_view, std::span<const ClaimRef> claims) const override
    {
        ++calls;
        return std::vector<double>(claims.size(), 0.5);
    }
    void save(std::ostream&) const override {}
    std::string describe() const override { return "counting"; }
    mutable std::atomic<int> calls{0};
};

class ThrowingRanker final : public RankerModel {
  public:
    std::vector<double> score(std::string_view, std::span<const ClaimRef>) const override
    {
        throw std::runtime_error("ranker exploded");
    }
    void save(std::ostream&) const override {}
    std::string describe() const override { return "throwing"; }
};

class ConstantDetector final : public detection::DetectorModel {
  public:
    explicit ConstantDetector(double p) : p_(p) {}
    std::vector<double> predict(std::span<const std::string> texts) const override
    {
        if (p_ < 0.0) {
            throw std::runtime_error("detector exploded");
        }
        return std::vector<double>(texts.size(), p_);
    }
    void save(std::ostream&) const override {}
    std::string describe() const override { return "constant"; }

  private:
    double p_;
};

RankedClaims ranked(std::vector<std::string> ids)
{
    RankedClaims r;
    double s = 1.0;
    for (auto& id : ids) {
        r.entries.push_back({std::move(id), s});
        s -= 0.01;
    }
    return r;
}

ClaimSet numbered_claims(std::size_t n)
{
    std::vector<Claim> claims;
    for (std::size_t i = 0; i < n; ++i) {
        claims.push_back(make_claim(claim_id(i), "claim text number " + std::to_string(i)));
    }
    return ClaimSet(std::move(claims));
}

}  // namespace

TEST_CASE("3,637 positives with 10 negatives each give 40,007 pairs")
{
    auto store = full_scale_store();
    std::vector<PositivePair> positives;
    for (const auto& p : store->pairs()) {
        if (p.label == Label::relevant) {
            positives.push_back({p.tweet_id, p.claim_id});
        }
    }
    REQUIRE(positives.size() == 3637);
    auto ds = sample_negatives(positives, claim_ids(83), store->relevant_claims(), 10, 42);
    CHECK(ds.size() == 40007);
    CHECK(ds.count(PairLabel::positive) == 3637);
    CHECK(ds.count(PairLabel::negative) == 36370);
}

TEST_CASE("negatives are distinct and unrelated")
{
    const std::vector<PositivePair> pos{{"t1", "c000"}};
    const RelevanceMap rel{{"t1", {"c000"}}};
    auto ds = sample_negatives(pos, claim_ids(5), rel, 4, 1);
    REQUIRE(ds.size() == 5);
    std::set<std::string> negs;
    for (const auto& p : ds.pairs) {
        if (p.label == PairLabel::negative) {
            negs.insert(p.claim_id);
        }
    }
    CHECK(negs == std::set<std::string>{"c001", "c002", "c003", "c004"});
    CHECK(sample_negatives(pos, claim_ids(5), rel, 4, 1).pairs == ds.pairs);
}

TEST_CASE("too few unrelated claims names the tweet")
{
    const std::vector<PositivePair> pos{{"t9", "c000"}};
    const RelevanceMap rel{{"t9", {"c000", "c001"}}};
    try {
        sample_negatives(pos, claim_ids(5), rel, 4, 1);
        FAIL("expected InvalidArgument");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("t9") != std::string::npos);
    }
}

TEST_CASE("per-tweet negative mode")
{
    const std::vector<PositivePair> pos{{"t1", "c000"}, {"t1", "c001"}, {"t2", "c002"}};
    const RelevanceMap rel{{"t1", {"c000", "c001"}}, {"t2", {"c002"}}};
    auto per_pos = sample_negatives(pos, claim_ids(20), rel, 3, 5);
    auto per_tweet = sample_negatives(pos, claim_ids(20), rel, 3, 5, NegativeMode::per_tweet);
    CHECK(per_pos.count(PairLabel::negative) == 9);
    CHECK(per_tweet.count(PairLabel::negative) == 6);
}

TEST_CASE("negatives never collide with positives on random stores")
{
    auto rng = make_rng(51);
    std::size_t checked = 0;
    for (int round = 0; round < 60; ++round) {
        auto store = random_store(rng);
        auto rel = store->relevant_claims();
        std::vector<PositivePair> positives;
        for (const auto& p : store->pairs()) {
            if (p.label == Label::relevant) {
                positives.push_back({p.tweet_id, p.claim_id});
            }
        }
        std::vector<std::string> cids;
        for (const auto& c : store->claims()) {
            cids.push_back(c.id);
        }
        // each tweet draws (its positives) x n distinct unrelated claims
        std::map<std::string, std::size_t> per_tweet_pos;
        for (const auto& p : positives) {
            ++per_tweet_pos[p.tweet_id];
        }
        std::size_t n = cids.size();
        for (const auto& [t, m] : per_tweet_pos) {
            n = std::min(n, (cids.size() - rel[t].size()) / m);
        }
        if (n == 0) {
            continue;
        }
        auto ds = sample_negatives(positives, cids, rel, n, rng());
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& p : ds.pairs) {
            CHECK(seen.emplace(p.tweet_id, p.claim_id).second);
            if (p.label == PairLabel::negative) {
                CHECK(rel[p.tweet_id].count(p.claim_id) == 0);
            }
        }
        ++checked;
    }
    CHECK(checked > 30);
}

TEST_CASE("ranking examples")
{
    auto claims = numbered_claims(6);
    SUBCASE("exact match puts the identical claim first")
    {
        ExactMatchRanker ex;
        auto r = rank_claims(ex, "  CLAIM text number 4 ", claims);
        CHECK(r.entries[0].claim_id == "c004");
        CHECK(r.entries[0].score == 1.0);
    }
    SUBCASE("constant scores fall back to ascending id")
    {
        std::map<std::string, double> s;
        for (const auto& c : claims) {
            s[c.id] = 0.3;
        }
        auto r = rank_claims(TableRanker(s), "x", claims);
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(r.entries[i].claim_id == claim_id(i));
        }
    }
    SUBCASE("random scores match an exhaustive sort")
    {
        auto rng = make_rng(52);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int round = 0; round < 50; ++round) {
            std::map<std::string, double> s;
            std::vector<std::pair<double, std::string>> expected;
            for (const auto& c : claims) {
                s[c.id] = std::round(u(rng) * 4.0) / 4.0;
                expected.emplace_back(-s[c.id], c.id);
            }
            std::sort(expected.begin(), expected.end());
            auto r = rank_claims(TableRanker(s), "x", claims);
            REQUIRE(r.entries.size() == 6);
            for (std::size_t i = 0; i < 6; ++i) {
                CHECK(r.entries[i].claim_id == expected[i].second);
            }
        }
    }
}

TEST_CASE("out-of-range scores are clamped with a warning, non-finite rejected")
{
    auto claims = numbered_claims(3);
    std::vector<std::string> warnings;
    auto previous = set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
    auto r = rank_claims(TableRanker({{"c000", 1.3}, {"c001", -0.2}, {"c002", 0.4}}), "x", claims);
    set_warning_sink(previous);
    CHECK(r.clamped == 2);
    CHECK_FALSE(warnings.empty());
    CHECK(r.entries[0] == ScoredClaim{"c000", 1.0});
    CHECK(r.entries[2] == ScoredClaim{"c001", 0.0});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(rank_claims(TableRanker({{"c000", nan}, {"c001", 0.1}, {"c002", 0.4}}), "x", claims), ProtocolError);
}

TEST_CASE("hit ratio examples")
{
    const RelevanceMap truth{{"t1", {"c2"}}, {"t2", {"c4"}}};
    Rankings r;
    r["t1"] = ranked({"c1", "c2", "c3", "c4", "c5"});
    r["t2"] = ranked({"c1", "c2", "c3", "c4", "c5"});
    CHECK(hit_ratio_at_k(r, truth, 3) == 0.5);
    CHECK(hit_ratio_at_k(r, truth, 5) == 1.0);
    CHECK(hit_ratio_at_k(r, truth, 1) == 0.0);

    Rankings top;
    top["t1"] = ranked({"c2", "c1"});
    top["t2"] = ranked({"c4", "c1"});
    for (std::size_t k = 1; k <= 2; ++k) {
        CHECK(hit_ratio_at_k(top, truth, k) == 1.0);
    }
}

TEST_CASE("hit ratio errors")
{
    Rankings r;
    r["t1"] = ranked({"c1"});
    CHECK_THROWS_AS(hit_ratio_at_k(r, {{"t1", {"c1"}}}, 0), InvalidArgument);
    CHECK_THROWS_AS(hit_ratio_at_k(r, {{"t2", {"c1"}}}, 1), InvalidArgument);
    CHECK_THROWS_AS(hit_ratio_at_k(r, {{"t1", {}}}, 1), InvalidArgument);
    CHECK_THROWS_AS(hit_ratio_at_k(Rankings{}, {}, 1), InvalidArgument);
}

TEST_CASE("single relevant claim: hit ratio equals recall")
{
    auto rng = make_rng(53);
    const auto ids = claim_ids(20);
    Rankings r;
    RelevanceMap truth;
    for (int t = 0; t < 100; ++t) {
        auto order = ids;
        shuffle_in_place(std::span(order), rng);
        const std::string tid = tweet_id(static_cast<std::size_t>(t));
        r[tid] = ranked(order);
        truth[tid] = {ids[uniform_index(rng, ids.size())]};
    }
    for (std::size_t k : {1, 3, 5, 10, 20}) {
        CHECK(hit_ratio_at_k(r, truth, k) == recall_at_k(r, truth, k));
    }
}

TEST_CASE("hit ratio is monotone in k and matches a recount")
{
    auto rng = make_rng(54);
    const auto ids = claim_ids(15);
    for (int round = 0; round < 20; ++round) {
        Rankings r;
        RelevanceMap truth;
        std::map<std::string, std::vector<std::string>> plain;
        for (int t = 0; t < 30; ++t) {
            auto order = ids;
            shuffle_in_place(std::span(order), rng);
            const std::string tid = tweet_id(static_cast<std::size_t>(t));
            r[tid] = ranked(order);
            plain[tid] = order;
            const std::size_t nrel = 1 + uniform_index(rng, 3);
            for (std::size_t i = 0; i < nrel; ++i) {
                truth[tid].insert(ids[uniform_index(rng, ids.size())]);
            }
        }
        double previous = 0.0;
        for (std::size_t k = 1; k <= ids.size(); ++k) {
            const double hr = hit_ratio_at_k(r, truth, k);
            CHECK(hr >= previous);
            CHECK(hr == testing::oracle::hit_ratio(plain, truth, k));
            previous = hr;
        }
        CHECK(previous == 1.0);
    }
}

TEST_CASE("pipeline gates out before retrieval")
{
    auto claims = numbered_claims(5);
    CountingRanker ranker;
    auto rec = run_pipeline(ConstantDetector(0.1), ranker, "t1", "anything", claims);
    CHECK(rec.gate == detection::ClassLabel::no_claim);
    CHECK(rec.results.empty());
    CHECK(ranker.calls == 0);
}

TEST_CASE("pipeline retrieves the matching claim at rank 1")
{
    auto claims = numbered_claims(83);
    ExactMatchRanker ex;
    auto rec = run_pipeline(ConstantDetector(0.9), ex, "t1", "claim text number 17", claims);
    CHECK(rec.gate == detection::ClassLabel::claim);
    CHECK(rec.gate_probability == 0.9);
    REQUIRE(rec.results.size() == 3);
    CHECK(rec.results[0].claim_id == "c017");
    CHECK(rec.results[0].rank == 1);
    CHECK(rec.results[2].rank == 3);

    auto round = PipelineRecord::from_json(rec.to_json());
    CHECK(round.tweet_id == "t1");
    CHECK(round.results.size() == 3);
    CHECK(rec.to_json()["gate"] == "claim");
}

TEST_CASE("pipeline failures name the stage")
{
    auto claims = numbered_claims(3);
    try {
        run_pipeline(ConstantDetector(-1.0), ExactMatchRanker{}, "t1", "x", claims);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "detect");
    }
    try {
        run_pipeline(ConstantDetector(0.9), ThrowingRanker{}, "t1", "x", claims);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "retrieve");
    }
}

TEST_CASE("lexical rankers fit as no-ops and round-trip")
{
    auto claims = numbered_claims(10);
    TweetSet tweets;
    FitContext ctx{claims, tweets};
    const std::string query = "claim text number 7";
    for (const auto& port : std::vector<std::shared_ptr<RankerPort>>{
             std::make_shared<Bm25RankerPort>(), std::make_shared<TfIdfCosineRankerPort>(),
             std::make_shared<EncoderCosineRankerPort>(std::make_shared<candidates::HashEncoder>(64)),
             std::make_shared<ExactMatchRanker>()}) {
        auto model = port->fit(RetrievalDataset{}, ctx);
        auto r = rank_claims(*model, query, claims);
        CHECK(r.entries[0].claim_id == "c007");
        for (const auto& e : r.entries) {
            CHECK(e.score >= 0.0);
            CHECK(e.score <= 1.0);
        }
        std::stringstream buf;
        model->save(buf);
        auto loaded = load_ranker(buf, nullptr, std::make_shared<candidates::HashEncoder>(64));
        auto again = rank_claims(*loaded, query, claims);
        CHECK(again.entries == r.entries);
    }
}

TEST_CASE("bm25 ranker score mapping")
{
    auto claims = numbered_claims(4);
    TweetSet tweets;
    auto model = Bm25RankerPort().fit({}, {claims, tweets});
    auto* bm = dynamic_cast<Bm25RankerModel*>(model.get());
    REQUIRE(bm);
    const text::TokenStream q = text::tokenize("number 2");
    auto raw = bm->index().score_all(q);
    std::vector<ClaimRef> refs;
    for (const auto& c : claims) {
        refs.push_back({c.id, c.text});
    }
    auto mapped = model->score("number 2", refs);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        CHECK(mapped[i] == doctest::Approx(raw[i] / (1.0 + raw[i])).epsilon(1e-15));
    }
}

TEST_CASE("gateway cross-encoder ranker")
{
    MockGateway mock;
    gateway::Endpoint ep;
    ep.base_url = mock.url();
    auto client = std::make_shared<gateway::Client>(ep);
    auto claims = numbered_claims(12);
    std::vector<Tweet> tv{make_tweet("t1", "claim text number 3")};
    TweetSet tweets(std::move(tv));
    RetrievalDataset train;
    train.pairs = {{"t1", "c003", PairLabel::positive}, {"t1", "c004", PairLabel::negative}};
    GatewayRankerPort port(client, {{"epochs", 3}});
    auto model = port.fit(train, {claims, tweets});
    auto rows = mock.last_body("/v1/train")["dataset"];
    REQUIRE(rows.size() == 2);
    CHECK(rows[0]["left"] == "claim text number 3");
    CHECK(rows[0]["label"] == 1);
    auto r = rank_claims(*model, "claim text number 3", claims);
    CHECK(r.entries[0].claim_id == "c003");

    std::stringstream buf;
    model->save(buf);
    auto loaded = load_ranker(buf, client);
    CHECK(rank_claims(*loaded, "claim text number 3", claims).entries == r.entries);

    mock.set_faults({.score_constant = 1.4});
    std::vector<std::string> warnings;
    auto previous = set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
    auto clamped = rank_claims(*model, "x", claims);
    set_warning_sink(previous);
    CHECK(clamped.clamped == 12);
    CHECK(clamped.entries[0].score == 1.0);
}
