// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "factmatch/candidates.hpp"
#include "factmatch/commands.hpp"
#include "factmatch/detection.hpp"
#include "factmatch/evalharness.hpp"
#include "factmatch/folds.hpp"
#include "factmatch/log.hpp"
#include "factmatch/retrieval.hpp"
#include "factmatch/stats.hpp"
#include "factmatch/textproc.hpp"
#include "fixtures.hpp"
#include "mock_gateway.hpp"
#include "oracles.hpp"

using namespace factmatch;
using namespace factmatch::testing;

namespace {

constexpr double kPoolSeconds = 10.0;
constexpr double kSamplingSeconds = 5.0;
constexpr double kFoldSeconds = 60.0;
constexpr double kEndToEndSeconds = 60.0;
constexpr double kMetricTolerance = 1e-12;
constexpr double kBm25Tolerance = 1e-9;
constexpr double kStatsTolerance = 1e-6;
constexpr double kMinF1 = 0.95;
constexpr double kMinHitRatio5 = 0.95;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

std::vector<retrieval::PositivePair> positives_of(const AnnotationStore& store)
{
    std::vector<retrieval::PositivePair> out;
    for (const auto& p : store.pairs()) {
        if (p.label == Label::relevant) {
            out.push_back({p.tweet_id, p.claim_id});
        }
    }
    return out;
}

retrieval::RankedClaims ranked(const std::vector<std::string>& ids)
{
    retrieval::RankedClaims r;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        r.entries.push_back({ids[i], 1.0 - static_cast<double>(i) / static_cast<double>(ids.size())});
    }
    return r;
}

const std::vector<std::size_t> kGrid{1, 3, 5, 10, 20};

Outcome pair_pool()
{
    auto dir = temp_dir("acceptance-pool");
    auto corpus = pool_corpus(83, 100);
    AnnotationStore store(corpus.claims, corpus.tweets, fixed_clock());
    auto files = write_store(store, dir);
    app::CandidatesOptions o;
    o.claims = files.claims;
    o.tweets = files.tweets;
    o.out = dir / "pool.jsonl";
    o.k = 100;
    const auto t0 = std::chrono::steady_clock::now();
    auto r = app::cmd_candidates(o);
    const double secs = seconds_since(t0);
    std::ifstream in(o.out);
    std::size_t lines = 0;
    std::set<std::pair<std::string, std::string>> unique;
    std::string line;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        unique.emplace(j["tweet_id"], j["claim_id"]);
        ++lines;
    }
    const bool ok = lines == 8300 && unique.size() == 8300 && secs < kPoolSeconds;
    return {ok, fmt("%.0f unique pairs from 83 claims x 8,300 tweets in %.2f s (limit %.0f s)",
                    static_cast<double>(unique.size()), secs, kPoolSeconds)};
}

Outcome negative_sampling()
{
    auto store = full_scale_store();
    const auto positives = positives_of(*store);
    const auto relevant = store->relevant_claims();
    std::vector<std::string> claims;
    for (const auto& c : store->claims()) {
        claims.push_back(c.id);
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t collisions = 0;
    std::size_t wrong_size = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto ds = retrieval::sample_negatives(positives, claims, relevant, 10, seed);
        if (ds.size() != 40007) {
            ++wrong_size;
        }
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& p : ds.pairs) {
            if (!seen.emplace(p.tweet_id, p.claim_id).second) {
                ++collisions;
            }
            if (p.label == retrieval::PairLabel::negative && relevant.at(p.tweet_id).count(p.claim_id)) {
                ++collisions;
            }
        }
    }
    const double secs = seconds_since(t0);
    const bool ok = positives.size() == 3637 && wrong_size == 0 && collisions == 0 && secs < kSamplingSeconds;
    return {ok, fmt("3,637 positives -> 40,007 pairs on every seed; %.0f collisions over 100 seeds; %.2f s (limit %.0f s)",
                    static_cast<double>(collisions), secs, kSamplingSeconds)};
}

Outcome metric_oracles()
{
    using detection::ClassLabel;
    // 12 items: TP 4, FN 1, FP 2, TN 5
    const std::vector<ClassLabel> truth{ClassLabel::claim,    ClassLabel::claim,    ClassLabel::claim,
                                        ClassLabel::claim,    ClassLabel::claim,    ClassLabel::no_claim,
                                        ClassLabel::no_claim, ClassLabel::no_claim, ClassLabel::no_claim,
                                        ClassLabel::no_claim, ClassLabel::no_claim, ClassLabel::no_claim};
    const std::vector<ClassLabel> pred{ClassLabel::claim,    ClassLabel::claim,    ClassLabel::claim,
                                       ClassLabel::claim,    ClassLabel::no_claim, ClassLabel::claim,
                                       ClassLabel::claim,    ClassLabel::no_claim, ClassLabel::no_claim,
                                       ClassLabel::no_claim, ClassLabel::no_claim, ClassLabel::no_claim};
    const auto m = detection::metrics_from_confusion(detection::confusion_of(truth, pred));
    const std::vector<std::pair<double, double>> checks{
        {m.claim.precision, 4.0 / 6.0},   {m.claim.recall, 4.0 / 5.0},   {m.claim.f1, 8.0 / 11.0},
        {m.no_claim.precision, 5.0 / 6.0}, {m.no_claim.recall, 5.0 / 7.0}, {m.no_claim.f1, 10.0 / 13.0},
        {m.accuracy, 9.0 / 12.0}};
    double worst = 0.0;
    for (const auto& [got, want] : checks) {
        worst = std::max(worst, std::fabs(got - want));
    }

    auto rng = make_rng(2024);
    std::vector<std::string> claims;
    for (std::size_t i = 0; i < 30; ++i) {
        claims.push_back(claim_id(i));
    }
    retrieval::Rankings rankings;
    retrieval::RelevanceMap rel;
    std::map<std::string, std::vector<std::string>> plain;
    for (std::size_t t = 0; t < 50; ++t) {
        auto order = claims;
        shuffle_in_place(std::span(order), rng);
        const auto id = tweet_id(t);
        rankings[id] = ranked(order);
        plain[id] = order;
        const std::size_t n = 1 + uniform_index(rng, 3);
        for (std::size_t i = 0; i < n; ++i) {
            rel[id].insert(claims[uniform_index(rng, claims.size())]);
        }
    }
    std::size_t mismatches = 0;
    for (auto k : kGrid) {
        if (retrieval::hit_ratio_at_k(rankings, rel, k) != oracle::hit_ratio(plain, rel, k)) {
            ++mismatches;
        }
    }
    const bool ok = worst <= kMetricTolerance && mismatches == 0;
    return {ok, fmt("12-item confusion max error %.1e (tol %.0e); HitRatio@{1,3,5,10,20} recount mismatches: %.0f",
                    worst, kMetricTolerance, static_cast<double>(mismatches))};
}

Outcome hit_ratio_recall()
{
    auto rng = make_rng(4);
    std::vector<std::string> claims;
    for (std::size_t i = 0; i < 83; ++i) {
        claims.push_back(claim_id(i));
    }
    retrieval::Rankings rankings;
    retrieval::RelevanceMap rel;
    for (std::size_t t = 0; t < 100; ++t) {
        auto order = claims;
        shuffle_in_place(std::span(order), rng);
        rankings[tweet_id(t)] = ranked(order);
        rel[tweet_id(t)] = {claims[uniform_index(rng, claims.size())]};
    }
    std::size_t differ = 0;
    for (std::size_t k = 1; k <= 83; ++k) {
        if (retrieval::hit_ratio_at_k(rankings, rel, k) != retrieval::recall_at_k(rankings, rel, k)) {
            ++differ;
        }
    }
    return {differ == 0, fmt("100 single-relevant instances: HitRatio@k == Recall@k for k = 1..83, %.0f differences",
                             static_cast<double>(differ))};
}

Outcome fold_invariants()
{
    const auto t0 = std::chrono::steady_clock::now();
    auto rng = make_rng(5);
    std::size_t violations = 0;
    std::size_t dropped_total = 0;
    std::size_t dropped_mismatch = 0;
    for (int round = 0; round < 200; ++round) {
        auto store = random_store(rng, 5, 40, 20, 150);
        auto inputs = eval::EvalInputs::from_store(*store);
        std::vector<std::string> ids;
        for (const auto& it : inputs.dataset.items) {
            ids.push_back(it.tweet_id);
        }
        const std::size_t n = 5;
        auto lto = eval::make_lto_folds(ids, n, rng());
        std::map<std::string, int> seen_in_test;
        for (const auto& f : lto.folds) {
            std::set<std::string> tr(f.train.begin(), f.train.end());
            std::set<std::string> va(f.valid.begin(), f.valid.end());
            for (const auto& t : f.test) {
                ++seen_in_test[t];
                violations += tr.count(t) + va.count(t);
            }
            for (const auto& t : f.valid) {
                violations += tr.count(t);
            }
        }
        for (const auto& id : ids) {
            violations += seen_in_test[id] == 1 ? 0 : 1;
        }

        auto lco = eval::make_lco_folds(*store, n, rng());
        std::size_t total_rel = 0;
        for (const auto& [t, cs] : inputs.relevant) {
            total_rel += cs.size();
        }
        std::size_t kept = 0;
        for (const auto& [t, cs] : lco.relevant) {
            kept += cs.size();
        }
        std::size_t per_fold = 0;
        for (const auto& f : lco.folds) {
            per_fold += f.dropped_pairs;
            const std::set<std::string> held(f.claims.begin(), f.claims.end());
            // training pairs: positives of train tweets plus negatives drawn from non-held-out claims
            std::vector<retrieval::PositivePair> pos;
            for (const auto& t : f.train) {
                if (auto it = lco.relevant.find(t); it != lco.relevant.end()) {
                    for (const auto& c : it->second) {
                        pos.push_back({t, c});
                        violations += held.count(c);
                    }
                }
            }
            std::vector<std::string> train_claims;
            for (const auto& c : store->claims()) {
                if (!held.count(c.id)) {
                    train_claims.push_back(c.id);
                }
            }
            std::map<std::string, std::size_t> per_tweet;
            for (const auto& p : pos) {
                ++per_tweet[p.tweet_id];
            }
            bool enough = !pos.empty();
            for (const auto& [t, m] : per_tweet) {
                std::size_t unrelated = 0;
                for (const auto& c : train_claims) {
                    unrelated += inputs.relevant.at(t).count(c) ? 0 : 1;
                }
                enough = enough && unrelated >= m;
            }
            if (enough) {
                auto ds = retrieval::sample_negatives(pos, train_claims, inputs.relevant, 1, rng());
                for (const auto& p : ds.pairs) {
                    violations += held.count(p.claim_id);
                }
            }
            for (const auto& t : f.test) {
                if (auto it = lco.relevant.find(t); it != lco.relevant.end()) {
                    for (const auto& c : it->second) {
                        violations += held.count(c) ? 0 : 1;
                    }
                }
            }
        }
        dropped_total += lco.dropped_pairs();
        dropped_mismatch += (total_rel - kept != lco.dropped_pairs()) + (per_fold != lco.dropped_pairs());
    }
    const double secs = seconds_since(t0);
    const bool ok = violations == 0 && dropped_mismatch == 0 && secs < kFoldSeconds;
    return {ok, fmt("200 random datasets: %.0f LTO/LCO violations, %.0f dropped pairs reported and reconciled; %.2f s",
                    static_cast<double>(violations + dropped_mismatch), static_cast<double>(dropped_total), secs)};
}

Outcome oversampling()
{
    auto rng = make_rng(6);
    std::size_t bad = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        detection::DetectionDataset d;
        const std::size_t a = 1 + uniform_index(rng, 40);
        const std::size_t b = 1 + uniform_index(rng, 40);
        for (std::size_t i = 0; i < a; ++i) {
            d.items.push_back({"p" + std::to_string(i), "text p" + std::to_string(i), detection::ClassLabel::claim});
        }
        for (std::size_t i = 0; i < b; ++i) {
            d.items.push_back({"n" + std::to_string(i), "text n" + std::to_string(i), detection::ClassLabel::no_claim});
        }
        auto o = detection::oversample_minority(d, seed);
        auto o2 = detection::oversample_minority(d, seed);
        const auto major = std::max(a, b);
        bad += o.count(detection::ClassLabel::claim) != major;
        bad += o.count(detection::ClassLabel::no_claim) != major;
        bad += !(o.items == o2.items);
        std::multiset<std::string> in;
        std::multiset<std::string> out;
        for (const auto& it : d.items) {
            in.insert(it.tweet_id);
        }
        for (const auto& it : o.items) {
            out.insert(it.tweet_id);
        }
        bad += !std::includes(out.begin(), out.end(), in.begin(), in.end());
    }
    return {bad == 0, fmt("100 seeded runs: %.0f balance/superset/determinism failures", static_cast<double>(bad))};
}

Outcome bm25()
{
    const std::vector<text::TokenStream> docs = {
        {"russia", "invaded", "ukraine", "on", "thursday"},
        {"ukraine", "army", "defends", "kyiv"},
        {"putin", "warned", "india", "about", "sanctions"},
        {"sanctions", "sanctions", "sanctions", "on", "russia"},
        {"kyiv", "mayor", "says", "city", "holds"},
        {"biolabs", "in", "ukraine", "claim", "is", "false"},
        {"zelensky", "fled", "kyiv", "claim"},
        {"nato", "troops", "in", "ukraine"},
        {"ukraine", "ukraine", "russia", "war", "news", "today", "live"},
        {"grain", "exports", "blocked"},
    };
    std::vector<std::pair<std::string, text::TokenStream>> named;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        named.emplace_back("d" + std::to_string(i), docs[i]);
    }
    auto index = text::Bm25Index::build(named);
    const std::vector<text::TokenStream> queries = {
        {"ukraine"}, {"sanctions", "russia"}, {"kyiv", "claim", "false"}, {"ukraine", "ukraine", "war"}, {"absent"}};
    double worst = 0.0;
    for (const auto& q : queries) {
        auto got = index.score_all(q);
        auto want = oracle::bm25(docs, q);
        for (std::size_t i = 0; i < got.size(); ++i) {
            worst = std::max(worst, std::fabs(got[i] - want[i]));
        }
    }
    return {worst <= kBm25Tolerance,
            fmt("10-document corpus, 5 queries: max |BM25 - reference| = %.1e (tol %.0e)", worst, kBm25Tolerance)};
}

Outcome end_to_end()
{
    MockGateway mock;
    gateway::Endpoint ep;
    ep.base_url = mock.url();
    eval::PortContext ctx{std::make_shared<gateway::Client>(ep), nullptr};
    auto store = separable_store();
    const auto t0 = std::chrono::steady_clock::now();

    eval::EvalConfig det;
    det.arms = {{"mock-classifier", "gateway-classify", {}, {}}};
    auto d = eval::run_eval(*store, det, ctx);

    eval::EvalConfig ret;
    ret.task = eval::TaskKind::retrieve;
    ret.arms = {{"mock-cross-encoder", "gateway-cross-encoder", {}, {}}};
    auto r = eval::run_eval(*store, ret, ctx);
    const double secs = seconds_since(t0);

    const double f1 = d.arms[0].at("claim.f1").aggregate.mean;
    const double hr5 = r.arms[0].at("hit_ratio@5").aggregate.mean;
    const bool ok = f1 >= kMinF1 && hr5 >= kMinHitRatio5 && secs < kEndToEndSeconds;
    return {ok, fmt("separable corpus, LTO 5-fold, mock scorer: claim F1 %.4f (min 0.95), HitRatio@5 %.4f (min 0.95), %.2f s",
                    f1, hr5, secs)};
}

Outcome reproducibility()
{
    MockGateway mock;
    gateway::Endpoint ep;
    ep.base_url = mock.url();
    auto dir = temp_dir("acceptance-repro");
    auto store = separable_store();
    auto files = write_store(*store, dir / "data");
    app::EvalOptions o;
    o.data = {files.claims, files.tweets, std::nullopt, files.annotations};
    o.out_dir = dir / "runs";
    o.ports.client = std::make_shared<gateway::Client>(ep);
    o.config.arms = {{"tfidf-lr", "tfidf-lr", {}, {}}, {"mock", "gateway-classify", {}, {}}};
    auto a = app::cmd_eval(o);
    auto b = app::cmd_eval(o);
    const auto ra = read_file(a.report_json);
    const auto rb = read_file(b.report_json);
    const bool ok = !ra.empty() && ra == rb && a.manifest.run_id != b.manifest.run_id;
    return {ok, fmt("two cmd_eval runs with distinct run ids: report.json %.0f vs %.0f bytes, ",
                    static_cast<double>(ra.size()), static_cast<double>(rb.size()))
                    + (ra == rb ? "identical" : "differ")};
}

Outcome statistics()
{
    auto rng = make_rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_ci = 0.0;
    double worst_p = 0.0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> a(5);
        std::vector<double> b(5);
        for (std::size_t j = 0; j < 5; ++j) {
            a[j] = u(rng);
            b[j] = u(rng);
        }
        const auto got = eval::mean_ci95(a);
        const auto want = oracle::mean_ci95(a);
        worst_ci = std::max({worst_ci, std::fabs(got.mean - want.mean), std::fabs(got.half_width - want.half_width)});
        worst_p = std::max(worst_p, std::fabs(eval::paired_significance(a, b).p_value - oracle::paired_p(a, b)));
    }
    const bool ok = worst_ci <= kStatsTolerance && worst_p <= kStatsTolerance;
    return {ok, fmt("1,000 random 5-fold vectors: max ci95 error %.1e, max p-value error %.1e (tol %.0e)", worst_ci,
                    worst_p, kStatsTolerance)};
}

}  // namespace

int main()
{
    set_warning_sink({});
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"pair pool arithmetic", pair_pool},
        {"negative sampling arithmetic", negative_sampling},
        {"metric oracles", metric_oracles},
        {"hit ratio equals recall", hit_ratio_recall},
        {"fold invariants", fold_invariants},
        {"oversampling", oversampling},
        {"bm25 reference", bm25},
        {"end-to-end with mock scorer", end_to_end},
        {"reproducible reports", reproducibility},
        {"statistics oracle", statistics},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s  %2zu  %-30s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed;
}
