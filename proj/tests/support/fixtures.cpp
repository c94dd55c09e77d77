#include "fixtures.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace factmatch::testing {

namespace fs = std::filesystem;

Timestamp fixed_time()
{
    return *parse_rfc3339("2022-03-09T10:00:00Z");
}

Clock fixed_clock()
{
    return [] { return fixed_time(); };
}

std::string claim_id(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "c%03zu", i);
    return buf;
}

std::string tweet_id(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%05zu", i);
    return buf;
}

Claim make_claim(std::string id, std::string text)
{
    Claim c;
    c.id = std::move(id);
    c.text = std::move(text);
    c.verdict = Verdict::false_claim;
    c.verified_date = *parse_date("2022-03-01");
    return c;
}

Tweet make_tweet(std::string id, std::string text, std::string lang, TweetKind kind, std::string created_at)
{
    Tweet t;
    t.id = std::move(id);
    t.text = std::move(text);
    t.lang = std::move(lang);
    t.kind = kind;
    t.created_at = *parse_rfc3339(created_at);
    return t;
}

namespace {

std::string topic_word(std::size_t topic, std::size_t w)
{
    return "topic" + std::to_string(topic) + "w" + std::to_string(w);
}

}  // namespace

std::shared_ptr<AnnotationStore> full_scale_store()
{
    constexpr std::size_t kClaims = 83;
    constexpr std::size_t kTweets = 5872;
    constexpr std::size_t kPositive = 2359;
    constexpr std::size_t kTwoExtras = 69;
    constexpr std::size_t kExtraRelevant = 1278;

    std::vector<Claim> claims;
    for (std::size_t i = 0; i < kClaims; ++i) {
        claims.push_back(make_claim(claim_id(i), "claim " + std::to_string(i) + " " + topic_word(i, 0)));
    }
    std::vector<Tweet> tweets;
    for (std::size_t i = 0; i < kTweets; ++i) {
        tweets.push_back(make_tweet(tweet_id(i), "tweet " + std::to_string(i) + " " + topic_word(i % kClaims, 0)));
    }
    auto store = std::make_shared<AnnotationStore>(std::make_shared<const ClaimSet>(std::move(claims)),
                                                   std::make_shared<const TweetSet>(std::move(tweets)),
                                                   fixed_clock());
    for (std::size_t i = 0; i < kTweets; ++i) {
        const auto t = tweet_id(i);
        const bool positive = i < kPositive;
        store->record_annotation(t, claim_id(i % kClaims), positive ? Label::relevant : Label::not_relevant, "fx");
        if (!positive) {
            continue;
        }
        const std::size_t extras = i < kTwoExtras ? 2 : 1;
        for (std::size_t e = 1; e <= extras; ++e) {
            const bool relevant = e == 1 && i < kExtraRelevant;
            store->record_annotation(t, claim_id((i + e) % kClaims), relevant ? Label::relevant : Label::not_relevant,
                                     "fx");
        }
    }
    return store;
}

Corpus pool_corpus(std::size_t n_claims, std::size_t tweets_per_claim, std::uint64_t seed)
{
    auto rng = make_rng(seed);
    std::vector<Claim> claims;
    for (std::size_t c = 0; c < n_claims; ++c) {
        std::string text;
        for (std::size_t w = 0; w < 6; ++w) {
            text += (w ? " " : "") + topic_word(c, w);
        }
        claims.push_back(make_claim(claim_id(c), text));
    }
    std::vector<Tweet> tweets;
    for (std::size_t c = 0; c < n_claims; ++c) {
        for (std::size_t j = 0; j < tweets_per_claim; ++j) {
            std::string text;
            for (std::size_t w = 0; w < 4; ++w) {
                text += (w ? " " : "") + topic_word(c, uniform_index(rng, 6));
            }
            text += " filler" + std::to_string(uniform_index(rng, 40));
            tweets.push_back(make_tweet(tweet_id(c * tweets_per_claim + j), text));
        }
    }
    return {std::make_shared<const ClaimSet>(std::move(claims)), std::make_shared<const TweetSet>(std::move(tweets))};
}

std::shared_ptr<AnnotationStore> separable_store(std::uint64_t seed)
{
    constexpr std::size_t kClaims = 20;
    constexpr std::size_t kPositive = 200;
    constexpr std::size_t kTweets = 400;
    constexpr std::size_t kTopicWords = 6;
    auto rng = make_rng(seed);

    std::vector<Claim> claims;
    for (std::size_t c = 0; c < kClaims; ++c) {
        std::string text;
        for (std::size_t w = 0; w < kTopicWords; ++w) {
            text += (w ? " " : "") + topic_word(c, w);
        }
        claims.push_back(make_claim(claim_id(c), text));
    }
    std::vector<Tweet> tweets;
    for (std::size_t i = 0; i < kTweets; ++i) {
        std::string text;
        if (i < kPositive) {
            // Four distinct words of the claim's vocabulary.
            std::vector<std::size_t> words(kTopicWords);
            for (std::size_t w = 0; w < kTopicWords; ++w) {
                words[w] = w;
            }
            shuffle_in_place(std::span<std::size_t>(words), rng);
            for (std::size_t w = 0; w < 4; ++w) {
                text += (w ? " " : "") + topic_word(i % kClaims, words[w]);
            }
        } else {
            for (std::size_t w = 0; w < 5; ++w) {
                text += (w ? " " : "") + std::string("chatter") + std::to_string(uniform_index(rng, 60));
            }
        }
        tweets.push_back(make_tweet(tweet_id(i), text));
    }
    auto store = std::make_shared<AnnotationStore>(std::make_shared<const ClaimSet>(std::move(claims)),
                                                   std::make_shared<const TweetSet>(std::move(tweets)),
                                                   fixed_clock());
    for (std::size_t i = 0; i < kTweets; ++i) {
        const auto t = tweet_id(i);
        if (i < kPositive) {
            store->record_annotation(t, claim_id(i % kClaims), Label::relevant, "fx");
            store->record_annotation(t, claim_id((i + 1) % kClaims), Label::not_relevant, "fx");
        } else {
            store->record_annotation(t, claim_id(i % kClaims), Label::not_relevant, "fx");
        }
    }
    return store;
}

std::shared_ptr<AnnotationStore> random_store(Rng& rng, std::size_t min_claims, std::size_t max_claims,
                                              std::size_t min_tweets, std::size_t max_tweets)
{
    const std::size_t n_claims = min_claims + uniform_index(rng, max_claims - min_claims + 1);
    const std::size_t n_tweets = min_tweets + uniform_index(rng, max_tweets - min_tweets + 1);
    std::vector<Claim> claims;
    for (std::size_t c = 0; c < n_claims; ++c) {
        claims.push_back(make_claim(claim_id(c), "claim " + topic_word(c, 0)));
    }
    std::vector<Tweet> tweets;
    for (std::size_t i = 0; i < n_tweets; ++i) {
        tweets.push_back(make_tweet(tweet_id(i), "tweet " + topic_word(i % n_claims, 1)));
    }
    auto store = std::make_shared<AnnotationStore>(std::make_shared<const ClaimSet>(std::move(claims)),
                                                   std::make_shared<const TweetSet>(std::move(tweets)),
                                                   fixed_clock());
    for (std::size_t i = 0; i < n_tweets; ++i) {
        const std::size_t n_pairs = 1 + uniform_index(rng, 3);
        const bool positive = uniform_index(rng, 2) == 0;
        for (std::size_t p = 0; p < n_pairs; ++p) {
            const auto c = claim_id(uniform_index(rng, n_claims));
            const bool relevant = positive && (p == 0 || uniform_index(rng, 2) == 0);
            store->record_annotation(tweet_id(i), c, relevant ? Label::relevant : Label::not_relevant, "fx");
        }
    }
    return store;
}

fs::path temp_dir(const std::string& name)
{
    static std::atomic<int> counter{0};
    auto dir = fs::temp_directory_path()
               / ("factmatch-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

StoreFiles write_store(const AnnotationStore& store, const fs::path& dir)
{
    StoreFiles f{dir / "claims.json", dir / "tweets.jsonl", dir / "annotations.jsonl"};
    fs::create_directories(dir);
    {
        std::ofstream out(f.claims, std::ios::binary);
        write_claims(out, store.claims());
    }
    {
        std::ofstream out(f.tweets, std::ios::binary);
        write_tweets(out, store.tweets());
    }
    {
        std::ofstream out(f.annotations, std::ios::binary);
        store.export_jsonl(out);
    }
    return f;
}

}  // namespace factmatch::testing
