#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "factmatch/detection.hpp"
#include "factmatch/error.hpp"
#include "fixtures.hpp"
#include "mock_gateway.hpp"

using namespace factmatch;
using namespace factmatch::detection;
using namespace factmatch::testing;

namespace {

DetectionDataset labeled(std::size_t claims, std::size_t no_claims)
{
    DetectionDataset d;
    for (std::size_t i = 0; i < claims; ++i) {
        d.items.push_back({"p" + std::to_string(i), "false claim text " + std::to_string(i), ClassLabel::claim});
    }
    for (std::size_t i = 0; i < no_claims; ++i) {
        d.items.push_back({"n" + std::to_string(i), "ordinary chatter " + std::to_string(i), ClassLabel::no_claim});
    }
    return d;
}

std::map<std::string, std::size_t> multiset_of(const DetectionDataset& d)
{
    std::map<std::string, std::size_t> m;
    for (const auto& it : d.items) {
        ++m[it.tweet_id];
    }
    return m;
}

class FixedModel final : public DetectorModel {
  public:
    explicit FixedModel(std::map<std::string, double> probs) : probs_(std::move(probs)) {}
    std::vector<double> predict(std::span<const std::string> texts) const override
    {
        std::vector<double> out;
        for (const auto& t : texts) {
            out.push_back(probs_.at(t));
        }
        return out;
    }
    void save(std::ostream&) const override {}
    std::string describe() const override { return "fixed"; }

  private:
    std::map<std::string, double> probs_;
};

DetectionDataset separable_toy()
{
    DetectionDataset d;
    const char* pos[] = {"biolabs in ukraine funded by pentagon", "zelensky fled kyiv yesterday",
                         "biolabs secret pentagon program", "zelensky fled to poland", "pentagon biolabs exposed"};
    const char* neg[] = {"lovely weather for a walk", "my cat sleeps all day", "coffee and a good book",
                         "weather is rainy again", "book club meets on friday", "the cat and the coffee"};
    int i = 0;
    for (const char* t : pos) {
        d.items.push_back({"p" + std::to_string(i++), t, ClassLabel::claim});
    }
    for (const char* t : neg) {
        d.items.push_back({"n" + std::to_string(i++), t, ClassLabel::no_claim});
    }
    return d;
}

}  // namespace

TEST_CASE("detection labels from annotations")
{
    std::vector<Claim> claims{make_claim("c1", "a"), make_claim("c2", "b"), make_claim("c3", "c")};
    std::vector<Tweet> tweets{make_tweet("t1", "x"), make_tweet("t2", "y"), make_tweet("t3", "z"),
                              make_tweet("t4", "w")};
    AnnotationStore store(std::make_shared<const ClaimSet>(std::move(claims)),
                          std::make_shared<const TweetSet>(std::move(tweets)), fixed_clock());
    store.record_annotation("t1", "c1", Label::relevant, "a");
    store.record_annotation("t1", "c2", Label::relevant, "a");
    store.record_annotation("t1", "c3", Label::not_relevant, "a");
    store.record_annotation("t2", "c1", Label::not_relevant, "a");
    store.add_candidate("t3", "c1");
    store.record_annotation("t4", "c1", Label::relevant, "a");
    store.add_candidate("t4", "c2");
    auto r = build_detection_dataset(store);
    REQUIRE(r.dataset.size() == 3);
    CHECK(r.excluded == 1);
    CHECK(r.dataset.items[0] == DetectionItem{"t1", "x", ClassLabel::claim});
    CHECK(r.dataset.items[1] == DetectionItem{"t2", "y", ClassLabel::no_claim});
    CHECK(r.dataset.items[2].label == ClassLabel::claim);
}

TEST_CASE("full-scale store gives 2,359 claim and 3,513 no-claim tweets")
{
    auto r = build_detection_dataset(*full_scale_store());
    CHECK(r.excluded == 0);
    CHECK(r.dataset.count(ClassLabel::claim) == 2359);
    CHECK(r.dataset.count(ClassLabel::no_claim) == 3513);
}

TEST_CASE("oversampling balances 3 against 7")
{
    auto d = labeled(3, 7);
    auto o = oversample_minority(d, 42);
    CHECK(o.count(ClassLabel::claim) == 7);
    CHECK(o.count(ClassLabel::no_claim) == 7);
    CHECK(oversample_minority(d, 42).items == o.items);
}

TEST_CASE("oversampling a balanced set keeps the multiset")
{
    auto d = labeled(4, 4);
    auto o = oversample_minority(d, 1);
    CHECK(multiset_of(o) == multiset_of(d));
}

TEST_CASE("oversampling a single class fails")
{
    CHECK_THROWS_AS(oversample_minority(labeled(0, 5), 1), InvalidArgument);
    CHECK_THROWS_AS(oversample_minority(labeled(5, 0), 1), InvalidArgument);
}

TEST_CASE("oversampling is a superset with copies of minority items only")
{
    auto rng = make_rng(41);
    for (int round = 0; round < 100; ++round) {
        const std::size_t a = 1 + uniform_index(rng, 20);
        const std::size_t b = 1 + uniform_index(rng, 20);
        auto d = labeled(a, b);
        auto o = oversample_minority(d, rng());
        const auto before = multiset_of(d);
        const auto after = multiset_of(o);
        const auto majority = std::max(a, b);
        CHECK(o.count(ClassLabel::claim) == majority);
        CHECK(o.count(ClassLabel::no_claim) == majority);
        const ClassLabel minority = a < b ? ClassLabel::claim : ClassLabel::no_claim;
        for (const auto& [id, n] : after) {
            REQUIRE(before.count(id) == 1);
            if (n > 1) {
                CHECK(a != b);
                CHECK((id[0] == 'p') == (minority == ClassLabel::claim));
            }
        }
        CHECK(after.size() == before.size());
    }
}

TEST_CASE("confusion metrics")
{
    auto m = metrics_from_confusion({2, 1, 1, 2});
    CHECK(m.claim.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.claim.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.claim.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.accuracy == doctest::Approx(4.0 / 6.0).epsilon(1e-12));

    auto perfect = metrics_from_confusion({3, 0, 0, 5});
    CHECK(perfect.claim.f1 == 1.0);
    CHECK(perfect.no_claim.f1 == 1.0);
    CHECK(perfect.accuracy == 1.0);

    auto negative = metrics_from_confusion({0, 0, 3, 5});
    CHECK(negative.claim.precision == 0.0);
    CHECK(negative.claim.precision_undefined);
    CHECK_FALSE(negative.no_claim.precision_undefined);
}

TEST_CASE("metric identities on random confusions")
{
    auto rng = make_rng(43);
    for (int round = 0; round < 500; ++round) {
        Confusion c{uniform_index(rng, 50), uniform_index(rng, 50), uniform_index(rng, 50), uniform_index(rng, 50)};
        if (c.total() == 0) {
            continue;
        }
        auto m = metrics_from_confusion(c);
        const double tot = static_cast<double>(c.total());
        CHECK(m.accuracy == doctest::Approx(static_cast<double>(c.tp + c.tn) / tot).epsilon(1e-12));
        const double weighted = m.claim.recall * static_cast<double>(c.tp + c.fn) / tot
                                + m.no_claim.recall * static_cast<double>(c.tn + c.fp) / tot;
        CHECK(std::fabs(weighted - m.accuracy) <= 1e-12);
        for (const auto* cls : {&m.claim, &m.no_claim}) {
            if (cls->precision + cls->recall > 0.0) {
                CHECK(std::fabs(cls->f1 - 2.0 * cls->precision * cls->recall / (cls->precision + cls->recall)) <= 1e-12);
            }
        }
        auto mac = m.macro();
        CHECK(mac.f1 == doctest::Approx((m.claim.f1 + m.no_claim.f1) / 2.0));
    }
}

TEST_CASE("threshold rule")
{
    CHECK(decide(0.5) == ClassLabel::claim);
    CHECK(decide(0.49) == ClassLabel::no_claim);
    FixedModel model({{"a", 0.5}, {"b", 0.49}});
    CHECK(detect(model, "a").label == ClassLabel::claim);
    CHECK(detect(model, "b").label == ClassLabel::no_claim);
    CHECK(detect(model, "a").probability == detect(model, "a").probability);
}

TEST_CASE("raising the threshold never raises claim recall")
{
    auto rng = make_rng(44);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DetectionDataset d;
    std::map<std::string, double> probs;
    for (int i = 0; i < 200; ++i) {
        const std::string text = "text" + std::to_string(i);
        probs[text] = u(rng);
        d.items.push_back({"t" + std::to_string(i), text, uniform_index(rng, 2) ? ClassLabel::claim : ClassLabel::no_claim});
    }
    FixedModel model(probs);
    double previous = 2.0;
    for (double th = 0.0; th <= 1.0; th += 0.05) {
        const double r = evaluate_detector(model, d, th).claim.recall;
        CHECK(r <= previous);
        previous = r;
    }
}

TEST_CASE("native baseline separates a separable set")
{
    auto d = separable_toy();
    TfIdfLogisticPort port;
    auto model = train_detector(port, d, DetectionDataset{});
    auto m = evaluate_detector(*model, d);
    CHECK(m.accuracy == 1.0);
    for (double p : model->predict(d.texts())) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("native baseline is deterministic and round-trips")
{
    auto d = separable_toy();
    TfIdfLogisticPort port;
    auto a = port.fit(d, {});
    auto b = port.fit(d, {});
    auto* la = dynamic_cast<TfIdfLogisticModel*>(a.get());
    auto* lb = dynamic_cast<TfIdfLogisticModel*>(b.get());
    REQUIRE(la);
    REQUIRE(lb);
    CHECK(la->weights() == lb->weights());
    CHECK(la->bias() == lb->bias());

    std::stringstream buf;
    a->save(buf);
    CHECK(buf.str().substr(0, 8) == std::string("FMDETLR\0", 8));
    auto loaded = load_detector(buf);
    CHECK(loaded->predict(d.texts()) == a->predict(d.texts()));
}

TEST_CASE("training preconditions")
{
    TfIdfLogisticPort port;
    CHECK_THROWS_AS(train_detector(port, DetectionDataset{}, {}), InvalidArgument);
    CHECK_THROWS_AS(train_detector(port, labeled(4, 0), {}), InvalidArgument);
}

TEST_CASE("gateway classifier")
{
    MockGateway mock;
    gateway::Endpoint ep;
    ep.base_url = mock.url();
    auto client = std::make_shared<gateway::Client>(ep);
    GatewayClassifierPort port(client, {{"epochs", 5}, {"batch_size", 20}});
    auto d = separable_toy();
    auto model = train_detector(port, d, labeled(1, 1));
    CHECK(mock.last_body("/v1/train")["hyperparams"] == nlohmann::json{{"epochs", 5}, {"batch_size", 20}});
    CHECK(evaluate_detector(*model, d).accuracy == 1.0);

    std::stringstream buf;
    model->save(buf);
    CHECK(buf.str().substr(0, 8) == "FMREMOTE");
    auto loaded = load_detector(buf, client);
    CHECK(loaded->predict(d.texts()) == model->predict(d.texts()));
}

TEST_CASE("unreachable gateway classifier raises a transport error")
{
    gateway::Endpoint ep;
    ep.base_url = "http://127.0.0.1:1";
    ep.timeout_ms = 500;
    ep.retry = {1, 0};
    GatewayClassifierPort port(std::make_shared<gateway::Client>(ep), nlohmann::json::object());
    CHECK_THROWS_AS(train_detector(port, separable_toy(), {}), TransportError);
}
