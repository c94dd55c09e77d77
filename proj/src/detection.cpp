#include "factmatch/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "factmatch/binary_io.hpp"
#include "factmatch/error.hpp"
#include "factmatch/rng.hpp"

namespace factmatch::detection {

using nlohmann::json;

std::string_view to_string(ClassLabel l)
{
    return l == ClassLabel::claim ? "claim" : "no_claim";
}

std::size_t DetectionDataset::count(ClassLabel l) const
{
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [l](const DetectionItem& i) { return i.label == l; }));
}

std::vector<std::string> DetectionDataset::texts() const
{
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& i : items) {
        out.push_back(i.text);
    }
    return out;
}

BuildResult build_detection_dataset(const AnnotationStore& store)
{
    struct Tally {
        std::size_t relevant = 0;
        std::size_t unlabeled = 0;
    };
    std::map<std::string, Tally> tally;
    for (const auto& p : store.pairs()) {
        auto& t = tally[p.tweet_id];
        if (p.label == Label::relevant) {
            ++t.relevant;
        } else if (p.label == Label::unlabeled) {
            ++t.unlabeled;
        }
    }
    BuildResult result;
    for (const auto& tweet : store.tweets()) {
        auto it = tally.find(tweet.id);
        if (it == tally.end()) {
            continue;
        }
        if (it->second.relevant > 0) {
            result.dataset.items.push_back({tweet.id, tweet.text, ClassLabel::claim});
        } else if (it->second.unlabeled > 0) {
            ++result.excluded;
        } else {
            result.dataset.items.push_back({tweet.id, tweet.text, ClassLabel::no_claim});
        }
    }
    return result;
}

DetectionDataset oversample_minority(const DetectionDataset& dataset, std::uint64_t seed)
{
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < dataset.items.size(); ++i) {
        (dataset.items[i].label == ClassLabel::claim ? pos : neg).push_back(i);
    }
    if (pos.empty() || neg.empty()) {
        throw InvalidArgument("oversample: both classes must be present");
    }
    const auto& minority = pos.size() < neg.size() ? pos : neg;
    const std::size_t deficit = std::max(pos.size(), neg.size()) - minority.size();

    auto rng = make_rng(seed);
    DetectionDataset out;
    out.items = dataset.items;
    out.items.reserve(dataset.items.size() + deficit);
    for (std::size_t i = 0; i < deficit; ++i) {
        out.items.push_back(dataset.items[minority[uniform_index(rng, minority.size())]]);
    }
    shuffle_in_place(std::span<DetectionItem>(out.items), rng);
    return out;
}

std::shared_ptr<const DetectorModel> train_detector(const ClassifierPort& port, const DetectionDataset& train,
                                                    const DetectionDataset& valid)
{
    if (train.empty()) {
        throw InvalidArgument("train_detector: empty training set");
    }
    if (train.count(ClassLabel::claim) == 0 || train.count(ClassLabel::no_claim) == 0) {
        throw InvalidArgument("train_detector: training set needs both classes");
    }
    return port.fit(train, valid);
}

ClassLabel decide(double probability, double threshold)
{
    return probability >= threshold ? ClassLabel::claim : ClassLabel::no_claim;
}

Detection detect(const DetectorModel& model, std::string_view text, double threshold)
{
    std::string t(text);
    auto probs = model.predict(std::span<const std::string>(&t, 1));
    if (probs.size() != 1) {
        throw ProtocolError("detector returned " + std::to_string(probs.size()) + " probabilities for 1 text");
    }
    return Detection{decide(probs[0], threshold), probs[0]};
}

namespace {

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn)
{
    ClassMetrics m;
    if (tp + fp == 0) {
        m.precision_undefined = true;
    } else {
        m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    if (tp + fn == 0) {
        m.recall_undefined = true;
    } else {
        m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

}  // namespace

PerClassMetrics metrics_from_confusion(const Confusion& c)
{
    PerClassMetrics m;
    m.confusion = c;
    m.claim = class_metrics(c.tp, c.fp, c.fn);
    // For the negative class the roles flip: tn are its hits, fn its false alarms.
    m.no_claim = class_metrics(c.tn, c.fn, c.fp);
    m.accuracy = c.total() == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    return m;
}

ClassMetrics PerClassMetrics::macro() const
{
    ClassMetrics m;
    m.precision = (claim.precision + no_claim.precision) / 2.0;
    m.recall = (claim.recall + no_claim.recall) / 2.0;
    m.f1 = (claim.f1 + no_claim.f1) / 2.0;
    m.precision_undefined = claim.precision_undefined || no_claim.precision_undefined;
    m.recall_undefined = claim.recall_undefined || no_claim.recall_undefined;
    return m;
}

Confusion confusion_of(std::span<const ClassLabel> truth, std::span<const ClassLabel> predicted)
{
    if (truth.size() != predicted.size()) {
        throw InvalidArgument("confusion: length mismatch");
    }
    Confusion c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool t = truth[i] == ClassLabel::claim;
        const bool p = predicted[i] == ClassLabel::claim;
        if (t && p) {
            ++c.tp;
        } else if (!t && p) {
            ++c.fp;
        } else if (t && !p) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

PerClassMetrics evaluate_detector(const DetectorModel& model, const DetectionDataset& test, double threshold)
{
    if (test.empty()) {
        throw InvalidArgument("evaluate_detector: empty test set");
    }
    auto probs = model.predict(test.texts());
    if (probs.size() != test.size()) {
        throw ProtocolError("detector returned the wrong number of probabilities");
    }
    std::vector<ClassLabel> truth;
    std::vector<ClassLabel> predicted;
    for (std::size_t i = 0; i < test.size(); ++i) {
        truth.push_back(test.items[i].label);
        predicted.push_back(decide(probs[i], threshold));
    }
    return metrics_from_confusion(confusion_of(truth, predicted));
}

// --- TF-IDF + logistic regression -------------------------------------------

namespace {

constexpr std::string_view kLogisticMagic{"FMDETLR\0", 8};
constexpr std::uint32_t kLogisticVersion = 1;

double sigmoid(double z)
{
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double linear(const text::SparseVector& x, const std::vector<double>& w, double b)
{
    double z = b;
    for (const auto& e : x) {
        z += w[e.index] * e.weight;
    }
    return z;
}

double log_loss(const std::vector<text::SparseVector>& xs, const std::vector<double>& ys,
                const std::vector<double>& w, double b)
{
    constexpr double eps = 1e-15;
    double loss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double p = std::clamp(sigmoid(linear(xs[i], w, b)), eps, 1.0 - eps);
        loss -= ys[i] * std::log(p) + (1.0 - ys[i]) * std::log(1.0 - p);
    }
    return loss / static_cast<double>(xs.size());
}

}  // namespace

TfIdfLogisticModel::TfIdfLogisticModel(text::TfIdfModel vectorizer, std::vector<double> weights, double bias,
                                       std::size_t iterations)
    : vectorizer_(std::move(vectorizer)), weights_(std::move(weights)), bias_(bias), iterations_(iterations)
{
    if (weights_.size() != vectorizer_.vocabulary_size()) {
        throw InvalidArgument("logistic model: weight count does not match vocabulary");
    }
}

std::vector<double> TfIdfLogisticModel::predict(std::span<const std::string> texts) const
{
    std::vector<double> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(sigmoid(linear(vectorizer_.vectorize(std::string_view(t)), weights_, bias_)));
    }
    return out;
}

void TfIdfLogisticModel::save(std::ostream& out) const
{
    binary::write_header(out, kLogisticMagic, kLogisticVersion);
    vectorizer_.save(out);
    binary::write_u64(out, iterations_);
    binary::write_f64(out, bias_);
    binary::write_u64(out, weights_.size());
    for (double w : weights_) {
        binary::write_f64(out, w);
    }
}

std::unique_ptr<TfIdfLogisticModel> TfIdfLogisticModel::load(std::istream& in)
{
    binary::expect_header(in, kLogisticMagic, kLogisticVersion);
    auto vectorizer = text::TfIdfModel::load(in);
    auto iterations = binary::read_u64(in);
    auto bias = binary::read_f64(in);
    auto n = binary::read_u64(in);
    if (n != vectorizer.vocabulary_size()) {
        throw FormatVersionError("logistic model: weight count does not match vocabulary");
    }
    std::vector<double> w(n);
    for (auto& x : w) {
        x = binary::read_f64(in);
    }
    return std::make_unique<TfIdfLogisticModel>(std::move(vectorizer), std::move(w), bias, iterations);
}

std::string TfIdfLogisticModel::describe() const
{
    return "tfidf-lr(vocab=" + std::to_string(vectorizer_.vocabulary_size())
           + ", iterations=" + std::to_string(iterations_) + ")";
}

std::unique_ptr<DetectorModel> TfIdfLogisticPort::fit(const DetectionDataset& train,
                                                      const DetectionDataset& valid) const
{
    if (train.empty()) {
        throw InvalidArgument("tfidf-lr: empty training set");
    }
    std::vector<text::TokenStream> docs;
    docs.reserve(train.size());
    for (const auto& item : train.items) {
        docs.push_back(text::tokenize(item.text, config_.tokenizer));
    }
    auto vectorizer = text::TfIdfModel::fit(docs, config_.tokenizer);

    std::vector<text::SparseVector> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        xs.push_back(vectorizer.vectorize(std::span<const std::string>(docs[i])));
        ys.push_back(train.items[i].label == ClassLabel::claim ? 1.0 : 0.0);
    }
    std::vector<text::SparseVector> vxs;
    std::vector<double> vys;
    for (const auto& item : valid.items) {
        vxs.push_back(vectorizer.vectorize(std::string_view(item.text)));
        vys.push_back(item.label == ClassLabel::claim ? 1.0 : 0.0);
    }

    const std::size_t dim = vectorizer.vocabulary_size();
    const double inv_n = 1.0 / static_cast<double>(xs.size());
    std::vector<double> w(dim, 0.0);
    double b = 0.0;
    std::vector<double> grad(dim);

    std::vector<double> best_w = w;
    double best_b = b;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_iter = 0;
    std::size_t stale_checks = 0;
    std::size_t iter = 0;

    for (; iter < config_.max_iterations; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double r = sigmoid(linear(xs[i], w, b)) - ys[i];
            for (const auto& e : xs[i]) {
                grad[e.index] += r * e.weight;
            }
            grad_b += r;
        }
        double max_grad = std::abs(grad_b * inv_n);
        for (std::size_t j = 0; j < dim; ++j) {
            grad[j] = grad[j] * inv_n + config_.l2 * w[j];
            max_grad = std::max(max_grad, std::abs(grad[j]));
        }
        if (max_grad < config_.tolerance) {
            break;
        }
        for (std::size_t j = 0; j < dim; ++j) {
            w[j] -= config_.learning_rate * grad[j];
        }
        b -= config_.learning_rate * grad_b * inv_n;

        if (!vxs.empty() && config_.check_every > 0 && (iter + 1) % config_.check_every == 0) {
            const double loss = log_loss(vxs, vys, w, b);
            if (loss < best_loss) {
                best_loss = loss;
                best_w = w;
                best_b = b;
                best_iter = iter + 1;
                stale_checks = 0;
            } else if (++stale_checks >= config_.patience) {
                w = best_w;
                b = best_b;
                iter = best_iter;
                break;
            }
        }
    }
    return std::make_unique<TfIdfLogisticModel>(std::move(vectorizer), std::move(w), b, iter);
}

// --- gateway-backed ------------------------------------------------------------

GatewayDetectorModel::GatewayDetectorModel(std::shared_ptr<const gateway::Client> client,
                                           gateway::RemoteModelRef ref)
    : client_(std::move(client)), ref_(std::move(ref))
{
    if (!client_) {
        throw InvalidArgument("gateway detector: null client");
    }
}

std::vector<double> GatewayDetectorModel::predict(std::span<const std::string> texts) const
{
    return client_->classify(ref_, texts);
}

void GatewayDetectorModel::save(std::ostream& out) const
{
    gateway::save_remote_ref(out, ref_);
}

std::string GatewayDetectorModel::describe() const
{
    return "gateway-classify(" + ref_.model_id + ")";
}

GatewayClassifierPort::GatewayClassifierPort(std::shared_ptr<const gateway::Client> client, json hyperparams)
    : client_(std::move(client)), hyperparams_(std::move(hyperparams))
{
    if (!client_) {
        throw InvalidArgument("gateway classifier: null client");
    }
}

std::unique_ptr<DetectorModel> GatewayClassifierPort::fit(const DetectionDataset& train,
                                                          const DetectionDataset& valid) const
{
    json dataset = json::array();
    auto add = [&](const DetectionDataset& d, const char* split) {
        for (const auto& item : d.items) {
            dataset.push_back({{"text", item.text},
                               {"label", item.label == ClassLabel::claim ? 1 : 0},
                               {"split", split}});
        }
    };
    add(train, "train");
    add(valid, "valid");
    auto ref = client_->train(gateway::Task::classify, dataset, hyperparams_);
    return std::make_unique<GatewayDetectorModel>(client_, std::move(ref));
}

std::unique_ptr<DetectorModel> load_detector(std::istream& in, std::shared_ptr<const gateway::Client> client)
{
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != 8) {
        throw FormatVersionError("detector file truncated");
    }
    in.seekg(-8, std::ios::cur);
    std::string_view m(magic.data(), magic.size());
    if (m == kLogisticMagic) {
        return TfIdfLogisticModel::load(in);
    }
    if (m == gateway::kRemoteMagic) {
        auto ref = gateway::load_remote_ref(in);
        if (ref.task != gateway::Task::classify) {
            throw FormatVersionError("remote model is not a classifier");
        }
        if (!client) {
            throw InvalidArgument("remote detector needs a gateway endpoint");
        }
        return std::make_unique<GatewayDetectorModel>(std::move(client), std::move(ref));
    }
    throw FormatVersionError("unrecognized detector file");
}

}  // namespace factmatch::detection
