#include "factmatch/evalharness.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <set>

#include "factmatch/error.hpp"

namespace factmatch::eval {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string_view to_string(retrieval::NegativeMode m)
{
    return m == retrieval::NegativeMode::per_positive ? "per_positive" : "per_tweet";
}

retrieval::NegativeMode parse_negative_mode(std::string_view s)
{
    if (s == "per_positive") {
        return retrieval::NegativeMode::per_positive;
    }
    if (s == "per_tweet") {
        return retrieval::NegativeMode::per_tweet;
    }
    throw InvalidArgument("unknown negative_mode '" + std::string(s) + "'");
}

ArmConfig parse_arm(const json& j)
{
    ArmConfig a;
    if (j.is_string()) {
        a.port = j.get<std::string>();
        a.name = a.port;
        return a;
    }
    if (!j.is_object()) {
        throw InvalidArgument("config: each port must be a name or an object");
    }
    a.port = j.at("port").get<std::string>();
    a.name = j.value("name", a.port);
    if (j.contains("hyperparams")) {
        a.hyperparams = j.at("hyperparams");
    }
    if (j.contains("oversample")) {
        a.oversample = j.at("oversample").get<bool>();
    }
    return a;
}

}  // namespace

void EvalConfig::validate() const
{
    if (n_folds < 2) {
        throw InvalidArgument("config: n_folds must be >= 2");
    }
    if (arms.empty()) {
        throw InvalidArgument("config: at least one port is required");
    }
    std::set<std::string> names;
    for (const auto& a : arms) {
        if (!names.insert(a.name).second) {
            throw InvalidArgument("config: duplicate arm name '" + a.name + "'");
        }
    }
    if (!baseline.empty() && names.count(baseline) == 0) {
        throw InvalidArgument("config: baseline '" + baseline + "' is not an arm");
    }
    if (task == TaskKind::retrieve) {
        if (k_grid.empty()) {
            throw InvalidArgument("config: k_grid is empty");
        }
        for (auto k : k_grid) {
            if (k == 0) {
                throw InvalidArgument("config: k_grid values must be >= 1");
            }
        }
        if (negatives_per_positive == 0) {
            throw InvalidArgument("config: negatives_per_positive must be >= 1");
        }
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw InvalidArgument("config: threshold must be in [0, 1]");
    }
}

std::size_t EvalConfig::baseline_index() const
{
    for (std::size_t i = 0; i < arms.size(); ++i) {
        if (arms[i].name == baseline) {
            return i;
        }
    }
    return 0;
}

EvalConfig EvalConfig::from_json(const json& j)
{
    if (!j.is_object()) {
        throw InvalidArgument("config: expected a JSON object");
    }
    const int version = j.value("version", kVersion);
    if (version != kVersion) {
        throw FormatVersionError("config version " + std::to_string(version) + " (expected "
                                 + std::to_string(kVersion) + ")");
    }
    EvalConfig c;
    try {
        if (j.contains("task")) {
            c.task = parse_task_kind(j.at("task").get<std::string>());
        }
        if (j.contains("mode")) {
            c.mode = parse_fold_mode(j.at("mode").get<std::string>());
        }
        c.n_folds = j.value("n_folds", c.n_folds);
        c.seed = j.value("seed", c.seed);
        c.oversample = j.value("oversample", c.oversample);
        c.negatives_per_positive = j.value("negatives_per_positive", c.negatives_per_positive);
        if (j.contains("negative_mode")) {
            c.negative_mode = parse_negative_mode(j.at("negative_mode").get<std::string>());
        }
        if (j.contains("k_grid")) {
            c.k_grid = j.at("k_grid").get<std::vector<std::size_t>>();
        }
        c.threshold = j.value("threshold", c.threshold);
        c.parallel_folds = j.value("parallel_folds", c.parallel_folds);
        c.baseline = j.value("baseline", c.baseline);
        if (j.contains("ports")) {
            for (const auto& p : j.at("ports")) {
                c.arms.push_back(parse_arm(p));
            }
        }
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    if (c.arms.empty()) {
        c.arms.push_back(parse_arm(json(c.task == TaskKind::detect ? "tfidf-lr" : "bm25")));
    }
    c.validate();
    return c;
}

ordered_json EvalConfig::to_json() const
{
    ordered_json j;
    j["version"] = kVersion;
    j["task"] = eval::to_string(task);
    j["mode"] = eval::to_string(mode);
    j["n_folds"] = n_folds;
    j["seed"] = seed;
    ordered_json ports = ordered_json::array();
    for (const auto& a : arms) {
        ordered_json p;
        p["name"] = a.name;
        p["port"] = a.port;
        p["hyperparams"] = ordered_json::parse(a.hyperparams.dump());
        p["oversample"] = a.oversample.value_or(oversample);
        ports.push_back(std::move(p));
    }
    j["ports"] = std::move(ports);
    j["baseline"] = arms.empty() ? baseline : arms[baseline_index()].name;
    j["oversample"] = oversample;
    j["negatives_per_positive"] = negatives_per_positive;
    j["negative_mode"] = to_string(negative_mode);
    j["k_grid"] = k_grid;
    j["threshold"] = threshold;
    return j;
}

EvalInputs EvalInputs::from_store(const AnnotationStore& store)
{
    auto built = detection::build_detection_dataset(store);
    auto relevant = store.relevant_claims();
    std::erase_if(relevant, [](const auto& kv) { return kv.second.empty(); });
    return EvalInputs{store, std::move(built.dataset), built.excluded, std::move(relevant)};
}

FoldPlan make_plan(const EvalInputs& inputs, const EvalConfig& config)
{
    if (config.mode == FoldMode::lco) {
        std::vector<std::string> claim_ids;
        for (const auto& c : inputs.store.claims()) {
            claim_ids.push_back(c.id);
        }
        std::vector<std::string> no_claim;
        for (const auto& item : inputs.dataset.items) {
            if (item.label == detection::ClassLabel::no_claim) {
                no_claim.push_back(item.tweet_id);
            }
        }
        return make_lco_folds(inputs.relevant, claim_ids, no_claim, config.n_folds, config.seed);
    }
    std::vector<std::string> ids;
    if (config.task == TaskKind::detect) {
        for (const auto& item : inputs.dataset.items) {
            ids.push_back(item.tweet_id);
        }
    } else {
        for (const auto& [tweet, rel] : inputs.relevant) {
            ids.push_back(tweet);
        }
    }
    return make_lto_folds(ids, config.n_folds, config.seed, inputs.relevant);
}

std::vector<std::string> metric_names(TaskKind task, const std::vector<std::size_t>& k_grid)
{
    if (task == TaskKind::detect) {
        return {"claim.precision",    "claim.recall",    "claim.f1",
                "no_claim.precision", "no_claim.recall", "no_claim.f1",
                "macro.precision",    "macro.recall",    "macro.f1",
                "accuracy"};
    }
    std::vector<std::string> names;
    for (auto k : k_grid) {
        names.push_back("hit_ratio@" + std::to_string(k));
    }
    for (auto k : k_grid) {
        names.push_back("recall@" + std::to_string(k));
    }
    return names;
}

const FoldMetrics& ArmResult::at(std::string_view metric) const
{
    for (const auto& m : metrics) {
        if (m.metric == metric) {
            return m;
        }
    }
    throw UnknownIdError("metric " + std::string(metric));
}

namespace {

using MetricRow = std::map<std::string, double>;

detection::DetectionDataset subset(const detection::DetectionDataset& all, const std::vector<std::string>& ids)
{
    std::map<std::string_view, const detection::DetectionItem*> by_id;
    for (const auto& item : all.items) {
        by_id.emplace(item.tweet_id, &item);
    }
    detection::DetectionDataset out;
    out.items.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it != by_id.end()) {
            out.items.push_back(*it->second);
        }
    }
    return out;
}

MetricRow run_detect_fold(const EvalInputs& inputs, const Fold& fold, const Arm& arm, const EvalConfig& config,
                          std::uint64_t seed)
{
    auto train = subset(inputs.dataset, fold.train);
    const auto valid = subset(inputs.dataset, fold.valid);
    const auto test = subset(inputs.dataset, fold.test);
    if (test.empty()) {
        throw InvalidArgument("empty test split");
    }
    if (arm.oversample) {
        train = detection::oversample_minority(train, seed);
    }
    auto model = detection::train_detector(*arm.classifier, train, valid);
    const auto m = detection::evaluate_detector(*model, test, config.threshold);
    const auto macro = m.macro();
    return {{"claim.precision", m.claim.precision},
            {"claim.recall", m.claim.recall},
            {"claim.f1", m.claim.f1},
            {"no_claim.precision", m.no_claim.precision},
            {"no_claim.recall", m.no_claim.recall},
            {"no_claim.f1", m.no_claim.f1},
            {"macro.precision", macro.precision},
            {"macro.recall", macro.recall},
            {"macro.f1", macro.f1},
            {"accuracy", m.accuracy}};
}

MetricRow run_retrieve_fold(const EvalInputs& inputs, const FoldPlan& plan, const Fold& fold, const Arm& arm,
                            const EvalConfig& config, std::uint64_t seed)
{
    const auto& claims = inputs.store.claims();
    std::set<std::string_view> held_out(fold.claims.begin(), fold.claims.end());
    std::vector<std::string> train_claims;
    for (const auto& c : claims) {
        if (held_out.count(c.id) == 0) {
            train_claims.push_back(c.id);
        }
    }

    std::vector<retrieval::PositivePair> positives;
    for (const auto& tweet : fold.train) {
        auto it = plan.relevant.find(tweet);
        if (it == plan.relevant.end()) {
            continue;
        }
        for (const auto& c : it->second) {
            positives.push_back({tweet, c});
        }
    }
    if (positives.empty()) {
        throw InvalidArgument("no positive training pairs");
    }
    const auto train = retrieval::sample_negatives(positives, train_claims, inputs.relevant,
                                                   config.negatives_per_positive, seed, config.negative_mode);
    const retrieval::FitContext ctx{claims, inputs.store.tweets()};
    auto model = arm.ranker->fit(train, ctx);

    std::vector<retrieval::ClaimRef> refs;
    refs.reserve(claims.size());
    for (const auto& c : claims) {
        refs.push_back({c.id, c.text});
    }
    retrieval::Rankings rankings;
    retrieval::RelevanceMap truth;
    for (const auto& tweet : fold.test) {
        auto it = plan.relevant.find(tweet);
        if (it == plan.relevant.end() || it->second.empty()) {
            continue;
        }
        rankings.emplace(tweet, retrieval::rank_claims(*model, inputs.store.tweets().at(tweet).text, refs));
        truth.emplace(tweet, it->second);
    }
    if (rankings.empty()) {
        throw InvalidArgument("no positive test tweets");
    }
    MetricRow row;
    for (auto k : config.k_grid) {
        row["hit_ratio@" + std::to_string(k)] = retrieval::hit_ratio_at_k(rankings, truth, k);
        row["recall@" + std::to_string(k)] = retrieval::recall_at_k(rankings, truth, k);
    }
    return row;
}

}  // namespace

ArmResult cross_validate(const EvalInputs& inputs, const FoldPlan& plan, const Arm& arm, const EvalConfig& config)
{
    if (config.task == TaskKind::detect && !arm.classifier) {
        throw InvalidArgument("arm " + arm.name + " has no detection port");
    }
    if (config.task == TaskKind::retrieve && !arm.ranker) {
        throw InvalidArgument("arm " + arm.name + " has no retrieval port");
    }
    const auto n = static_cast<std::ptrdiff_t>(plan.folds.size());
    std::vector<MetricRow> rows(plan.folds.size());
    std::vector<std::string> errors(plan.folds.size());
    std::vector<char> failed(plan.folds.size(), 0);

#pragma omp parallel for schedule(dynamic, 1) if (config.parallel_folds)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto f = static_cast<std::size_t>(i);
        try {
            const std::uint64_t seed = config.seed + f;
            rows[f] = config.task == TaskKind::detect
                          ? run_detect_fold(inputs, plan.folds[f], arm, config, seed)
                          : run_retrieve_fold(inputs, plan, plan.folds[f], arm, config, seed);
        } catch (const std::exception& e) {
            failed[f] = 1;
            errors[f] = e.what();
        }
    }
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        if (failed[f]) {
            throw StageError("fold", f, arm.name + ": " + errors[f]);
        }
    }

    ArmResult out;
    out.name = arm.name;
    out.port = arm.port;
    out.oversample = arm.oversample;
    for (const auto& name : metric_names(config.task, config.k_grid)) {
        FoldMetrics fm;
        fm.metric = name;
        for (const auto& row : rows) {
            fm.values.push_back(row.at(name));
        }
        fm.aggregate = mean_ci95(fm.values);
        out.metrics.push_back(std::move(fm));
    }
    return out;
}

std::vector<Comparison> compare_arms(const std::vector<ArmResult>& arms, std::size_t baseline_index)
{
    std::vector<Comparison> out;
    if (arms.size() < 2) {
        return out;
    }
    const auto& base = arms.at(baseline_index);
    for (std::size_t a = 0; a < arms.size(); ++a) {
        if (a == baseline_index) {
            continue;
        }
        for (const auto& m : arms[a].metrics) {
            const auto& b = base.at(m.metric);
            Comparison c;
            c.baseline = base.name;
            c.candidate = arms[a].name;
            c.metric = m.metric;
            c.baseline_stats = b.aggregate;
            c.candidate_stats = m.aggregate;
            c.test = paired_significance(m.values, b.values);
            c.significant = c.test.p_value < kSignificanceLevel;
            out.push_back(std::move(c));
        }
    }
    return out;
}

std::vector<Arm> make_arms(const EvalConfig& config, const PortContext& ctx)
{
    std::vector<Arm> arms;
    for (const auto& a : config.arms) {
        Arm arm;
        arm.name = a.name;
        arm.port = a.port;
        arm.oversample = a.oversample.value_or(config.oversample);
        if (config.task == TaskKind::detect) {
            arm.classifier = make_classifier_port(a.port, a.hyperparams, ctx);
        } else {
            arm.ranker = make_ranker_port(a.port, a.hyperparams, ctx);
        }
        arms.push_back(std::move(arm));
    }
    return arms;
}

EvalRun run_eval(const AnnotationStore& store, const EvalConfig& config, const PortContext& ctx)
{
    config.validate();
    const auto inputs = EvalInputs::from_store(store);
    const auto plan = make_plan(inputs, config);
    const auto arms = make_arms(config, ctx);

    EvalRun run;
    run.config = config;
    run.excluded_tweets = inputs.excluded;
    run.dropped_pairs = plan.dropped_pairs();
    for (const auto& f : plan.folds) {
        FoldSummary s;
        s.train = f.train.size();
        s.valid = f.valid.size();
        s.test = f.test.size();
        s.test_positive = static_cast<std::size_t>(std::count_if(f.test.begin(), f.test.end(), [&](const auto& t) {
            auto it = plan.relevant.find(t);
            return it != plan.relevant.end() && !it->second.empty();
        }));
        s.held_out_claims = f.claims.size();
        s.dropped_pairs = f.dropped_pairs;
        run.folds.push_back(s);
    }
    for (const auto& arm : arms) {
        run.arms.push_back(cross_validate(inputs, plan, arm, config));
    }
    run.comparisons = compare_arms(run.arms, config.baseline_index());
    return run;
}

}  // namespace factmatch::eval
