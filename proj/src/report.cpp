#include "factmatch/report.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <sstream>
#include <utility>
#include <vector>

#include "factmatch/error.hpp"

namespace factmatch::eval {

using nlohmann::ordered_json;

std::string format_cell(double mean, double half_width, bool best, bool significant)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f ± %.4f", mean, half_width);
    std::string cell = best ? "**" + std::string(buf) + "**" : std::string(buf);
    if (significant) {
        cell += "\\*";
    }
    return cell;
}

namespace {

ordered_json stats_json(const MeanCi& s)
{
    ordered_json j;
    j["mean"] = s.mean;
    j["ci95"] = s.half_width;
    j["sd"] = s.sd;
    return j;
}

struct Column {
    std::string metric;
    std::string header;
};

// Markdown table over arms; `doc` is the machine-readable report.
void table(std::ostringstream& md, const ordered_json& doc, const std::string& title,
           const std::vector<Column>& columns, bool with_oversample = false)
{
    const auto& arms = doc.at("arms");
    const std::string baseline = doc.at("config").at("baseline").get<std::string>();
    std::map<std::pair<std::string, std::string>, bool> significant;
    for (const auto& c : doc.at("comparisons")) {
        significant[{c.at("candidate").get<std::string>(), c.at("metric").get<std::string>()}] =
            c.at("significant").get<bool>();
    }

    md << "### " << title << "\n\n| Model |";
    if (with_oversample) {
        md << " Oversampling |";
    }
    for (const auto& c : columns) {
        md << ' ' << c.header << " |";
    }
    md << "\n|---|";
    if (with_oversample) {
        md << "---|";
    }
    for (std::size_t i = 0; i < columns.size(); ++i) {
        md << "---|";
    }
    md << '\n';

    std::map<std::string, double> best;
    for (const auto& c : columns) {
        double b = -1.0;
        for (const auto& a : arms) {
            b = std::max(b, a.at("metrics").at(c.metric).at("mean").get<double>());
        }
        best[c.metric] = b;
    }
    for (const auto& a : arms) {
        const auto name = a.at("name").get<std::string>();
        md << "| " << name << (name == baseline && arms.size() > 1 ? " (baseline)" : "") << " |";
        if (with_oversample) {
            md << (a.at("oversample").get<bool>() ? " yes" : " no") << " |";
        }
        for (const auto& c : columns) {
            const auto& m = a.at("metrics").at(c.metric);
            const double mean = m.at("mean").get<double>();
            const bool is_best = arms.size() > 1 && mean == best[c.metric];
            auto it = significant.find({name, c.metric});
            const bool star = it != significant.end() && it->second;
            md << ' ' << format_cell(mean, m.at("ci95").get<double>(), is_best, star) << " |";
        }
        md << '\n';
    }
    md << '\n';
}

}  // namespace

Report render_report(const EvalRun& run)
{
    ordered_json doc;
    doc["format"] = "factmatch-eval-report";
    doc["format_version"] = 1;
    doc["config"] = run.config.to_json();

    ordered_json methods;
    methods["interval"] = "student-t 95% over folds";
    methods["significance_test"] = "paired two-sided t-test over folds";
    methods["significance_level"] = kSignificanceLevel;
    methods["validation_fraction"] = kValidationFraction;
    methods["fold_seed"] = "seed + fold index";
    doc["methods"] = std::move(methods);

    ordered_json plan;
    plan["mode"] = to_string(run.config.mode);
    plan["n_folds"] = run.folds.size();
    plan["excluded_tweets"] = run.excluded_tweets;
    plan["dropped_pairs"] = run.dropped_pairs;
    ordered_json folds = ordered_json::array();
    for (std::size_t i = 0; i < run.folds.size(); ++i) {
        const auto& f = run.folds[i];
        ordered_json fj;
        fj["fold"] = i;
        fj["train"] = f.train;
        fj["valid"] = f.valid;
        fj["test"] = f.test;
        fj["test_positive"] = f.test_positive;
        fj["held_out_claims"] = f.held_out_claims;
        fj["dropped_pairs"] = f.dropped_pairs;
        folds.push_back(std::move(fj));
    }
    plan["folds"] = std::move(folds);
    doc["plan"] = std::move(plan);

    ordered_json arms = ordered_json::array();
    for (const auto& a : run.arms) {
        ordered_json aj;
        aj["name"] = a.name;
        aj["port"] = a.port;
        aj["oversample"] = a.oversample;
        ordered_json metrics;
        for (const auto& m : a.metrics) {
            ordered_json mj;
            mj["folds"] = m.values;
            mj["mean"] = m.aggregate.mean;
            mj["ci95"] = m.aggregate.half_width;
            mj["sd"] = m.aggregate.sd;
            metrics[m.metric] = std::move(mj);
        }
        aj["metrics"] = std::move(metrics);
        arms.push_back(std::move(aj));
    }
    doc["arms"] = std::move(arms);

    ordered_json comparisons = ordered_json::array();
    for (const auto& c : run.comparisons) {
        ordered_json cj;
        cj["baseline"] = c.baseline;
        cj["candidate"] = c.candidate;
        cj["metric"] = c.metric;
        cj["baseline_stats"] = stats_json(c.baseline_stats);
        cj["candidate_stats"] = stats_json(c.candidate_stats);
        cj["t_statistic"] = c.test.t_statistic;
        cj["p_value"] = c.test.p_value;
        cj["degenerate"] = c.test.degenerate;
        cj["significant"] = c.significant;
        comparisons.push_back(std::move(cj));
    }
    doc["comparisons"] = std::move(comparisons);

    Report r;
    r.markdown = render_markdown(doc);
    r.document = std::move(doc);
    return r;
}

std::string render_markdown(const ordered_json& doc)
{
    if (doc.value("format", std::string{}) != "factmatch-eval-report") {
        throw InvalidArgument("not an evaluation report document");
    }
    const auto& config = doc.at("config");
    const auto task = config.at("task").get<std::string>();
    std::string mode = config.at("mode").get<std::string>();
    std::transform(mode.begin(), mode.end(), mode.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    const auto& plan = doc.at("plan");

    std::ostringstream md;
    md << "## " << (task == "detect" ? "Claim detection" : "Claim retrieval") << " (" << mode << ", "
       << plan.at("n_folds").get<std::size_t>() << " folds, seed " << config.at("seed").get<std::uint64_t>()
       << ")\n\n";

    if (task == "detect") {
        table(md, doc, "Per-class results",
              {{"claim.precision", "Claim P"},
               {"claim.recall", "Claim R"},
               {"claim.f1", "Claim F1"},
               {"no_claim.precision", "No-claim P"},
               {"no_claim.recall", "No-claim R"},
               {"no_claim.f1", "No-claim F1"}});
        table(md, doc, "Aggregate (" + mode + ", macro)",
              {{"macro.precision", "Precision"},
               {"macro.recall", "Recall"},
               {"macro.f1", "F1"},
               {"accuracy", "Accuracy"}});
        table(md, doc, "Oversampling", {{"claim.f1", "Claim F1"}, {"macro.f1", "Macro F1"}}, true);
    } else {
        std::vector<Column> hr;
        std::vector<Column> rc;
        for (const auto& k : config.at("k_grid")) {
            const auto ks = std::to_string(k.get<std::size_t>());
            hr.push_back({"hit_ratio@" + ks, "k=" + ks});
            rc.push_back({"recall@" + ks, "k=" + ks});
        }
        table(md, doc, "HitRatio@k (" + mode + ")", hr);
        table(md, doc, "Recall@k (" + mode + ")", rc);
    }

    md << "### Folds\n\n| Fold | Train | Valid | Test | Test positives | Held-out claims | Dropped pairs |\n"
       << "|---|---|---|---|---|---|---|\n";
    for (const auto& f : plan.at("folds")) {
        md << "| " << f.at("fold").get<std::size_t>() << " | " << f.at("train").get<std::size_t>() << " | "
           << f.at("valid").get<std::size_t>() << " | " << f.at("test").get<std::size_t>() << " | "
           << f.at("test_positive").get<std::size_t>() << " | " << f.at("held_out_claims").get<std::size_t>()
           << " | " << f.at("dropped_pairs").get<std::size_t>() << " |\n";
    }
    md << "\nDropped cross-group pairs: " << plan.at("dropped_pairs").get<std::size_t>()
       << ". Tweets excluded for unlabeled pairs: " << plan.at("excluded_tweets").get<std::size_t>() << ".\n\n";
    md << "Mean ± 95% CI (Student t over folds). Bold marks the best mean per column; \\* marks p < "
       << doc.at("methods").at("significance_level").get<double>()
       << " against the baseline (paired two-sided t-test).\n";
    return md.str();
}

}  // namespace factmatch::eval
