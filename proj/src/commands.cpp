#include "factmatch/commands.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "factmatch/detection.hpp"
#include "factmatch/error.hpp"
#include "factmatch/log.hpp"
#include "factmatch/report.hpp"
#include "factmatch/rng.hpp"

namespace factmatch::app {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::ifstream open_in(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw MissingFileError(p.string());
    }
    return in;
}

std::ofstream open_out(const fs::path& p)
{
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + p.string());
    }
    return out;
}

RunManifest start(std::string command)
{
    RunManifest m;
    m.started_at = system_now();
    m.run_id = new_run_id(m.started_at);
    m.command = std::move(command);
    return m;
}

fs::path finish(RunManifest& m, const fs::path& path)
{
    m.finished_at = system_now();
    m.write(path);
    return path;
}

fs::path manifest_beside(const fs::path& output, const RunManifest& m)
{
    const auto dir = output.has_parent_path() ? output.parent_path() : fs::path(".");
    return dir / (m.command + "-" + m.run_id + ".manifest.json");
}

ordered_json data_json(const DataPaths& p)
{
    ordered_json j;
    j["claims"] = p.claims.string();
    j["tweets"] = p.tweets.string();
    j["pool"] = p.pool ? json(p.pool->string()) : json(nullptr);
    j["annotations"] = p.annotations ? json(p.annotations->string()) : json(nullptr);
    return j;
}

ordered_json to_ordered(const json& j)
{
    return ordered_json::parse(j.dump());
}

}  // namespace

std::shared_ptr<AnnotationStore> load_store(const DataPaths& paths, Clock clock)
{
    auto claims = std::make_shared<const ClaimSet>(load_claims(paths.claims));
    auto tweets = std::make_shared<const TweetSet>(load_tweets(paths.tweets));
    auto store = std::make_shared<AnnotationStore>(claims, tweets, std::move(clock));
    if (paths.pool) {
        auto in = open_in(*paths.pool);
        const auto pool = candidates::PairPool::import_jsonl(in, paths.pool->string());
        for (const auto& e : pool.entries()) {
            store->add_candidate(e.tweet_id, e.claim_id);
        }
    }
    if (paths.annotations) {
        auto in = open_in(*paths.annotations);
        store->import_jsonl(in, paths.annotations->string());
    }
    return store;
}

void add_inputs(RunManifest& m, const DataPaths& paths)
{
    m.add_input(paths.claims);
    m.add_input(paths.tweets);
    if (paths.pool) {
        m.add_input(*paths.pool);
    }
    if (paths.annotations) {
        m.add_input(*paths.annotations);
    }
}

CommandResult cmd_ingest(const IngestOptions& opts)
{
    auto m = start("ingest");
    const auto claims = load_claims(opts.claims);
    const auto tweets = opts.filter ? load_tweets(opts.tweets, *opts.filter) : load_tweets(opts.tweets);
    m.add_input(opts.claims);
    m.add_input(opts.tweets);
    if (opts.filter) {
        ordered_json f;
        f["start"] = format_date(opts.filter->start);
        f["end"] = format_date(opts.filter->end);
        f["languages"] = opts.filter->languages;
        std::vector<std::string> kinds;
        for (auto k : opts.filter->kinds) {
            kinds.emplace_back(to_string(k));
        }
        f["kinds"] = kinds;
        m.config["filter"] = std::move(f);
    }
    const auto claims_out = opts.out_dir / "claims.json";
    const auto tweets_out = opts.out_dir / "tweets.jsonl";
    {
        auto out = open_out(claims_out);
        write_claims(out, claims);
    }
    {
        auto out = open_out(tweets_out);
        write_tweets(out, tweets);
    }
    m.add_output(claims_out);
    m.add_output(tweets_out);
    m.counts["claims"] = claims.size();
    m.counts["tweets"] = tweets.size();
    CommandResult r;
    r.manifest_path = finish(m, opts.out_dir / ("ingest-" + m.run_id + ".manifest.json"));
    r.manifest = std::move(m);
    return r;
}

EncoderConfig EncoderConfig::from_json(const json& j)
{
    EncoderConfig c;
    if (j.is_null()) {
        return c;
    }
    c.kind = j.value("kind", c.kind);
    c.dim = j.value("dim", c.dim);
    if (c.kind != "hash" && c.kind != "gateway") {
        throw InvalidArgument("encoder kind must be hash or gateway, got '" + c.kind + "'");
    }
    return c;
}

json EncoderConfig::to_json() const
{
    return {{"kind", kind}, {"dim", dim}};
}

std::shared_ptr<const candidates::EncoderPort> make_encoder(const EncoderConfig& config,
                                                            std::shared_ptr<const gateway::Client> client)
{
    if (config.kind == "gateway") {
        if (!client) {
            throw InvalidArgument("gateway encoder needs a gateway endpoint");
        }
        return std::make_shared<candidates::GatewayEncoder>(std::move(client));
    }
    return std::make_shared<candidates::HashEncoder>(config.dim);
}

CommandResult cmd_candidates(const CandidatesOptions& opts)
{
    auto m = start("candidates");
    const auto claims = load_claims(opts.claims);
    const auto tweets = load_tweets(opts.tweets);
    m.add_input(opts.claims);
    m.add_input(opts.tweets);
    m.config["k"] = opts.k;
    m.config["encoder"] = to_ordered(opts.encoder.to_json());

    const auto encoder = make_encoder(opts.encoder, opts.client);
    const auto pool = candidates::build_pair_pool(claims, tweets, *encoder, opts.k);
    {
        auto out = open_out(opts.out);
        pool.export_jsonl(out);
    }
    m.add_output(opts.out);
    m.counts["claims"] = claims.size();
    m.counts["tweets"] = tweets.size();
    m.counts["pairs"] = pool.size();
    m.counts["distinct_tweets"] = pool.distinct_tweets();
    CommandResult r;
    r.manifest_path = finish(m, manifest_beside(opts.out, m));
    r.manifest = std::move(m);
    return r;
}

CommandResult cmd_annotate_export(const ExportOptions& opts)
{
    auto m = start("annotate-export");
    const auto store = load_store(opts.data);
    add_inputs(m, opts.data);
    m.config["data"] = data_json(opts.data);
    {
        auto out = open_out(opts.out);
        store->export_jsonl(out);
    }
    m.add_output(opts.out);
    const auto stats = corpus_stats(*store);
    m.counts["pairs"] = store->size();
    m.counts["relevant"] = stats.pairs_relevant;
    m.counts["not_relevant"] = stats.pairs_not_relevant;
    m.counts["unlabeled"] = stats.pairs_unlabeled;
    CommandResult r;
    r.manifest_path = finish(m, manifest_beside(opts.out, m));
    r.manifest = std::move(m);
    return r;
}

CommandResult cmd_train(const TrainOptions& opts)
{
    auto m = start("train");
    const auto store = load_store(opts.data);
    add_inputs(m, opts.data);
    m.config["task"] = eval::to_string(opts.task);
    m.config["port"] = opts.port;
    m.config["hyperparams"] = to_ordered(opts.hyperparams);
    m.config["seed"] = opts.seed;
    m.config["data"] = data_json(opts.data);

    if (opts.task == eval::TaskKind::detect) {
        auto port = eval::make_classifier_port(opts.port, opts.hyperparams, opts.ports);
        auto dataset = detection::build_detection_dataset(*store).dataset;
        auto rng = make_rng(opts.seed);
        shuffle_in_place(std::span<detection::DetectionItem>(dataset.items), rng);
        const auto n_valid = static_cast<std::size_t>(static_cast<double>(dataset.size()) * eval::kValidationFraction);
        detection::DetectionDataset valid;
        detection::DetectionDataset train;
        valid.items.assign(dataset.items.begin(), dataset.items.begin() + static_cast<std::ptrdiff_t>(n_valid));
        train.items.assign(dataset.items.begin() + static_cast<std::ptrdiff_t>(n_valid), dataset.items.end());
        if (opts.oversample) {
            train = detection::oversample_minority(train, opts.seed);
        }
        m.config["oversample"] = opts.oversample;
        m.counts["train"] = train.size();
        m.counts["valid"] = valid.size();
        auto model = detection::train_detector(*port, train, valid);
        auto out = open_out(opts.out);
        model->save(out);
    } else {
        auto port = eval::make_ranker_port(opts.port, opts.hyperparams, opts.ports);
        auto relevant = store->relevant_claims();
        std::vector<retrieval::PositivePair> positives;
        for (const auto& [tweet, rel] : relevant) {
            for (const auto& c : rel) {
                positives.push_back({tweet, c});
            }
        }
        std::vector<std::string> claim_ids;
        for (const auto& c : store->claims()) {
            claim_ids.push_back(c.id);
        }
        const auto train = retrieval::sample_negatives(positives, claim_ids, relevant, opts.negatives_per_positive,
                                                       opts.seed, opts.negative_mode);
        m.config["negatives_per_positive"] = opts.negatives_per_positive;
        m.counts["pairs"] = train.size();
        m.counts["positives"] = positives.size();
        auto model = port->fit(train, retrieval::FitContext{store->claims(), store->tweets()});
        auto out = open_out(opts.out);
        model->save(out);
    }
    m.add_output(opts.out);
    CommandResult r;
    r.manifest_path = finish(m, manifest_beside(opts.out, m));
    r.manifest = std::move(m);
    return r;
}

EvalResult cmd_eval(const EvalOptions& opts)
{
    auto m = start("eval");
    const auto store = load_store(opts.data);
    add_inputs(m, opts.data);
    m.config["eval"] = opts.config.to_json();
    m.config["data"] = data_json(opts.data);

    const auto run = eval::run_eval(*store, opts.config, opts.ports);
    const auto report = eval::render_report(run);

    EvalResult r;
    const auto dir = opts.out_dir / m.run_id;
    r.report_json = dir / "report.json";
    r.report_markdown = dir / "report.md";
    {
        auto out = open_out(r.report_json);
        out << report.document.dump(2) << '\n';
    }
    {
        auto out = open_out(r.report_markdown);
        out << report.markdown;
    }
    m.add_output(r.report_json);
    m.add_output(r.report_markdown);
    m.counts["folds"] = run.folds.size();
    m.counts["arms"] = run.arms.size();
    m.counts["dropped_pairs"] = run.dropped_pairs;
    r.manifest_path = finish(m, dir / "manifest.json");
    r.manifest = std::move(m);
    return r;
}

PredictResult cmd_predict(const PredictOptions& opts)
{
    auto m = start("predict");
    const auto claims = load_claims(opts.claims);
    const auto tweets = load_tweets(opts.tweets);
    std::unique_ptr<detection::DetectorModel> detector;
    std::unique_ptr<retrieval::RankerModel> ranker;
    {
        auto in = open_in(opts.detector);
        detector = detection::load_detector(in, opts.ports.client);
    }
    {
        auto in = open_in(opts.ranker);
        ranker = retrieval::load_ranker(in, opts.ports.client, opts.ports.encoder);
    }
    for (const auto& p : {opts.claims, opts.tweets, opts.detector, opts.ranker}) {
        m.add_input(p);
    }
    m.config["top_n"] = opts.top_n;
    m.config["threshold"] = opts.threshold;
    m.config["detector"] = detector->describe();
    m.config["ranker"] = ranker->describe();

    PredictResult r;
    const auto dir = opts.out_dir / m.run_id;
    r.predictions = dir / "predictions.jsonl";
    std::size_t gated_in = 0;
    {
        auto out = open_out(r.predictions);
        for (const auto& t : tweets) {
            const auto rec = retrieval::run_pipeline(*detector, *ranker, t.id, t.text, claims, opts.top_n,
                                                     opts.threshold);
            gated_in += rec.gate == detection::ClassLabel::claim ? 1 : 0;
            out << rec.to_json().dump() << '\n';
        }
    }
    m.add_output(r.predictions);
    m.counts["tweets"] = tweets.size();
    m.counts["claim"] = gated_in;
    m.counts["no_claim"] = tweets.size() - gated_in;
    r.manifest_path = finish(m, dir / "manifest.json");
    r.manifest = std::move(m);
    return r;
}

std::string csv_field(std::string_view s)
{
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

AuditResult cmd_audit_sample(const AuditOptions& opts)
{
    auto m = start("audit-sample");
    std::vector<retrieval::PipelineRecord> records;
    {
        auto in = open_in(opts.predictions);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            try {
                records.push_back(retrieval::PipelineRecord::from_json(json::parse(line)));
            } catch (const std::exception& e) {
                throw ParseError(opts.predictions.string(), lineno, e.what());
            }
        }
    }
    m.add_input(opts.predictions);
    std::optional<TweetSet> tweets;
    if (opts.tweets) {
        tweets = load_tweets(*opts.tweets);
        m.add_input(*opts.tweets);
    }
    m.config["n_per_class"] = opts.n_per_class;
    m.config["seed"] = opts.seed;

    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < records.size(); ++i) {
        (records[i].gate == detection::ClassLabel::claim ? pos : neg).push_back(i);
    }
    auto rng = make_rng(opts.seed);
    auto draw = [&](std::vector<std::size_t>& from, std::string_view cls) {
        if (from.size() < opts.n_per_class) {
            log_warning("audit-sample: only " + std::to_string(from.size()) + " predicted " + std::string(cls)
                        + " tweets, taking all of them");
        }
        const std::size_t take = std::min(opts.n_per_class, from.size());
        for (std::size_t i = 0; i < take; ++i) {
            std::swap(from[i], from[i + uniform_index(rng, from.size() - i)]);
        }
        from.resize(take);
        std::sort(from.begin(), from.end());
    };
    draw(pos, "claim");
    draw(neg, "no_claim");

    {
        auto out = open_out(opts.out);
        out << "sample_class,tweet_id,gate_probability,top_claims,tweet_text,verdict,notes\n";
        auto emit = [&](const std::vector<std::size_t>& rows) {
            for (auto i : rows) {
                const auto& r = records[i];
                std::string claims;
                for (const auto& res : r.results) {
                    claims += (claims.empty() ? "" : ";") + res.claim_id;
                }
                std::string text;
                if (tweets) {
                    if (const auto* t = tweets->find(r.tweet_id)) {
                        text = t->text;
                    }
                }
                char prob[32];
                std::snprintf(prob, sizeof prob, "%.6f", r.gate_probability);
                out << detection::to_string(r.gate) << ',' << csv_field(r.tweet_id) << ',' << prob << ','
                    << csv_field(claims) << ',' << csv_field(text) << ",,\n";
            }
        };
        emit(pos);
        emit(neg);
    }
    m.add_output(opts.out);
    m.counts["claim"] = pos.size();
    m.counts["no_claim"] = neg.size();
    AuditResult r;
    r.positives = pos.size();
    r.negatives = neg.size();
    r.manifest_path = finish(m, manifest_beside(opts.out, m));
    r.manifest = std::move(m);
    return r;
}

std::string cmd_report(const ReportOptions& opts)
{
    auto in = open_in(opts.report_json);
    std::stringstream ss;
    ss << in.rdbuf();
    ordered_json doc;
    try {
        doc = ordered_json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ParseError(opts.report_json.string(), 0, e.what());
    }
    auto md = eval::render_markdown(doc);
    if (opts.out) {
        auto m = start("report");
        m.add_input(opts.report_json);
        {
            auto out = open_out(*opts.out);
            out << md;
        }
        m.add_output(*opts.out);
        finish(m, manifest_beside(*opts.out, m));
    }
    return md;
}

}  // namespace factmatch::app
