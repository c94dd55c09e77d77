#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "factmatch/commands.hpp"
#include "factmatch/error.hpp"
#include "factmatch/log.hpp"
#include "factmatch/service.hpp"

namespace fm = factmatch;
namespace app = factmatch::app;
using nlohmann::json;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitMissingFile = 2;
constexpr int kExitPortFailure = 3;

json read_json_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw fm::MissingFileError(path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw fm::ParseError(path, 0, e.what());
    }
}

struct Globals {
    std::uint64_t seed = 42;
    bool seed_set = false;
    std::string config_path;
    std::string gateway_url;
    json config = json::object();

    void load()
    {
        if (!config_path.empty()) {
            config = read_json_file(config_path);
            if (!config.is_object()) {
                throw fm::InvalidArgument("config file must hold a JSON object");
            }
        }
    }

    std::shared_ptr<const fm::gateway::Client> client() const
    {
        if (!gateway_url.empty()) {
            fm::gateway::Endpoint e;
            if (config.contains("gateway")) {
                e = fm::gateway::Endpoint::from_json(config["gateway"]);
            }
            e.base_url = gateway_url;
            return std::make_shared<fm::gateway::Client>(e);
        }
        if (config.contains("gateway")) {
            return std::make_shared<fm::gateway::Client>(fm::gateway::Endpoint::from_json(config["gateway"]));
        }
        return nullptr;
    }

    fm::eval::PortContext ports() const
    {
        fm::eval::PortContext ctx;
        ctx.client = client();
        if (config.contains("encoder")) {
            ctx.encoder = app::make_encoder(app::EncoderConfig::from_json(config["encoder"]), ctx.client);
        }
        return ctx;
    }
};

struct DataFlags {
    std::string claims;
    std::string tweets;
    std::string pool;
    std::string annotations;

    void add(CLI::App* cmd, bool annotations_required)
    {
        cmd->add_option("--claims", claims, "claims file (JSON array)")->required();
        cmd->add_option("--tweets", tweets, "tweets file (JSON lines)")->required();
        cmd->add_option("--pool", pool, "candidate pool file");
        auto* a = cmd->add_option("--annotations", annotations, "annotations file or log");
        if (annotations_required) {
            a->required();
        }
    }

    app::DataPaths paths() const
    {
        app::DataPaths p{claims, tweets, std::nullopt, std::nullopt};
        if (!pool.empty()) {
            p.pool = pool;
        }
        if (!annotations.empty()) {
            p.annotations = annotations;
        }
        return p;
    }
};

void print_manifest(const app::CommandResult& r)
{
    std::cout << "run " << r.manifest.run_id << '\n';
    for (const auto& o : r.manifest.outputs) {
        std::cout << "  wrote " << o.path << '\n';
    }
    std::cout << "  manifest " << r.manifest_path.string() << '\n';
}

app::Service* g_service = nullptr;

void on_signal(int)
{
    if (g_service != nullptr) {
        g_service->stop();
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App cli{"factmatch: claim detection and retrieval pipeline"};
    cli.require_subcommand(1);
    Globals g;
    cli.add_option("--seed", g.seed, "random seed")->each([&](const std::string&) { g.seed_set = true; });
    cli.add_option("--config", g.config_path, "JSON config file");
    cli.add_option("--gateway", g.gateway_url, "model gateway base URL");

    // ingest
    auto* ingest = cli.add_subcommand("ingest", "validate and normalize claims and tweets");
    std::string ing_claims, ing_tweets, ing_out, ing_from, ing_to;
    std::vector<std::string> ing_langs, ing_kinds;
    ingest->add_option("--claims", ing_claims)->required();
    ingest->add_option("--tweets", ing_tweets)->required();
    ingest->add_option("--out-dir", ing_out)->required();
    ingest->add_option("--from", ing_from, "first day, YYYY-MM-DD");
    ingest->add_option("--to", ing_to, "last day, YYYY-MM-DD");
    ingest->add_option("--lang", ing_langs, "language codes to keep");
    ingest->add_option("--kind", ing_kinds, "tweet kinds to keep (original, reply, quote)");

    // candidates
    auto* cand = cli.add_subcommand("candidates", "build the top-k annotation pool");
    app::CandidatesOptions cand_opts;
    std::string cand_claims, cand_tweets, cand_out;
    cand->add_option("--claims", cand_claims)->required();
    cand->add_option("--tweets", cand_tweets)->required();
    cand->add_option("--out", cand_out)->required();
    cand->add_option("-k", cand_opts.k, "tweets kept per claim")->capture_default_str();
    cand->add_option("--encoder", cand_opts.encoder.kind, "hash or gateway")->capture_default_str();
    cand->add_option("--dim", cand_opts.encoder.dim, "hash encoder dimension")->capture_default_str();

    // annotate
    auto* annotate = cli.add_subcommand("annotate", "annotation service and export");
    annotate->require_subcommand(1);
    auto* serve = annotate->add_subcommand("serve", "serve the annotation and prediction API");
    DataFlags serve_data;
    serve_data.add(serve, false);
    std::string host = "127.0.0.1", console_dir, detector_path, ranker_path;
    int port = 8080;
    long lease_ttl = 600;
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--lease-ttl", lease_ttl, "lease time-to-live in seconds")->capture_default_str();
    serve->add_option("--console", console_dir, "static console bundle to mount at /console");
    serve->add_option("--detector", detector_path, "detector model for /predict");
    serve->add_option("--ranker", ranker_path, "ranker model for /predict");
    auto* exp = annotate->add_subcommand("export", "write the annotation store as JSON lines");
    DataFlags exp_data;
    exp_data.add(exp, false);
    std::string exp_out;
    exp->add_option("--out", exp_out)->required();

    // train
    auto* train = cli.add_subcommand("train", "fit one detector or ranker on all labeled data");
    DataFlags train_data;
    train_data.add(train, true);
    std::string train_task = "detect", train_port, train_out, train_hp;
    bool no_oversample = false;
    std::size_t negatives = 10;
    train->add_option("--task", train_task, "detect or retrieve")->capture_default_str();
    train->add_option("--port", train_port, "model port name")->required();
    train->add_option("--out", train_out, "model file")->required();
    train->add_option("--hyperparams", train_hp, "JSON object forwarded to the port");
    train->add_flag("--no-oversample", no_oversample);
    train->add_option("--negatives", negatives, "negatives per positive pair")->capture_default_str();

    // eval
    auto* ev = cli.add_subcommand("eval", "cross-validated evaluation");
    DataFlags eval_data;
    eval_data.add(ev, true);
    std::string eval_task, eval_mode, eval_out;
    std::vector<std::string> eval_ports;
    ev->add_option("--task", eval_task, "detect or retrieve (overrides config)");
    ev->add_option("--mode", eval_mode, "lto or lco (overrides config)");
    ev->add_option("--port", eval_ports, "arms to run (overrides config)");
    ev->add_option("--out-dir", eval_out)->required();

    // predict
    auto* pred = cli.add_subcommand("predict", "run the detection-retrieval cascade");
    app::PredictOptions pred_opts;
    std::string pred_claims, pred_tweets, pred_det, pred_rank, pred_out;
    pred->add_option("--claims", pred_claims)->required();
    pred->add_option("--tweets", pred_tweets)->required();
    pred->add_option("--detector", pred_det)->required();
    pred->add_option("--ranker", pred_rank)->required();
    pred->add_option("--out-dir", pred_out)->required();
    pred->add_option("--top-n", pred_opts.top_n)->capture_default_str();
    pred->add_option("--threshold", pred_opts.threshold)->capture_default_str();

    // audit-sample
    auto* audit = cli.add_subcommand("audit-sample", "draw a manual audit worksheet from predictions");
    app::AuditOptions audit_opts;
    std::string audit_pred, audit_out, audit_tweets;
    audit->add_option("--predictions", audit_pred)->required();
    audit->add_option("--out", audit_out, "CSV worksheet")->required();
    audit->add_option("-n,--per-class", audit_opts.n_per_class)->capture_default_str();
    audit->add_option("--tweets", audit_tweets, "tweets file for worksheet text");

    // report
    auto* rep = cli.add_subcommand("report", "render markdown tables from a saved report");
    std::string rep_in, rep_out;
    rep->add_option("--report", rep_in, "report.json")->required();
    rep->add_option("--out", rep_out, "markdown output (stdout when omitted)");

    CLI11_PARSE(cli, argc, argv);

    try {
        g.load();
        if (!g.seed_set) {
            g.seed = g.config.value("seed", g.seed);
        }

        if (ingest->parsed()) {
            app::IngestOptions o{ing_claims, ing_tweets, ing_out, std::nullopt};
            if (!ing_from.empty() || !ing_to.empty() || !ing_langs.empty() || !ing_kinds.empty()) {
                auto start = fm::parse_date(ing_from.empty() ? "1970-01-01" : ing_from);
                auto end = fm::parse_date(ing_to.empty() ? "9999-12-31" : ing_to);
                if (!start || !end) {
                    throw fm::InvalidArgument("dates must be YYYY-MM-DD");
                }
                std::set<std::string> langs(ing_langs.begin(), ing_langs.end());
                if (langs.empty()) {
                    throw fm::InvalidArgument("--lang is required when filtering");
                }
                std::set<fm::TweetKind> kinds;
                for (const auto& k : ing_kinds) {
                    auto kind = fm::parse_tweet_kind(k);
                    if (!kind) {
                        throw fm::InvalidArgument("unknown tweet kind '" + k + "'");
                    }
                    kinds.insert(*kind);
                }
                if (kinds.empty()) {
                    kinds = {fm::TweetKind::original, fm::TweetKind::reply, fm::TweetKind::quote};
                }
                o.filter = fm::IngestFilter::make(*start, *end, langs, kinds);
            }
            print_manifest(app::cmd_ingest(o));
        } else if (cand->parsed()) {
            cand_opts.claims = cand_claims;
            cand_opts.tweets = cand_tweets;
            cand_opts.out = cand_out;
            cand_opts.client = g.client();
            print_manifest(app::cmd_candidates(cand_opts));
        } else if (serve->parsed()) {
            auto paths = serve_data.paths();
            if (!paths.pool) {
                throw fm::InvalidArgument("annotate serve needs --pool");
            }
            std::ifstream pin(*paths.pool, std::ios::binary);
            if (!pin) {
                throw fm::MissingFileError(paths.pool->string());
            }
            const auto pool = fm::candidates::PairPool::import_jsonl(pin, paths.pool->string());
            app::ServiceConfig sc;
            sc.lease_ttl = std::chrono::seconds(lease_ttl);
            sc.annotations_log = paths.annotations;
            if (!console_dir.empty()) {
                sc.console_dir = console_dir;
            }
            // The log is replayed into the store, then appended to by the service.
            app::DataPaths load = paths;
            load.pool.reset();
            if (load.annotations && !std::filesystem::exists(*load.annotations)) {
                load.annotations.reset();
            }
            auto store = app::load_store(load);
            app::Service service(store, pool, sc);
            if (!detector_path.empty() && !ranker_path.empty()) {
                auto ctx = g.ports();
                std::ifstream din(detector_path, std::ios::binary);
                std::ifstream rin(ranker_path, std::ios::binary);
                if (!din) {
                    throw fm::MissingFileError(detector_path);
                }
                if (!rin) {
                    throw fm::MissingFileError(ranker_path);
                }
                service.set_models(fm::detection::load_detector(din, ctx.client),
                                   fm::retrieval::load_ranker(rin, ctx.client, ctx.encoder));
            }
            const int bound = service.start(host, port);
            std::cout << "listening on " << host << ':' << bound << std::endl;
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            service.wait();
            g_service = nullptr;
        } else if (exp->parsed()) {
            print_manifest(app::cmd_annotate_export({exp_data.paths(), exp_out}));
        } else if (train->parsed()) {
            app::TrainOptions o;
            o.task = fm::eval::parse_task_kind(train_task);
            o.port = train_port;
            if (!train_hp.empty()) {
                o.hyperparams = json::parse(train_hp);
            }
            o.data = train_data.paths();
            o.out = train_out;
            o.seed = g.seed;
            o.oversample = !no_oversample;
            o.negatives_per_positive = negatives;
            o.ports = g.ports();
            print_manifest(app::cmd_train(o));
        } else if (ev->parsed()) {
            json cfg = g.config.contains("eval") ? g.config["eval"] : g.config;
            cfg.erase("gateway");
            cfg.erase("encoder");
            if (!eval_task.empty()) {
                cfg["task"] = eval_task;
            }
            if (!eval_mode.empty()) {
                cfg["mode"] = eval_mode;
            }
            if (!eval_ports.empty()) {
                cfg["ports"] = eval_ports;
            }
            cfg["seed"] = g.seed;
            app::EvalOptions o{eval_data.paths(), fm::eval::EvalConfig::from_json(cfg), eval_out, g.ports()};
            const auto r = app::cmd_eval(o);
            print_manifest(r);
        } else if (pred->parsed()) {
            pred_opts.claims = pred_claims;
            pred_opts.tweets = pred_tweets;
            pred_opts.detector = pred_det;
            pred_opts.ranker = pred_rank;
            pred_opts.out_dir = pred_out;
            pred_opts.ports = g.ports();
            print_manifest(app::cmd_predict(pred_opts));
        } else if (audit->parsed()) {
            audit_opts.predictions = audit_pred;
            audit_opts.out = audit_out;
            audit_opts.seed = g.seed;
            if (!audit_tweets.empty()) {
                audit_opts.tweets = audit_tweets;
            }
            const auto r = app::cmd_audit_sample(audit_opts);
            print_manifest(r);
            std::cout << "  rows: " << r.positives << " claim, " << r.negatives << " no_claim\n";
        } else if (rep->parsed()) {
            app::ReportOptions o{rep_in, std::nullopt};
            if (!rep_out.empty()) {
                o.out = rep_out;
            }
            const auto md = app::cmd_report(o);
            if (!o.out) {
                std::cout << md;
            }
        }
    } catch (const fm::MissingFileError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitMissingFile;
    } catch (const fm::StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPortFailure;
    } catch (const fm::TransportError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPortFailure;
    } catch (const fm::ProtocolError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPortFailure;
    } catch (const fm::ServerError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPortFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitOther;
    }
    return 0;
}
