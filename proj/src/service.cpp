#include "factmatch/service.hpp"

#include <algorithm>
#include <condition_variable>
#include <set>
#include <shared_mutex>
#include <thread>

#include <httplib.h>

#include "factmatch/error.hpp"

namespace factmatch::app {

using nlohmann::json;

AnnotationQueue::AnnotationQueue(std::shared_ptr<AnnotationStore> store, const candidates::PairPool& pool,
                                 std::chrono::seconds lease_ttl, Clock clock,
                                 std::optional<std::filesystem::path> log_path)
    : store_(std::move(store)), order_(pool.entries()), ttl_(lease_ttl), clock_(std::move(clock))
{
    if (!store_) {
        throw InvalidArgument("annotation queue: null store");
    }
    if (lease_ttl.count() <= 0) {
        throw InvalidArgument("annotation queue: lease TTL must be positive");
    }
    for (const auto& e : order_) {
        store_->add_candidate(e.tweet_id, e.claim_id);
    }
    std::sort(order_.begin(), order_.end(), [](const auto& a, const auto& b) {
        return std::tie(a.rank, a.claim_id, a.tweet_id) < std::tie(b.rank, b.claim_id, b.tweet_id);
    });
    if (log_path) {
        if (log_path->has_parent_path()) {
            std::filesystem::create_directories(log_path->parent_path());
        }
        log_.emplace(*log_path, std::ios::binary | std::ios::app);
        if (!*log_) {
            throw Error("cannot open annotations log " + log_path->string());
        }
    }
}

std::optional<Lease> AnnotationQueue::next(std::string_view annotator)
{
    std::lock_guard lock(mutex_);
    const auto now = clock_();
    std::erase_if(leases_, [&](const auto& kv) { return !live(kv.second, now); });

    for (const auto& [key, lease] : leases_) {
        if (lease.annotator == annotator) {
            auto p = store_->find(key.first, key.second);
            if (p && !is_terminal(p->label)) {
                return lease;
            }
        }
    }
    for (const auto& e : order_) {
        Key key{e.tweet_id, e.claim_id};
        if (leases_.count(key) != 0) {
            continue;
        }
        auto p = store_->find(e.tweet_id, e.claim_id);
        if (p && is_terminal(p->label)) {
            continue;
        }
        Lease l{e, std::string(annotator), now + ttl_};
        leases_.emplace(std::move(key), l);
        return l;
    }
    return std::nullopt;
}

LabelOutcome AnnotationQueue::label(std::string_view tweet_id, std::string_view claim_id, Label label,
                                    std::string_view annotator, bool relabel)
{
    if (!is_terminal(label)) {
        return {LabelStatus::bad_request, "label must be relevant or not_relevant", std::nullopt};
    }
    if (annotator.empty()) {
        return {LabelStatus::bad_request, "annotator is required", std::nullopt};
    }
    std::lock_guard lock(mutex_);
    const auto current = store_->find(tweet_id, claim_id);
    if (!current) {
        return {LabelStatus::not_found,
                "unknown pair " + std::string(tweet_id) + "/" + std::string(claim_id), std::nullopt};
    }
    if (is_terminal(current->label) && !relabel) {
        return {LabelStatus::conflict, "pair already labeled", current};
    }
    const Key key{std::string(tweet_id), std::string(claim_id)};
    if (auto it = leases_.find(key); it != leases_.end()) {
        if (live(it->second, clock_()) && it->second.annotator != annotator) {
            return {LabelStatus::conflict, "pair is leased to another annotator", current};
        }
    }
    store_->record_annotation(tweet_id, claim_id, label, annotator);
    leases_.erase(key);
    auto updated = store_->find(tweet_id, claim_id);
    if (log_) {
        *log_ << AnnotationStore::to_json_line(*updated) << '\n';
        log_->flush();
    }
    return {LabelStatus::ok, "", updated};
}

json AnnotationQueue::progress() const
{
    std::lock_guard lock(mutex_);
    const auto now = clock_();
    std::size_t labeled = 0;
    std::map<std::string, std::size_t> per_annotator;
    std::map<std::string, bool> claim_complete;
    for (const auto& e : order_) {
        auto p = store_->find(e.tweet_id, e.claim_id);
        const bool done = p && is_terminal(p->label);
        auto [it, inserted] = claim_complete.try_emplace(e.claim_id, true);
        it->second = it->second && done;
        if (done) {
            ++labeled;
            ++per_annotator[p->annotator];
        }
    }
    std::size_t complete = 0;
    for (const auto& [c, ok] : claim_complete) {
        complete += ok ? 1 : 0;
    }
    std::size_t active = 0;
    for (const auto& [k, l] : leases_) {
        active += live(l, now) ? 1 : 0;
    }
    json annotators = json::object();
    for (const auto& [name, n] : per_annotator) {
        annotators[name] = n;
    }
    return {{"labeled", labeled},
            {"total", order_.size()},
            {"annotators", std::move(annotators)},
            {"claims_complete", complete},
            {"claims_total", claim_complete.size()},
            {"active_leases", active}};
}

// --- HTTP -----------------------------------------------------------------------

struct Service::Impl {
    std::shared_ptr<AnnotationStore> store;
    ServiceConfig config;
    AnnotationQueue queue;
    httplib::Server server;
    std::thread thread;

    mutable std::shared_mutex models_mutex;
    std::shared_ptr<const detection::DetectorModel> detector;
    std::shared_ptr<const retrieval::RankerModel> ranker;

    Impl(std::shared_ptr<AnnotationStore> s, const candidates::PairPool& pool, ServiceConfig c)
        : store(s), config(std::move(c)), queue(s, pool, config.lease_ttl, config.clock, config.annotations_log)
    {
        routes();
    }

    static void error(httplib::Response& res, int status, std::string_view code, std::string_view message)
    {
        res.status = status;
        res.set_content(json{{"code", code}, {"message", message}}.dump(), "application/json");
    }

    static void ok(httplib::Response& res, const json& body)
    {
        res.status = 200;
        res.set_content(body.dump(), "application/json");
    }

    json card(const Lease& l) const
    {
        const auto& tweet = store->tweets().at(l.pair.tweet_id);
        const auto& claim = store->claims().at(l.pair.claim_id);
        return {{"tweet_id", l.pair.tweet_id},
                {"claim_id", l.pair.claim_id},
                {"tweet_text", tweet.text},
                {"claim_text", claim.text},
                {"claim_verdict", to_string(claim.verdict)},
                {"similarity", l.pair.similarity},
                {"rank", l.pair.rank},
                {"annotator", l.annotator},
                {"lease_expires_at", format_rfc3339(l.expires_at)}};
    }

    void routes()
    {
        server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            std::shared_lock lock(models_mutex);
            ok(res, {{"status", "ok"}, {"models_loaded", detector && ranker}});
        });

        server.Get("/pairs/next", [this](const httplib::Request& req, httplib::Response& res) {
            const auto annotator = req.get_param_value("annotator");
            if (annotator.empty()) {
                return error(res, 400, "bad_request", "annotator query parameter is required");
            }
            auto lease = queue.next(annotator);
            if (!lease) {
                res.status = 204;
                return;
            }
            ok(res, card(*lease));
        });

        server.Post(R"(/pairs/([^/]+)/([^/]+)/label)", [this](const httplib::Request& req, httplib::Response& res) {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::parse_error&) {
                return error(res, 400, "bad_request", "body must be JSON");
            }
            if (!body.is_object() || !body.contains("label") || !body["label"].is_string()) {
                return error(res, 400, "bad_request", "label is required");
            }
            auto label = parse_label(body["label"].get<std::string>());
            if (!label) {
                return error(res, 400, "bad_request", "unknown label");
            }
            const auto annotator = body.value("annotator", std::string{});
            const bool relabel = body.value("relabel", false);
            LabelOutcome out;
            try {
                out = queue.label(req.matches[1].str(), req.matches[2].str(), *label, annotator, relabel);
            } catch (const std::exception& e) {
                return error(res, 500, "internal", e.what());
            }
            switch (out.status) {
            case LabelStatus::ok: {
                const auto& p = *out.pair;
                return ok(res, json::parse(AnnotationStore::to_json_line(p)));
            }
            case LabelStatus::not_found:
                return error(res, 404, "not_found", out.message);
            case LabelStatus::conflict:
                return error(res, 409, "conflict", out.message);
            case LabelStatus::bad_request:
                return error(res, 400, "bad_request", out.message);
            }
        });

        server.Get("/progress", [this](const httplib::Request&, httplib::Response& res) { ok(res, queue.progress()); });

        server.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::parse_error&) {
                return error(res, 400, "bad_request", "body must be JSON");
            }
            const auto text = body.is_object() ? body.value("text", std::string{}) : std::string{};
            if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
                return error(res, 400, "bad_request", "text must be non-empty");
            }
            std::shared_ptr<const detection::DetectorModel> d;
            std::shared_ptr<const retrieval::RankerModel> r;
            {
                std::shared_lock lock(models_mutex);
                d = detector;
                r = ranker;
            }
            if (!d || !r) {
                return error(res, 503, "unavailable", "models are not loaded");
            }
            try {
                const auto rec = retrieval::run_pipeline(*d, *r, body.value("tweet_id", std::string("request")), text,
                                                         store->claims(), config.top_n, config.threshold);
                ok(res, rec.to_json());
            } catch (const std::exception& e) {
                error(res, 502, "pipeline_error", e.what());
            }
        });

        if (config.console_dir) {
            if (!server.set_mount_point("/console", config.console_dir->string())) {
                throw MissingFileError(config.console_dir->string());
            }
        }
    }
};

Service::Service(std::shared_ptr<AnnotationStore> store, const candidates::PairPool& pool, ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(store), pool, std::move(config)))
{}

Service::~Service()
{
    stop();
}

void Service::set_models(std::shared_ptr<const detection::DetectorModel> detector,
                         std::shared_ptr<const retrieval::RankerModel> ranker)
{
    std::unique_lock lock(impl_->models_mutex);
    impl_->detector = std::move(detector);
    impl_->ranker = std::move(ranker);
}

AnnotationQueue& Service::queue()
{
    return impl_->queue;
}

int Service::start(const std::string& host, int port)
{
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) {
        throw Error("cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void Service::stop()
{
    impl_->server.stop();
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

void Service::wait()
{
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

}  // namespace factmatch::app
