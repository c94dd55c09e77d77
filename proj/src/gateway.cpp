#include "factmatch/gateway.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "factmatch/binary_io.hpp"
#include "factmatch/error.hpp"

namespace factmatch::gateway {

using nlohmann::json;

std::string_view to_string(Task t)
{
    switch (t) {
    case Task::embed: return "embed";
    case Task::classify: return "classify";
    case Task::score_pairs: return "score_pairs";
    }
    return "embed";
}

std::optional<Task> parse_task(std::string_view s)
{
    if (s == "embed") return Task::embed;
    if (s == "classify") return Task::classify;
    if (s == "score_pairs") return Task::score_pairs;
    return std::nullopt;
}

void save_remote_ref(std::ostream& out, const RemoteModelRef& ref)
{
    binary::write_header(out, kRemoteMagic, 1);
    binary::write_string(out, to_string(ref.task));
    binary::write_string(out, ref.model_id);
}

RemoteModelRef load_remote_ref(std::istream& in)
{
    binary::expect_header(in, kRemoteMagic, 1);
    auto task = parse_task(binary::read_string(in, 64));
    if (!task) {
        throw FormatVersionError("remote model file: unknown task");
    }
    RemoteModelRef ref;
    ref.task = *task;
    ref.model_id = binary::read_string(in, 4096);
    return ref;
}

void Endpoint::validate() const
{
    if (base_url.empty()) {
        throw InvalidArgument("gateway: base_url is empty");
    }
    if (timeout_ms <= 0) {
        throw InvalidArgument("gateway: timeout must be > 0");
    }
    if (max_batch < 1) {
        throw InvalidArgument("gateway: max_batch must be >= 1");
    }
    if (retry.attempts < 1 || retry.backoff_ms < 0) {
        throw InvalidArgument("gateway: retry attempts must be >= 1");
    }
    if (concurrency < 1) {
        throw InvalidArgument("gateway: concurrency must be >= 1");
    }
}

Endpoint Endpoint::from_json(const json& j)
{
    Endpoint e;
    e.base_url = j.value("base_url", std::string{});
    e.timeout_ms = j.value("timeout_ms", e.timeout_ms);
    e.max_batch = j.value("max_batch", e.max_batch);
    e.token = j.value("token", std::string{});
    e.max_dataset_bytes = j.value("max_dataset_bytes", e.max_dataset_bytes);
    e.concurrency = j.value("concurrency", e.concurrency);
    if (auto it = j.find("retry"); it != j.end()) {
        e.retry.attempts = it->value("attempts", e.retry.attempts);
        e.retry.backoff_ms = it->value("backoff_ms", e.retry.backoff_ms);
    }
    e.validate();
    return e;
}

json Endpoint::to_json() const
{
    // The token is deliberately not echoed.
    return json{{"base_url", base_url},
                {"timeout_ms", timeout_ms},
                {"max_batch", max_batch},
                {"retry", {{"attempts", retry.attempts}, {"backoff_ms", retry.backoff_ms}}},
                {"max_dataset_bytes", max_dataset_bytes},
                {"concurrency", concurrency}};
}

Client::Client(Endpoint endpoint)
    : endpoint_(std::move(endpoint)),
      requests_(std::make_shared<std::atomic<std::size_t>>(0)),
      id_counter_(std::make_shared<std::atomic<std::uint64_t>>(0))
{
    endpoint_.validate();
    auto scheme_end = endpoint_.base_url.find("://");
    auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = endpoint_.base_url.find('/', host_start);
    if (path_start == std::string::npos) {
        scheme_host_port_ = endpoint_.base_url;
    } else {
        scheme_host_port_ = endpoint_.base_url.substr(0, path_start);
        path_prefix_ = endpoint_.base_url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') {
            path_prefix_.pop_back();
        }
    }
    std::random_device rd;
    std::ostringstream os;
    os << std::hex << ((static_cast<std::uint64_t>(rd()) << 32U) | rd());
    id_prefix_ = "req-" + os.str();
}

std::string Client::next_request_id() const
{
    return id_prefix_ + "-" + std::to_string(id_counter_->fetch_add(1) + 1);
}

json Client::send(const std::string& method, const std::string& path, const json* body) const
{
    const std::string full_path = path_prefix_ + path;
    const std::string where = endpoint_.base_url + path;
    std::string last_error;
    for (int attempt = 0; attempt < endpoint_.retry.attempts; ++attempt) {
        if (attempt > 0 && endpoint_.retry.backoff_ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(endpoint_.retry.backoff_ms * attempt));
        }
        httplib::Client cli(scheme_host_port_);
        auto timeout = std::chrono::milliseconds(endpoint_.timeout_ms);
        cli.set_connection_timeout(timeout);
        cli.set_read_timeout(timeout);
        cli.set_write_timeout(timeout);
        if (!endpoint_.token.empty()) {
            cli.set_bearer_token_auth(endpoint_.token);
        }
        requests_->fetch_add(1);
        httplib::Result res = method == "GET" ? cli.Get(full_path)
                                              : cli.Post(full_path, body->dump(), "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        const int status = res->status;
        if (status == 502 || status == 503 || status == 504) {
            last_error = "HTTP " + std::to_string(status);
            continue;
        }
        json parsed;
        try {
            parsed = json::parse(res->body);
        } catch (const json::parse_error&) {
            if (status >= 200 && status < 300) {
                throw ProtocolError(where + ": response is not JSON");
            }
            throw ServerError(status, res->body);
        }
        if (status < 200 || status >= 300) {
            std::string message = parsed.is_object() ? parsed.value("message", res->body) : res->body;
            throw ServerError(status, message);
        }
        if (!parsed.is_object()) {
            throw ProtocolError(where + ": response must be a JSON object");
        }
        return parsed;
    }
    throw TransportError(where, last_error.empty() ? "request failed" : last_error);
}

json Client::get(const std::string& path) const
{
    return send("GET", path, nullptr);
}

json Client::post(const std::string& path, json body) const
{
    if (!body.contains("request_id")) {
        body["request_id"] = next_request_id();
    }
    return send("POST", path, &body);
}

Health Client::health() const
{
    auto j = get("/v1/health");
    Health h;
    if (!j.contains("status") || !j["status"].is_string()) {
        throw ProtocolError("health: missing status");
    }
    h.status = j["status"].get<std::string>();
    if (auto it = j.find("models"); it != j.end() && it->is_array()) {
        for (const auto& m : *it) {
            h.models.push_back(m.is_string() ? m.get<std::string>() : m.dump());
        }
    }
    return h;
}

namespace {

/// Runs fn(begin, end) over [0, n) in max_batch chunks, at most
/// `concurrency` at a time, and concatenates results in input order.
template <typename T, typename Fn>
std::vector<T> chunked(std::size_t n, std::size_t max_batch, std::size_t concurrency, Fn fn)
{
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t b = 0; b < n; b += max_batch) {
        ranges.emplace_back(b, std::min(n, b + max_batch));
    }
    std::vector<std::vector<T>> parts(ranges.size());
    for (std::size_t wave = 0; wave < ranges.size(); wave += concurrency) {
        const std::size_t wave_end = std::min(ranges.size(), wave + concurrency);
        if (wave_end - wave == 1) {
            parts[wave] = fn(ranges[wave].first, ranges[wave].second);
            continue;
        }
        std::vector<std::future<std::vector<T>>> futures;
        for (std::size_t c = wave; c < wave_end; ++c) {
            futures.push_back(std::async(std::launch::async, fn, ranges[c].first, ranges[c].second));
        }
        for (std::size_t c = wave; c < wave_end; ++c) {
            parts[c] = futures[c - wave].get();
        }
    }
    std::vector<T> out;
    out.reserve(n);
    for (auto& p : parts) {
        for (auto& v : p) {
            out.push_back(std::move(v));
        }
    }
    return out;
}

const json& require_array(const json& j, const char* field, const char* route)
{
    auto it = j.find(field);
    if (it == j.end() || !it->is_array()) {
        throw ProtocolError(std::string(route) + ": missing array '" + field + "'");
    }
    return *it;
}

double require_number(const json& v, const char* route)
{
    if (!v.is_number()) {
        throw ProtocolError(std::string(route) + ": non-numeric value");
    }
    double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw ProtocolError(std::string(route) + ": non-finite value");
    }
    return x;
}

void require_task(const RemoteModelRef& model, Task expected)
{
    if (model.task != expected) {
        throw InvalidArgument("model '" + model.model_id + "' has task " + std::string(to_string(model.task))
                              + ", expected " + std::string(to_string(expected)));
    }
}

}  // namespace

std::vector<std::vector<double>> Client::embed(std::span<const std::string> texts) const
{
    if (texts.empty()) {
        return {};
    }
    std::atomic<long> declared_dim{-1};
    auto fetch = [&](std::size_t begin, std::size_t end) {
        json body{{"texts", json(std::vector<std::string>(texts.begin() + static_cast<long>(begin),
                                                          texts.begin() + static_cast<long>(end)))}};
        auto res = post("/v1/embed", std::move(body));
        if (!res.contains("dim") || !res["dim"].is_number_integer() || res["dim"].get<long>() <= 0) {
            throw ProtocolError("embed: missing or invalid 'dim'");
        }
        const long dim = res["dim"].get<long>();
        long expected = -1;
        if (!declared_dim.compare_exchange_strong(expected, dim) && expected != dim) {
            throw ProtocolError("embed: dimension changed between batches (" + std::to_string(expected) + " vs "
                                + std::to_string(dim) + ")");
        }
        const auto& vectors = require_array(res, "vectors", "embed");
        if (vectors.size() != end - begin) {
            throw ProtocolError("embed: expected " + std::to_string(end - begin) + " vectors, got "
                                + std::to_string(vectors.size()));
        }
        std::vector<std::vector<double>> out;
        out.reserve(vectors.size());
        for (const auto& v : vectors) {
            if (!v.is_array() || static_cast<long>(v.size()) != dim) {
                throw ProtocolError("embed: vector dimension differs from declared dim " + std::to_string(dim));
            }
            std::vector<double> row;
            row.reserve(v.size());
            for (const auto& x : v) {
                row.push_back(require_number(x, "embed"));
            }
            out.push_back(std::move(row));
        }
        return out;
    };
    return chunked<std::vector<double>>(texts.size(), endpoint_.max_batch, endpoint_.concurrency, fetch);
}

std::vector<double> Client::classify(const RemoteModelRef& model, std::span<const std::string> texts) const
{
    require_task(model, Task::classify);
    if (texts.empty()) {
        return {};
    }
    auto fetch = [&](std::size_t begin, std::size_t end) {
        json body{{"model_id", model.model_id},
                  {"texts", json(std::vector<std::string>(texts.begin() + static_cast<long>(begin),
                                                          texts.begin() + static_cast<long>(end)))}};
        auto res = post("/v1/classify", std::move(body));
        const auto& probs = require_array(res, "probs", "classify");
        if (probs.size() != end - begin) {
            throw ProtocolError("classify: expected " + std::to_string(end - begin) + " probabilities, got "
                                + std::to_string(probs.size()));
        }
        std::vector<double> out;
        for (const auto& p : probs) {
            double x = require_number(p, "classify");
            if (x < 0.0 || x > 1.0) {
                throw ProtocolError("classify: probability out of [0,1]: " + std::to_string(x));
            }
            out.push_back(x);
        }
        return out;
    };
    return chunked<double>(texts.size(), endpoint_.max_batch, endpoint_.concurrency, fetch);
}

std::vector<double> Client::score_pairs(const RemoteModelRef& model, std::span<const TextPair> pairs) const
{
    require_task(model, Task::score_pairs);
    if (pairs.empty()) {
        return {};
    }
    auto fetch = [&](std::size_t begin, std::size_t end) {
        json arr = json::array();
        for (std::size_t i = begin; i < end; ++i) {
            arr.push_back({{"left", pairs[i].left}, {"right", pairs[i].right}});
        }
        auto res = post("/v1/score_pairs", json{{"model_id", model.model_id}, {"pairs", std::move(arr)}});
        const auto& scores = require_array(res, "scores", "score_pairs");
        if (scores.size() != end - begin) {
            throw ProtocolError("score_pairs: expected " + std::to_string(end - begin) + " scores, got "
                                + std::to_string(scores.size()));
        }
        std::vector<double> out;
        for (const auto& s : scores) {
            out.push_back(require_number(s, "score_pairs"));
        }
        return out;
    };
    return chunked<double>(pairs.size(), endpoint_.max_batch, endpoint_.concurrency, fetch);
}

RemoteModelRef Client::train(Task task, const json& dataset, const json& hyperparams) const
{
    if (!dataset.is_array()) {
        throw InvalidArgument("train: dataset must be an array");
    }
    const auto bytes = dataset.dump().size();
    if (bytes > endpoint_.max_dataset_bytes) {
        throw PayloadTooLargeError("train: dataset is " + std::to_string(bytes) + " bytes, limit "
                                   + std::to_string(endpoint_.max_dataset_bytes));
    }
    json body{{"task", to_string(task)},
              {"dataset", dataset},
              {"hyperparams", hyperparams.is_null() ? json::object() : hyperparams},
              {"request_id", next_request_id()}};
    auto res = post("/v1/train", std::move(body));
    if (!res.contains("model_id") || !res["model_id"].is_string() || res["model_id"].get<std::string>().empty()) {
        throw ProtocolError("train: missing 'model_id'");
    }
    return RemoteModelRef{res["model_id"].get<std::string>(), task};
}

}  // namespace factmatch::gateway
