#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace factmatch::gateway {

struct RetryPolicy {
    int attempts = 3;
    int backoff_ms = 50;
};

/// Where the model scorer lives and how to talk to it.
struct Endpoint {
    std::string base_url;  // "http://host:port" with an optional path prefix
    int timeout_ms = 30000;
    std::size_t max_batch = 64;
    RetryPolicy retry;
    std::string token;  // static bearer token; empty disables the header
    std::size_t max_dataset_bytes = 64U << 20U;
    std::size_t concurrency = 4;

    /// Throws InvalidArgument unless timeout > 0, max_batch >= 1,
    /// attempts >= 1 and concurrency >= 1.
    void validate() const;

    static Endpoint from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

enum class Task { embed, classify, score_pairs };

std::string_view to_string(Task t);
std::optional<Task> parse_task(std::string_view s);

struct RemoteModelRef {
    std::string model_id;
    Task task = Task::classify;
};

/// Model file for remotely trained models: 8-byte magic, version, task, id.
void save_remote_ref(std::ostream& out, const RemoteModelRef& ref);
RemoteModelRef load_remote_ref(std::istream& in);
inline constexpr std::string_view kRemoteMagic{"FMREMOTE", 8};

struct TextPair {
    std::string left;
    std::string right;
};

struct Health {
    std::string status;
    std::vector<std::string> models;
};

/// JSON-over-HTTP client for the scorer protocol:
///   GET  /v1/health       -> {status, models}
///   POST /v1/embed        {texts, request_id}            -> {dim, vectors}
///   POST /v1/classify     {model_id, texts, request_id}  -> {probs}
///   POST /v1/score_pairs  {model_id, pairs, request_id}  -> {scores}
///   POST /v1/train        {task, dataset, hyperparams, request_id} -> {model_id}
/// Inputs larger than max_batch are chunked; chunks run with at most
/// `concurrency` requests in flight and are reassembled in input order.
/// Every response is validated: a contract breach raises ProtocolError, it is
/// never repaired here. Shareable across threads.
class Client {
  public:
    explicit Client(Endpoint endpoint);

    Health health() const;
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) const;
    std::vector<double> classify(const RemoteModelRef& model, std::span<const std::string> texts) const;
    std::vector<double> score_pairs(const RemoteModelRef& model, std::span<const TextPair> pairs) const;
    /// The request id is generated once and reused for every retry, so a
    /// server that is idempotent per id never trains twice.
    RemoteModelRef train(Task task, const nlohmann::json& dataset, const nlohmann::json& hyperparams) const;

    const Endpoint& endpoint() const noexcept { return endpoint_; }
    /// HTTP requests actually issued, retries included.
    std::size_t requests_sent() const noexcept { return requests_->load(); }

    nlohmann::json post(const std::string& path, nlohmann::json body) const;

  private:
    nlohmann::json get(const std::string& path) const;
    nlohmann::json send(const std::string& method, const std::string& path, const nlohmann::json* body) const;
    std::string next_request_id() const;

    Endpoint endpoint_;
    std::string scheme_host_port_;
    std::string path_prefix_;
    std::shared_ptr<std::atomic<std::size_t>> requests_;
    std::shared_ptr<std::atomic<std::uint64_t>> id_counter_;
    std::string id_prefix_;
};

}  // namespace factmatch::gateway
