#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "factmatch/candidates.hpp"
#include "factmatch/detection.hpp"
#include "factmatch/gateway.hpp"
#include "factmatch/retrieval.hpp"

namespace factmatch::eval {

enum class TaskKind { detect, retrieve };

std::string_view to_string(TaskKind t);
TaskKind parse_task_kind(std::string_view s);

/// Shared resources ports may need. Gateway ports fail without a client;
/// encoder-cosine falls back to a 256-d hash encoder.
struct PortContext {
    std::shared_ptr<const gateway::Client> client;
    std::shared_ptr<const candidates::EncoderPort> encoder;
};

/// Detect: tfidf-lr, gateway-classify.
/// Retrieve: bm25, tfidf-cosine, encoder-cosine, exact-match, gateway-cross-encoder.
std::vector<std::string> port_names(TaskKind task);

std::unique_ptr<detection::ClassifierPort> make_classifier_port(std::string_view name,
                                                                const nlohmann::json& hyperparams,
                                                                const PortContext& ctx);
std::unique_ptr<retrieval::RankerPort> make_ranker_port(std::string_view name, const nlohmann::json& hyperparams,
                                                        const PortContext& ctx);

/// Hyperparameters forwarded to gateway training when none are configured.
nlohmann::json default_gateway_hyperparams(TaskKind task);

}  // namespace factmatch::eval
