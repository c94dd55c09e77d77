#include "factmatch/ports.hpp"

#include "factmatch/error.hpp"

namespace factmatch::eval {

using nlohmann::json;

std::string_view to_string(TaskKind t)
{
    return t == TaskKind::detect ? "detect" : "retrieve";
}

TaskKind parse_task_kind(std::string_view s)
{
    if (s == "detect") {
        return TaskKind::detect;
    }
    if (s == "retrieve") {
        return TaskKind::retrieve;
    }
    throw InvalidArgument("unknown task '" + std::string(s) + "' (expected detect or retrieve)");
}

std::vector<std::string> port_names(TaskKind task)
{
    if (task == TaskKind::detect) {
        return {"tfidf-lr", "gateway-classify"};
    }
    return {"bm25", "tfidf-cosine", "encoder-cosine", "exact-match", "gateway-cross-encoder"};
}

json default_gateway_hyperparams(TaskKind task)
{
    if (task == TaskKind::detect) {
        return {{"epochs", 5}, {"batch", 20}};
    }
    return {{"epochs", 3}, {"batch", 16}};
}

namespace {

text::TokenizerOptions tokenizer_options(const json& hp)
{
    text::TokenizerOptions o;
    o.remove_stopwords = hp.value("stopwords", false);
    o.stem = hp.value("stem", false);
    return o;
}

std::shared_ptr<const gateway::Client> need_client(const PortContext& ctx, std::string_view name)
{
    if (!ctx.client) {
        throw InvalidArgument("port " + std::string(name) + " needs a gateway endpoint");
    }
    return ctx.client;
}

json or_default(const json& hp, TaskKind task)
{
    return hp.is_object() && !hp.empty() ? hp : default_gateway_hyperparams(task);
}

}  // namespace

std::unique_ptr<detection::ClassifierPort> make_classifier_port(std::string_view name, const json& hyperparams,
                                                                const PortContext& ctx)
{
    const json hp = hyperparams.is_null() ? json::object() : hyperparams;
    if (name == "tfidf-lr") {
        detection::LogisticConfig c;
        c.learning_rate = hp.value("learning_rate", c.learning_rate);
        c.l2 = hp.value("l2", c.l2);
        c.max_iterations = hp.value("max_iterations", c.max_iterations);
        c.tolerance = hp.value("tolerance", c.tolerance);
        c.tokenizer = tokenizer_options(hp);
        return std::make_unique<detection::TfIdfLogisticPort>(c);
    }
    if (name == "gateway-classify") {
        return std::make_unique<detection::GatewayClassifierPort>(need_client(ctx, name),
                                                                  or_default(hp, TaskKind::detect));
    }
    throw InvalidArgument("unknown detection port '" + std::string(name) + "'");
}

std::unique_ptr<retrieval::RankerPort> make_ranker_port(std::string_view name, const json& hyperparams,
                                                        const PortContext& ctx)
{
    const json hp = hyperparams.is_null() ? json::object() : hyperparams;
    if (name == "bm25") {
        text::Bm25Params p;
        p.k1 = hp.value("k1", p.k1);
        p.b = hp.value("b", p.b);
        return std::make_unique<retrieval::Bm25RankerPort>(p, tokenizer_options(hp));
    }
    if (name == "tfidf-cosine") {
        return std::make_unique<retrieval::TfIdfCosineRankerPort>(tokenizer_options(hp));
    }
    if (name == "encoder-cosine") {
        auto encoder = ctx.encoder;
        if (!encoder) {
            encoder = std::make_shared<candidates::HashEncoder>(hp.value("dim", std::size_t{256}),
                                                                tokenizer_options(hp));
        }
        return std::make_unique<retrieval::EncoderCosineRankerPort>(std::move(encoder));
    }
    if (name == "exact-match") {
        return std::make_unique<retrieval::ExactMatchRanker>();
    }
    if (name == "gateway-cross-encoder") {
        return std::make_unique<retrieval::GatewayRankerPort>(need_client(ctx, name),
                                                              or_default(hp, TaskKind::retrieve));
    }
    throw InvalidArgument("unknown retrieval port '" + std::string(name) + "'");
}

}  // namespace factmatch::eval
