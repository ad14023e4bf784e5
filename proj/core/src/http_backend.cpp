#include "recsearch/http_backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "recsearch/errors.hpp"

namespace recsearch {

namespace {

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

}  // namespace

HttpBackendConfig HttpBackendConfig::from_env() {
    HttpBackendConfig cfg;
    cfg.base_url = env_or_empty("GATEWAY_BASE_URL");
    cfg.api_key = env_or_empty("GATEWAY_API_KEY");
    cfg.model = env_or_empty("GATEWAY_MODEL");
    return cfg;
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
        throw ConfigError("http backend: base_url is empty (set GATEWAY_BASE_URL)");
    }
    // Split "scheme://host:port/prefix" into host_ and path_prefix_.
    const std::size_t scheme_end = config_.base_url.find("://");
    const std::size_t host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const std::size_t slash = config_.base_url.find('/', host_begin);
    if (slash == std::string::npos) {
        host_ = config_.base_url;
    } else {
        host_ = config_.base_url.substr(0, slash);
        path_prefix_ = config_.base_url.substr(slash);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

std::string HttpChatBackend::build_request_body(const GenerationRequest& request) const {
    nlohmann::json body;
    body["model"] = config_.model;
    nlohmann::json messages = nlohmann::json::array();
    for (const ChatMessage& m : request.messages) {
        messages.push_back({{"role", std::string(role_name(m.role))}, {"content", m.content}});
    }
    if (request.assistant_prefix) {
        if (config_.prefix_mode) {
            messages.push_back(
                {{"role", "assistant"}, {"content", *request.assistant_prefix}});
        } else if (!messages.empty() && messages.back()["role"] == "user") {
            messages.back()["content"] =
                messages.back()["content"].get<std::string>() + "\n\n" +
                *request.assistant_prefix;
        } else {
            messages.push_back({{"role", "user"}, {"content", *request.assistant_prefix}});
        }
    }
    body["messages"] = std::move(messages);
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_new_tokens;
    if (request.seed) body["seed"] = *request.seed;
    if (request.want_token_alternatives) {
        body["logprobs"] = true;
        body["top_logprobs"] = request.alternatives_top_k;
    }
    return body.dump();
}

GenerationResult HttpChatBackend::parse_response_body(
    const std::string& body, const GenerationRequest& request) const {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("http backend: bad response JSON: ") + e.what());
    }

    GenerationResult result;
    result.backend_name = name();
    try {
        const auto& choice = j.at("choices").at(0);
        result.text = choice.at("message").at("content").get<std::string>();
        if (request.assistant_prefix &&
            result.text.rfind(*request.assistant_prefix, 0) == 0) {
            result.text = result.text.substr(request.assistant_prefix->size());
        }
        if (request.want_token_alternatives) {
            if (!choice.contains("logprobs") || choice["logprobs"].is_null()) {
                throw ProtocolError(
                    "http backend: token alternatives requested but response has no "
                    "logprobs");
            }
            const auto& content = choice.at("logprobs").at("content");
            if (content.empty()) {
                throw ProtocolError("http backend: logprobs.content is empty");
            }
            std::vector<TokenProbability> alts;
            for (const auto& alt : content.at(0).at("top_logprobs")) {
                alts.push_back({alt.at("token").get<std::string>(),
                                std::exp(alt.at("logprob").get<double>())});
            }
            std::stable_sort(alts.begin(), alts.end(),
                             [](const TokenProbability& a, const TokenProbability& b) {
                                 return a.probability > b.probability;
                             });
            result.first_token_alternatives = std::move(alts);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("http backend: unexpected response shape: ") +
                            e.what());
    }
    return result;
}

GenerationResult HttpChatBackend::generate_once(const GenerationRequest& request) {
    const std::string body = build_request_body(request);

    httplib::Client client(host_);
    client.set_connection_timeout(0, config_.timeout_ms * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    const auto start = std::chrono::steady_clock::now();
    httplib::Result res =
        client.Post(path_prefix_ + "/v1/chat/completions", headers, body, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - start;

    if (!res) {
        throw TransportError("http backend: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("http backend: HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw GatewayError("http backend: HTTP " + std::to_string(res->status) + ": " +
                           res->body);
    }

    GenerationResult result = parse_response_body(res->body, request);
    result.latency_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed)
            .count();
    return result;
}

}  // namespace recsearch
