#pragma once

#include <string>

#include "recsearch/gateway.hpp"

namespace recsearch {

struct HttpBackendConfig {
    std::string base_url;  // e.g. "http://localhost:8000"
    std::string api_key;   // sent as "Authorization: Bearer ..." when non-empty
    std::string model;
    int timeout_ms = 30000;
    // When true the assistant prefix is appended as a trailing assistant
    // message for the server to continue. When false the prefix is folded
    // into the final user message and alternatives refer to the first
    // generated token; both placements put the decision token first.
    bool prefix_mode = true;

    // Reads GATEWAY_BASE_URL, GATEWAY_API_KEY, GATEWAY_MODEL.
    static HttpBackendConfig from_env();
};

// Talks to a chat-completions endpoint: POST {base_url}/v1/chat/completions.
class HttpChatBackend : public Backend {
  public:
    explicit HttpChatBackend(HttpBackendConfig config);

    GenerationResult generate_once(const GenerationRequest& request) override;
    std::string name() const override { return "http:" + config_.model; }
    bool supports_assistant_prefix() const override { return config_.prefix_mode; }

    // Exact request body sent over the wire; exposed so protocol tests can
    // pin it byte for byte.
    std::string build_request_body(const GenerationRequest& request) const;

    // Parses a response body into a result. Throws ProtocolError when token
    // alternatives were requested but are missing from the response.
    GenerationResult parse_response_body(const std::string& body,
                                         const GenerationRequest& request) const;

  private:
    HttpBackendConfig config_;
    std::string host_;         // scheme://host:port
    std::string path_prefix_;  // leading path component of base_url, if any
};

}  // namespace recsearch
