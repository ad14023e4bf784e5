#include <doctest.h>

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "recsearch/errors.hpp"
#include "recsearch/http_backend.hpp"

using namespace recsearch;

namespace {

// The scoring request fixture used for protocol pinning: a Yes/No decision
// with forced reply prefix and first-token alternatives.
GenerationRequest scoring_fixture_request() {
    GenerationRequest request;
    request.messages = {
        {Role::System, "You are the user to look for recommendations."},
        {Role::User,
         "User: I want a scary movie.\n\nRecommended item:\nHalloween (1978) (genre: "
         "horror)"}};
    request.temperature = 0.0;
    request.max_new_tokens = 4;
    request.want_token_alternatives = true;
    request.alternatives_top_k = 10;
    request.seed = 7;
    request.assistant_prefix = "Accept the recommendation (Yes/No)?";
    return request;
}

// Byte-exact body the fixture request must serialize to (keys sorted, no
// whitespace). Any drift in serialization is a protocol break.
constexpr const char* kGoldenRequestBody =
    R"gold({"logprobs":true,"max_tokens":4,"messages":[{"content":"You are the user to look for recommendations.","role":"system"},{"content":"User: I want a scary movie.\n\nRecommended item:\nHalloween (1978) (genre: horror)","role":"user"},{"content":"Accept the recommendation (Yes/No)?","role":"assistant"}],"model":"sim-user-8b","seed":7,"temperature":0.0,"top_logprobs":10})gold";

// A recorded chat-completions reply carrying top_logprobs for the decision
// token. exp(-0.2231435513) = 0.8, exp(-1.6094379124) = 0.2.
constexpr const char* kGoldenResponseBody =
    R"json({"choices":[{"finish_reason":"stop","index":0,"logprobs":{"content":[{"logprob":-0.2231435513,"token":" Yes","top_logprobs":[{"logprob":-0.2231435513,"token":" Yes"},{"logprob":-1.6094379124,"token":" No"}]}]},"message":{"content":"Accept the recommendation (Yes/No)? Yes","role":"assistant"}}],"id":"chatcmpl-42","model":"sim-user-8b","object":"chat.completion"})json";

HttpBackendConfig offline_config() {
    HttpBackendConfig config;
    config.base_url = "http://127.0.0.1:1";
    config.model = "sim-user-8b";
    return config;
}

}  // namespace

TEST_CASE("build_request_body matches the golden bytes") {
    const HttpChatBackend backend(offline_config());
    CHECK(backend.build_request_body(scoring_fixture_request()) == kGoldenRequestBody);
}

TEST_CASE("build_request_body omits optional fields when unused") {
    const HttpChatBackend backend(offline_config());
    GenerationRequest request;
    request.messages = {{Role::User, "hi"}};
    request.temperature = 0.7;
    request.max_new_tokens = 32;

    const nlohmann::json body = nlohmann::json::parse(backend.build_request_body(request));
    CHECK(body.at("model") == "sim-user-8b");
    CHECK(body.at("temperature") == 0.7);
    CHECK(body.at("max_tokens") == 32);
    CHECK_FALSE(body.contains("logprobs"));
    CHECK_FALSE(body.contains("top_logprobs"));
    CHECK_FALSE(body.contains("seed"));
    REQUIRE(body.at("messages").size() == 1);
    CHECK(body.at("messages").at(0).at("role") == "user");
}

TEST_CASE("assistant prefix folds into the user message when prefix mode is off") {
    HttpBackendConfig config = offline_config();
    config.prefix_mode = false;
    const HttpChatBackend backend(config);
    CHECK_FALSE(backend.supports_assistant_prefix());

    const nlohmann::json body =
        nlohmann::json::parse(backend.build_request_body(scoring_fixture_request()));
    const auto& messages = body.at("messages");
    REQUIRE(messages.size() == 2);  // no trailing assistant message
    CHECK(messages.at(1).at("role") == "user");
    const std::string user = messages.at(1).at("content").get<std::string>();
    CHECK(user.find("Accept the recommendation (Yes/No)?") != std::string::npos);
}

TEST_CASE("parse_response_body extracts text and sorted alternatives") {
    const HttpChatBackend backend(offline_config());
    const GenerationRequest request = scoring_fixture_request();
    const GenerationResult result =
        backend.parse_response_body(kGoldenResponseBody, request);

    // The forced prefix is stripped from the reported text.
    CHECK(result.text == " Yes");
    REQUIRE(result.first_token_alternatives.has_value());
    REQUIRE(result.first_token_alternatives->size() == 2);
    CHECK((*result.first_token_alternatives)[0].token == " Yes");
    CHECK((*result.first_token_alternatives)[0].probability == doctest::Approx(0.8).epsilon(1e-9));
    CHECK((*result.first_token_alternatives)[1].token == " No");
    CHECK((*result.first_token_alternatives)[1].probability == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("parse_response_body sorts alternatives by descending probability") {
    const HttpChatBackend backend(offline_config());
    GenerationRequest request;
    request.messages = {{Role::User, "hi"}};
    request.want_token_alternatives = true;

    const std::string body =
        R"json({"choices":[{"message":{"content":"No"},"logprobs":{"content":[{"token":"No",)json"
        R"json("top_logprobs":[{"token":" Yes","logprob":-3.0},{"token":" No","logprob":-0.05}]}]}}]})json";
    const GenerationResult result = backend.parse_response_body(body, request);
    REQUIRE(result.first_token_alternatives.has_value());
    CHECK((*result.first_token_alternatives)[0].token == " No");
    CHECK((*result.first_token_alternatives)[1].token == " Yes");
}

TEST_CASE("parse_response_body rejects replies without requested logprobs") {
    const HttpChatBackend backend(offline_config());
    GenerationRequest request;
    request.messages = {{Role::User, "hi"}};
    request.want_token_alternatives = true;

    CHECK_THROWS_AS(backend.parse_response_body(
                        R"json({"choices":[{"message":{"content":"Yes"}}]})json", request),
                    ProtocolError);
    CHECK_THROWS_AS(backend.parse_response_body(
                        R"json({"choices":[{"message":{"content":"Yes"},"logprobs":null}]})json",
                        request),
                    ProtocolError);
    CHECK_THROWS_AS(
        backend.parse_response_body(
            R"json({"choices":[{"message":{"content":"Yes"},"logprobs":{"content":[]}}]})json",
            request),
        ProtocolError);
}

TEST_CASE("parse_response_body rejects malformed replies") {
    const HttpChatBackend backend(offline_config());
    GenerationRequest request;
    request.messages = {{Role::User, "hi"}};

    CHECK_THROWS_AS(backend.parse_response_body("not json", request), ProtocolError);
    CHECK_THROWS_AS(backend.parse_response_body(R"json({"choices":[]})json", request),
                    ProtocolError);
    CHECK_THROWS_AS(backend.parse_response_body(R"json({"choices":[{}]})json", request),
                    ProtocolError);
}

TEST_CASE("http backend requires a base url") {
    HttpBackendConfig config;
    config.model = "m";
    CHECK_THROWS_AS(HttpChatBackend{config}, ConfigError);
}

TEST_CASE("http backend round-trips against a live fixture server") {
    httplib::Server server;
    std::string captured_body;
    std::string captured_path;
    std::string captured_auth;
    server.Post("/v1/chat/completions",
                [&](const httplib::Request& req, httplib::Response& res) {
                    captured_body = req.body;
                    captured_path = req.path;
                    captured_auth = req.get_header_value("Authorization");
                    res.set_content(kGoldenResponseBody, "application/json");
                });

    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpBackendConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    config.model = "sim-user-8b";
    config.api_key = "secret-key";
    HttpChatBackend backend(config);

    const GenerationResult result = backend.generate_once(scoring_fixture_request());

    server.stop();
    server_thread.join();

    // The wire request is exactly the golden bytes.
    CHECK(captured_body == kGoldenRequestBody);
    CHECK(captured_path == "/v1/chat/completions");
    CHECK(captured_auth == "Bearer secret-key");
    CHECK(result.text == " Yes");
    REQUIRE(result.first_token_alternatives.has_value());
    CHECK((*result.first_token_alternatives)[0].token == " Yes");
    CHECK(result.backend_name == "http:sim-user-8b");
}

TEST_CASE("http backend reports transport failure for a dead endpoint") {
    HttpBackendConfig config;
    config.base_url = "http://127.0.0.1:1";  // reserved port, nothing listens
    config.model = "m";
    config.timeout_ms = 200;
    HttpChatBackend backend(config);

    GenerationRequest request;
    request.messages = {{Role::User, "hi"}};
    CHECK_THROWS_AS(backend.generate_once(request), TransportError);
}

TEST_CASE("http backend honors a path prefix in the base url") {
    httplib::Server server;
    std::string captured_path;
    server.Post("/proxy/v1/chat/completions",
                [&](const httplib::Request& req, httplib::Response& res) {
                    captured_path = req.path;
                    res.set_content(R"json({"choices":[{"message":{"content":"ok"}}]})json",
                                    "application/json");
                });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpBackendConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/proxy";
    config.model = "m";
    HttpChatBackend backend(config);

    GenerationRequest request;
    request.messages = {{Role::User, "hi"}};
    const GenerationResult result = backend.generate_once(request);

    server.stop();
    server_thread.join();

    CHECK(captured_path == "/proxy/v1/chat/completions");
    CHECK(result.text == "ok");
}

TEST_CASE("http config reads gateway environment variables") {
    ::setenv("GATEWAY_BASE_URL", "http://example.test:9", 1);
    ::setenv("GATEWAY_API_KEY", "k", 1);
    ::setenv("GATEWAY_MODEL", "m", 1);
    const HttpBackendConfig config = HttpBackendConfig::from_env();
    CHECK(config.base_url == "http://example.test:9");
    CHECK(config.api_key == "k");
    CHECK(config.model == "m");
    ::unsetenv("GATEWAY_BASE_URL");
    ::unsetenv("GATEWAY_API_KEY");
    ::unsetenv("GATEWAY_MODEL");

    const HttpBackendConfig empty = HttpBackendConfig::from_env();
    CHECK(empty.base_url.empty());
}
