#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace recsearch {

enum class Role { System, User, Assistant };

std::string_view role_name(Role role);
Role role_from_name(std::string_view name);

struct ChatMessage {
    Role role = Role::User;
    std::string content;
};

// One generation call. When want_token_alternatives is set the backend must
// report the top-k alternatives of the first generated token; scoring is
// built on those probabilities.
struct GenerationRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_new_tokens = 256;
    bool want_token_alternatives = false;
    int alternatives_top_k = 10;
    std::optional<std::uint64_t> seed;
    // Forces the reply to start with this text; alternatives then refer to
    // the first token generated after the prefix.
    std::optional<std::string> assistant_prefix;
};

struct TokenProbability {
    std::string token;
    double probability = 0.0;
};

struct GenerationResult {
    std::string text;  // excludes assistant_prefix
    // Sorted by probability, descending. Present iff requested.
    std::optional<std::vector<TokenProbability>> first_token_alternatives;
    std::string backend_name;
    double latency_ms = 0.0;
};

// Throws ValidationError on violated request invariants (empty system/user
// content, non-positive max_new_tokens, top_k < 2 when alternatives wanted).
void validate_request(const GenerationRequest& request);

class Backend {
  public:
    virtual ~Backend() = default;
    // Single attempt, no retry. Throws TransportError / ProtocolError.
    virtual GenerationResult generate_once(const GenerationRequest& request) = 0;
    virtual std::string name() const = 0;
    virtual bool supports_assistant_prefix() const { return true; }
};

struct RetryPolicy {
    int max_retries = 3;          // additional attempts after the first
    int initial_backoff_ms = 25;  // doubled per retry
    int max_backoff_ms = 2000;
};

// generate_once plus bounded exponential backoff on TransportError.
// ProtocolError and validation failures propagate immediately.
GenerationResult generate(Backend& backend, const GenerationRequest& request,
                          const RetryPolicy& policy = {});

struct BatchOutcome {
    std::optional<GenerationResult> result;
    std::string error;
    bool ok() const { return result.has_value(); }
};

// Runs the requests with at most max_concurrency in flight. Results come
// back in request order; one failing request does not affect the others.
std::vector<BatchOutcome> generate_batch(Backend& backend,
                                         std::span<const GenerationRequest> requests,
                                         int max_concurrency,
                                         const RetryPolicy& policy = {});

}  // namespace recsearch
