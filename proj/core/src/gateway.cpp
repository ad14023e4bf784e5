#include "recsearch/gateway.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include "recsearch/errors.hpp"

namespace recsearch {

std::string_view role_name(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    throw ValidationError("unknown role");
}

Role role_from_name(std::string_view name) {
    if (name == "system") return Role::System;
    if (name == "user") return Role::User;
    if (name == "assistant") return Role::Assistant;
    throw ParseError("unknown role: " + std::string(name));
}

void validate_request(const GenerationRequest& request) {
    if (request.messages.empty()) {
        throw ValidationError("generation request has no messages");
    }
    for (const ChatMessage& m : request.messages) {
        if ((m.role == Role::System || m.role == Role::User) && m.content.empty()) {
            throw ValidationError("system/user message content must be non-empty");
        }
    }
    if (request.temperature < 0.0) {
        throw ValidationError("temperature must be >= 0");
    }
    if (request.max_new_tokens <= 0) {
        throw ValidationError("max_new_tokens must be positive");
    }
    if (request.want_token_alternatives && request.alternatives_top_k < 2) {
        throw ValidationError("alternatives_top_k must be >= 2 when alternatives are requested");
    }
}

GenerationResult generate(Backend& backend, const GenerationRequest& request,
                          const RetryPolicy& policy) {
    validate_request(request);
    int backoff_ms = policy.initial_backoff_ms;
    for (int attempt = 0;; ++attempt) {
        try {
            return backend.generate_once(request);
        } catch (const TransportError&) {
            if (attempt >= policy.max_retries) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms = std::min(backoff_ms * 2, policy.max_backoff_ms);
        }
    }
}

std::vector<BatchOutcome> generate_batch(Backend& backend,
                                         std::span<const GenerationRequest> requests,
                                         int max_concurrency,
                                         const RetryPolicy& policy) {
    std::vector<BatchOutcome> outcomes(requests.size());
    if (requests.empty()) return outcomes;
    if (max_concurrency < 1) {
        throw ValidationError("max_concurrency must be >= 1");
    }

    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(max_concurrency), requests.size());
    std::atomic<std::size_t> next{0};

    auto run = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= requests.size()) return;
            try {
                outcomes[i].result = generate(backend, requests[i], policy);
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        }
    };

    if (workers == 1) {
        run();
        return outcomes;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run);
    for (std::thread& t : threads) t.join();
    return outcomes;
}

}  // namespace recsearch
