#include "recsearch/simulated_user.hpp"

#include <cctype>

#include "recsearch/errors.hpp"
#include "recsearch/prompts.hpp"
#include "recsearch/rng.hpp"

namespace recsearch {

bool reward_token_matches(std::string_view token_text, std::string_view option) {
    std::size_t i = 0;
    while (i < token_text.size() &&
           std::isspace(static_cast<unsigned char>(token_text[i]))) {
        ++i;
    }
    token_text.remove_prefix(i);
    if (token_text.size() != option.size()) return false;
    for (std::size_t k = 0; k < option.size(); ++k) {
        if (std::tolower(static_cast<unsigned char>(token_text[k])) !=
            std::tolower(static_cast<unsigned char>(option[k]))) {
            return false;
        }
    }
    return true;
}

ScoreExtraction extract_score(std::span<const TokenProbability> alternatives,
                              const RewardTokenConfig& config) {
    double yes = 0.0;
    double no = 0.0;
    for (const TokenProbability& alt : alternatives) {
        if (reward_token_matches(alt.token, config.positive_token)) {
            yes += alt.probability;
        } else if (reward_token_matches(alt.token, config.negative_token)) {
            no += alt.probability;
        }
    }
    if (yes + no < kMinDecisionTokenMass) return {0.0, true};
    return {yes / (yes + no), false};
}

SimulatedUser::SimulatedUser(Backend& backend, const ItemCatalog& catalog,
                             RewardTokenConfig config, int max_concurrency,
                             RetryPolicy retry)
    : backend_(backend),
      catalog_(catalog),
      config_(std::move(config)),
      max_concurrency_(max_concurrency),
      retry_(retry) {
    if (max_concurrency_ < 1) {
        throw ValidationError("simulated user: max_concurrency must be >= 1");
    }
}

std::uint64_t SimulatedUser::history_digest(std::span<const Utterance> history) const {
    const std::string serialized = prompts::serialize_history(history);
    std::uint64_t h = fnv1a64(prompts::kPromptVersion.data(), prompts::kPromptVersion.size());
    h = fnv1a64(serialized.data(), serialized.size(), h);
    return h;
}

GenerationRequest SimulatedUser::scoring_request(std::span<const Utterance> history,
                                                 const Item& item) const {
    GenerationRequest request;
    request.messages =
        prompts::scoring_messages(history, format_item_with_attributes(item));
    request.temperature = 0.0;
    request.max_new_tokens = 1;
    request.want_token_alternatives = true;
    request.alternatives_top_k = config_.alternatives_top_k;
    request.assistant_prefix = config_.question;
    return request;
}

double SimulatedUser::store_result(std::uint64_t digest, int item_id,
                                   const GenerationResult& result) {
    if (!result.first_token_alternatives) {
        throw ProtocolError("scoring backend returned no token alternatives");
    }
    const ScoreExtraction extraction =
        extract_score(*result.first_token_alternatives, config_);
    std::lock_guard<std::mutex> lock(mutex_);
    if (extraction.fallback) ++stats_.scoring_fallbacks;
    // First writer wins; a concurrent duplicate computed the same value.
    auto [it, inserted] = cache_[digest].emplace(item_id, extraction.score);
    return it->second;
}

ScoredItem SimulatedUser::score_item(std::span<const Utterance> history, const Item& item) {
    const std::uint64_t digest = history_digest(history);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto by_item = cache_.find(digest);
        if (by_item != cache_.end()) {
            auto hit = by_item->second.find(item.item_id);
            if (hit != by_item->second.end()) {
                ++stats_.scoring_cache_hits;
                return {item.item_id, hit->second};
            }
        }
        ++stats_.scoring_backend_calls;
    }
    const GenerationResult result = generate(backend_, scoring_request(history, item), retry_);
    return {item.item_id, store_result(digest, item.item_id, result)};
}

ScoringOutcome SimulatedUser::score_list(std::span<const Utterance> history,
                                         const SearchState& state) {
    const SearchState* ptr = &state;
    return score_lists(history, std::span<const SearchState* const>(&ptr, 1)).front();
}

std::vector<ScoringOutcome> SimulatedUser::score_lists(
    std::span<const Utterance> history, std::span<const SearchState* const> states) {
    const std::uint64_t digest = history_digest(history);

    // Pass 1: find the items that genuinely need a backend call, in first
    // occurrence order. Everything else is served from the cache.
    std::vector<int> missing;
    std::size_t total_pairs = 0;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto& by_item = cache_[digest];
        std::unordered_map<int, bool> queued;
        for (const SearchState* state : states) {
            for (int item_id : state->items) {
                ++total_pairs;
                if (by_item.contains(item_id)) continue;
                if (!queued.emplace(item_id, true).second) continue;
                missing.push_back(item_id);
            }
        }
        stats_.scoring_cache_hits += total_pairs - missing.size();
        stats_.scoring_backend_calls += missing.size();
    }

    if (!missing.empty()) {
        std::vector<GenerationRequest> requests;
        requests.reserve(missing.size());
        for (int item_id : missing) {
            requests.push_back(scoring_request(history, catalog_.at(item_id)));
        }
        const std::vector<BatchOutcome> outcomes =
            generate_batch(backend_, requests, max_concurrency_, retry_);
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            if (!outcomes[i].ok()) {
                throw GatewayError("scoring item " + std::to_string(missing[i]) +
                                   " failed: " + outcomes[i].error);
            }
            store_result(digest, missing[i], *outcomes[i].result);
        }
    }

    std::vector<ScoringOutcome> result;
    result.reserve(states.size());
    std::lock_guard<std::mutex> lock(mutex_);
    const auto& by_item = cache_.at(digest);
    for (const SearchState* state : states) {
        ScoringOutcome outcome;
        outcome.per_item.reserve(state->items.size());
        double sum = 0.0;
        for (int item_id : state->items) {
            const double score = by_item.at(item_id);
            outcome.per_item.push_back({item_id, score});
            sum += score;
        }
        outcome.aggregate = outcome.per_item.empty()
                                ? 0.0
                                : sum / static_cast<double>(outcome.per_item.size());
        result.push_back(std::move(outcome));
    }
    return result;
}

GenerationRequest SimulatedUser::critique_request(std::span<const Utterance> history,
                                                  const SearchState& state,
                                                  double temperature,
                                                  std::optional<std::uint64_t> seed) const {
    std::vector<std::string> lines;
    lines.reserve(state.items.size());
    for (int item_id : state.items) {
        lines.push_back(format_item_with_attributes(catalog_.at(item_id)));
    }
    GenerationRequest request;
    request.messages = prompts::critique_messages(history, lines);
    request.temperature = temperature;
    request.max_new_tokens = 256;
    request.seed = seed;
    return request;
}

namespace {

std::string trimmed(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

Critique SimulatedUser::critique_list(std::span<const Utterance> history,
                                      const SearchState& state, double temperature,
                                      std::optional<std::uint64_t> seed) {
    CritiqueTask task{&state, temperature, seed};
    return critique_batch(history, std::span<const CritiqueTask>(&task, 1)).front();
}

std::vector<Critique> SimulatedUser::critique_batch(std::span<const Utterance> history,
                                                    std::span<const CritiqueTask> tasks) {
    std::vector<GenerationRequest> requests;
    requests.reserve(tasks.size());
    for (const CritiqueTask& task : tasks) {
        requests.push_back(
            critique_request(history, *task.state, task.temperature, task.seed));
    }
    const std::vector<BatchOutcome> outcomes =
        generate_batch(backend_, requests, max_concurrency_, retry_);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        stats_.critique_calls += tasks.size();
    }

    std::vector<Critique> critiques;
    critiques.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!outcomes[i].ok()) {
            throw GatewayError("critique of state " +
                               std::to_string(tasks[i].state->state_id) +
                               " failed: " + outcomes[i].error);
        }
        std::string text = trimmed(outcomes[i].result->text);
        if (text.empty()) {
            // One retry with a perturbed seed; a second empty reply is fatal.
            GenerationRequest retry_request = requests[i];
            retry_request.seed = tasks[i].seed.value_or(0) ^ 0x9E3779B97F4A7C15ULL;
            const GenerationResult retried = generate(backend_, retry_request, retry_);
            {
                std::lock_guard<std::mutex> lock(mutex_);
                ++stats_.critique_calls;
            }
            text = trimmed(retried.text);
            if (text.empty()) {
                throw GatewayError("critique of state " +
                                   std::to_string(tasks[i].state->state_id) +
                                   " came back empty twice");
            }
        }
        critiques.push_back({std::move(text), tasks[i].state->state_id});
    }
    return critiques;
}

SimulatedUserStats SimulatedUser::stats() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return stats_;
}

}  // namespace recsearch
