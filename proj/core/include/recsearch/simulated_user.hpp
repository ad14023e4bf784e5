#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "recsearch/catalog.hpp"
#include "recsearch/domain.hpp"
#include "recsearch/gateway.hpp"

namespace recsearch {

// How the Yes/No decision token is asked for and recognized. Token matching
// ignores case and leading whitespace, so " Yes", "yes" and "YES" all count.
struct RewardTokenConfig {
    std::string question = "Accept the recommendation (Yes/No)?";
    std::string positive_token = "Yes";
    std::string negative_token = "No";
    int alternatives_top_k = 10;
};

bool reward_token_matches(std::string_view token_text, std::string_view option);

// Alternatives with less than this much combined Yes+No mass cannot be
// renormalized meaningfully; the item then scores 0 and a fallback is counted.
inline constexpr double kMinDecisionTokenMass = 1e-6;

struct ScoreExtraction {
    double score = 0.0;
    bool fallback = false;
};

// P(Yes) renormalized over the Yes/No options: sum the probability of every
// alternative matching each option, then yes / (yes + no).
ScoreExtraction extract_score(std::span<const TokenProbability> alternatives,
                              const RewardTokenConfig& config);

struct ScoringOutcome {
    std::vector<ScoredItem> per_item;
    double aggregate = 0.0;  // mean of per-item scores; 0 for an empty list
};

struct SimulatedUserStats {
    std::uint64_t scoring_backend_calls = 0;
    std::uint64_t scoring_cache_hits = 0;
    std::uint64_t scoring_fallbacks = 0;
    std::uint64_t critique_calls = 0;
};

// The reward and action side of the loop: per-item Yes/No scoring with a
// memo cache, and critique sampling. One instance is safe to share across
// the threads of a single search run.
class SimulatedUser {
  public:
    SimulatedUser(Backend& backend, const ItemCatalog& catalog,
                  RewardTokenConfig config = {}, int max_concurrency = 1,
                  RetryPolicy retry = {});

    ScoredItem score_item(std::span<const Utterance> history, const Item& item);

    ScoringOutcome score_list(std::span<const Utterance> history, const SearchState& state);

    // Scores many lists sharing one history. Each distinct item is fetched
    // from the backend at most once; every other (list, item) pair is a
    // cache hit. Outcomes are in input order.
    std::vector<ScoringOutcome> score_lists(std::span<const Utterance> history,
                                            std::span<const SearchState* const> states);

    Critique critique_list(std::span<const Utterance> history, const SearchState& state,
                           double temperature, std::optional<std::uint64_t> seed);

    struct CritiqueTask {
        const SearchState* state = nullptr;
        double temperature = 1.0;
        std::optional<std::uint64_t> seed;
    };

    // Batched critiques in task order. An empty generation is retried once
    // with a perturbed seed before failing.
    std::vector<Critique> critique_batch(std::span<const Utterance> history,
                                         std::span<const CritiqueTask> tasks);

    SimulatedUserStats stats() const;
    const RewardTokenConfig& config() const { return config_; }

  private:
    std::uint64_t history_digest(std::span<const Utterance> history) const;
    GenerationRequest scoring_request(std::span<const Utterance> history,
                                      const Item& item) const;
    GenerationRequest critique_request(std::span<const Utterance> history,
                                       const SearchState& state, double temperature,
                                       std::optional<std::uint64_t> seed) const;
    double store_result(std::uint64_t digest, int item_id, const GenerationResult& result);

    Backend& backend_;
    const ItemCatalog& catalog_;
    RewardTokenConfig config_;
    int max_concurrency_;
    RetryPolicy retry_;

    // (history digest, item id) -> score. The digest covers the prompt
    // version, so template changes cannot serve stale scores.
    mutable std::mutex mutex_;
    std::unordered_map<std::uint64_t, std::unordered_map<int, double>> cache_;
    SimulatedUserStats stats_;
};

}  // namespace recsearch
