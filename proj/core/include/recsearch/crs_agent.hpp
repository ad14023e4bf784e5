#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recsearch/catalog.hpp"
#include "recsearch/domain.hpp"
#include "recsearch/gateway.hpp"

namespace recsearch {

// Inputs for one recommendation request. previous_list and feedback are
// either both present (revision mode) or both absent (initial mode).
struct RecommendationPrompt {
    std::vector<Utterance> history;
    std::optional<std::vector<Item>> previous_list;
    std::optional<std::string> feedback;
    int list_length = 10;
};

// Two messages: a system message carrying the task plus output format, and
// one user message with the tagged dialogue. Revision mode appends the
// numbered previous list (with attributes), the feedback line, and an
// explicit revision instruction to the user message; the initial-mode user
// content is a strict prefix of it.
std::vector<ChatMessage> render_recommendation_prompt(const RecommendationPrompt& prompt);

// Extracts numbered/bulleted lines from a model reply and grounds each in
// the catalog. Unmatched lines and duplicate items are dropped (first
// occurrence wins); the result is truncated to list_length and may be
// shorter when too few lines survive.
std::vector<int> parse_and_ground(const std::string& reply, const ItemCatalog& catalog,
                                  int list_length,
                                  double threshold = kDefaultFuzzyThreshold);

// Hands out state ids, strictly increasing from 0 within one search run.
class StateIdAllocator {
  public:
    std::int64_t next() { return next_.fetch_add(1); }

  private:
    std::atomic<std::int64_t> next_{0};
};

// Provenance for states produced in revision mode.
struct StateProvenance {
    int depth = 0;
    std::optional<std::int64_t> parent_state_id;
    std::optional<Critique> critique_used;
};

// Renders, generates, grounds, and wraps the result into an unscored state.
SearchState recommend(Backend& backend, const RecommendationPrompt& prompt,
                      const ItemCatalog& catalog, double temperature,
                      std::optional<std::uint64_t> seed, StateIdAllocator& ids,
                      const StateProvenance& provenance = {},
                      const RetryPolicy& retry = {});

}  // namespace recsearch
