#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recsearch/catalog.hpp"
#include "recsearch/crs_agent.hpp"
#include "recsearch/domain.hpp"
#include "recsearch/gateway.hpp"
#include "recsearch/simulated_user.hpp"

namespace recsearch {

enum class SearchStrategy { Beam, GreedySmall, GreedyLarge, MonteCarlo };

std::string_view strategy_name(SearchStrategy s);
SearchStrategy strategy_from_name(std::string_view name);

struct SearchConfig {
    int beam_width = 4;   // states retained per iteration
    int expand_width = 4; // children sampled per retained state
    int depth = 5;        // scoring iterations
    int init_count = 0;   // initial lists; 0 means expand_width^2
    int list_length = 10;
    double init_temperature = 1.0;
    double critique_temperature = 1.0;
    double revision_temperature = 1.0;
    std::uint64_t master_seed = 0;
    int max_concurrency = 4;

    int resolved_init_count() const {
        return init_count > 0 ? init_count : expand_width * expand_width;
    }
    // init_count + (depth - 1) * beam_width * expand_width
    int expected_scored_states() const;
    void validate() const;
};

// Applies a strategy preset: monte_carlo caps depth at 1; both greedy
// variants reduce the beam to one, and greedy_large additionally widens
// expansion to beam_width * expand_width so the total number of scored
// states matches plain beam search on the same base config.
SearchConfig resolve_strategy(SearchConfig config, SearchStrategy strategy);

struct SearchCallCounts {
    std::uint64_t recommendation_calls = 0;
    std::uint64_t critique_calls = 0;
    std::uint64_t scoring_calls = 0;  // actual backend calls, cache misses only
    std::uint64_t scoring_cache_hits = 0;
    std::uint64_t scoring_fallbacks = 0;
};

struct SearchTrace {
    SearchStrategy strategy = SearchStrategy::Beam;
    SearchConfig config;  // post strategy resolution, init_count resolved
    std::vector<SearchState> all_states;  // in creation (state_id) order
    std::vector<std::int64_t> scored_state_ids;
    std::vector<std::vector<std::int64_t>> retained_per_iteration;
    SearchCallCounts calls;
    bool aborted = false;
    std::string abort_reason;
};

std::string trace_to_json(const SearchTrace& trace);
SearchTrace trace_from_json(const std::string& text);

// The state's reward; throws SearchError when the state was never scored.
double reward_of(const SearchState& state);

// Drives one search episode over a fixed dialogue history. All sampling
// seeds derive from (master_seed, state_id, sample index), so results are
// bit-identical at any max_concurrency.
class SearchEngine {
  public:
    SearchEngine(Backend& crs_backend, SimulatedUser& user, const ItemCatalog& catalog,
                 SearchConfig config, RetryPolicy retry = {});

    SearchTrace run(std::span<const Utterance> history,
                    SearchStrategy strategy = SearchStrategy::Beam);

    // One revision step: asks the recommender to revise `parent` under
    // `critique`. A short reply is topped up with the parent's
    // highest-scored items that the child does not already contain.
    SearchState transition(std::span<const Utterance> history, const SearchState& parent,
                           const Critique& critique, std::uint64_t seed);

  private:
    GenerationRequest revision_request(std::span<const Utterance> history,
                                       const SearchState& parent, const Critique& critique,
                                       double temperature,
                                       std::uint64_t seed) const;
    SearchState assemble_child(const std::string& reply, const SearchState& parent,
                               const Critique& critique);

    Backend& crs_;
    SimulatedUser& user_;
    const ItemCatalog& catalog_;
    SearchConfig config_;
    RetryPolicy retry_;
    StateIdAllocator ids_;
};

}  // namespace recsearch
