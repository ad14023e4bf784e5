#include "recsearch/search.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "recsearch/errors.hpp"
#include "recsearch/rng.hpp"

namespace recsearch {

std::string_view strategy_name(SearchStrategy s) {
    switch (s) {
        case SearchStrategy::Beam: return "beam";
        case SearchStrategy::GreedySmall: return "greedy_small";
        case SearchStrategy::GreedyLarge: return "greedy_large";
        case SearchStrategy::MonteCarlo: return "monte_carlo";
    }
    throw ValidationError("unknown search strategy");
}

SearchStrategy strategy_from_name(std::string_view name) {
    if (name == "beam") return SearchStrategy::Beam;
    if (name == "greedy_small") return SearchStrategy::GreedySmall;
    if (name == "greedy_large") return SearchStrategy::GreedyLarge;
    if (name == "monte_carlo") return SearchStrategy::MonteCarlo;
    throw ConfigError("unknown search strategy: " + std::string(name));
}

int SearchConfig::expected_scored_states() const {
    return resolved_init_count() + (depth - 1) * beam_width * expand_width;
}

void SearchConfig::validate() const {
    if (beam_width < 1) throw ConfigError("search: beam_width must be >= 1");
    if (expand_width < beam_width) {
        throw ConfigError("search: expand_width must be >= beam_width");
    }
    if (depth < 1) throw ConfigError("search: depth must be >= 1");
    if (list_length < 1) throw ConfigError("search: list_length must be >= 1");
    if (resolved_init_count() < beam_width) {
        throw ConfigError("search: init_count must be >= beam_width");
    }
    if (init_temperature < 0 || critique_temperature < 0 || revision_temperature < 0) {
        throw ConfigError("search: temperatures must be >= 0");
    }
    if (max_concurrency < 1) throw ConfigError("search: max_concurrency must be >= 1");
}

SearchConfig resolve_strategy(SearchConfig config, SearchStrategy strategy) {
    config.init_count = config.resolved_init_count();
    switch (strategy) {
        case SearchStrategy::Beam:
            break;
        case SearchStrategy::MonteCarlo:
            config.depth = 1;
            break;
        case SearchStrategy::GreedySmall:
            config.beam_width = 1;
            break;
        case SearchStrategy::GreedyLarge:
            config.expand_width = config.beam_width * config.expand_width;
            config.beam_width = 1;
            break;
    }
    config.validate();
    return config;
}

double reward_of(const SearchState& state) {
    if (!state.reward) {
        throw SearchError("state " + std::to_string(state.state_id) + " is not scored");
    }
    return *state.reward;
}

SearchEngine::SearchEngine(Backend& crs_backend, SimulatedUser& user,
                           const ItemCatalog& catalog, SearchConfig config,
                           RetryPolicy retry)
    : crs_(crs_backend), user_(user), catalog_(catalog), config_(config), retry_(retry) {
    config_.validate();
}

GenerationRequest SearchEngine::revision_request(std::span<const Utterance> history,
                                                 const SearchState& parent,
                                                 const Critique& critique,
                                                 double temperature,
                                                 std::uint64_t seed) const {
    RecommendationPrompt prompt;
    prompt.history.assign(history.begin(), history.end());
    prompt.list_length = config_.list_length;
    std::vector<Item> previous;
    previous.reserve(parent.items.size());
    for (int item_id : parent.items) previous.push_back(catalog_.at(item_id));
    prompt.previous_list = std::move(previous);
    prompt.feedback = critique.text;

    GenerationRequest request;
    request.messages = render_recommendation_prompt(prompt);
    request.temperature = temperature;
    request.max_new_tokens = 512;
    request.seed = seed;
    return request;
}

SearchState SearchEngine::assemble_child(const std::string& reply,
                                         const SearchState& parent,
                                         const Critique& critique) {
    std::vector<int> items = parse_and_ground(reply, catalog_, config_.list_length);

    if (items.size() < static_cast<std::size_t>(config_.list_length)) {
        if (!parent.scored()) {
            throw SearchError("cannot top up a short child: parent " +
                              std::to_string(parent.state_id) + " is unscored");
        }
        // Parent items by score descending, list position breaking ties.
        std::vector<std::size_t> order(parent.items.size());
        std::iota(order.begin(), order.end(), 0);
        const std::vector<double>& scores = *parent.per_item_scores;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (scores[a] != scores[b]) return scores[a] > scores[b];
            return a < b;
        });
        for (std::size_t idx : order) {
            if (items.size() >= static_cast<std::size_t>(config_.list_length)) break;
            const int candidate = parent.items[idx];
            if (std::find(items.begin(), items.end(), candidate) == items.end()) {
                items.push_back(candidate);
            }
        }
    }

    SearchState child;
    child.state_id = ids_.next();
    child.items = std::move(items);
    child.depth = parent.depth + 1;
    child.parent_state_id = parent.state_id;
    child.critique_used = critique;
    child.validate();
    return child;
}

SearchState SearchEngine::transition(std::span<const Utterance> history,
                                     const SearchState& parent, const Critique& critique,
                                     std::uint64_t seed) {
    const GenerationResult result = generate(
        crs_, revision_request(history, parent, critique, config_.revision_temperature, seed),
        retry_);
    return assemble_child(result.text, parent, critique);
}

SearchTrace SearchEngine::run(std::span<const Utterance> history, SearchStrategy strategy) {
    const SearchConfig cfg = resolve_strategy(config_, strategy);
    SearchTrace trace;
    trace.strategy = strategy;
    trace.config = cfg;
    const SimulatedUserStats stats_base = user_.stats();

    // Indices into trace.all_states of the states awaiting scoring.
    std::vector<std::size_t> frontier;

    try {
        // Initial lists: init_count independent samples from the recommender.
        RecommendationPrompt initial;
        initial.history.assign(history.begin(), history.end());
        initial.list_length = cfg.list_length;
        const std::vector<ChatMessage> initial_messages =
            render_recommendation_prompt(initial);

        std::vector<GenerationRequest> requests;
        requests.reserve(static_cast<std::size_t>(cfg.resolved_init_count()));
        for (int i = 0; i < cfg.resolved_init_count(); ++i) {
            GenerationRequest request;
            request.messages = initial_messages;
            request.temperature = cfg.init_temperature;
            request.max_new_tokens = 512;
            request.seed = derive_seed(cfg.master_seed, SeedStream::InitialLists, 0,
                                       static_cast<std::uint64_t>(i));
            requests.push_back(std::move(request));
        }
        std::vector<BatchOutcome> outcomes =
            generate_batch(crs_, requests, cfg.max_concurrency, retry_);
        trace.calls.recommendation_calls += requests.size();
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            if (!outcomes[i].ok()) {
                throw GatewayError("initial list " + std::to_string(i) +
                                   " failed: " + outcomes[i].error);
            }
            SearchState state;
            state.state_id = ids_.next();
            state.items = parse_and_ground(outcomes[i].result->text, catalog_,
                                           cfg.list_length);
            state.validate();
            frontier.push_back(trace.all_states.size());
            trace.all_states.push_back(std::move(state));
        }

        for (int iteration = 1; iteration <= cfg.depth; ++iteration) {
            // Score the frontier. score_lists dedups across lists, so every
            // repeated item is a cache hit rather than a new prompt.
            std::vector<const SearchState*> pointers;
            pointers.reserve(frontier.size());
            for (std::size_t idx : frontier) pointers.push_back(&trace.all_states[idx]);
            const std::vector<ScoringOutcome> scored = user_.score_lists(history, pointers);
            for (std::size_t k = 0; k < frontier.size(); ++k) {
                SearchState& state = trace.all_states[frontier[k]];
                std::vector<double> scores;
                scores.reserve(scored[k].per_item.size());
                for (const ScoredItem& si : scored[k].per_item) scores.push_back(si.score);
                state.per_item_scores = std::move(scores);
                state.reward = scored[k].aggregate;
                state.validate();
                trace.scored_state_ids.push_back(state.state_id);
            }

            // Retain the beam_width best by reward; ties go to the older state.
            std::vector<std::size_t> retained = frontier;
            std::sort(retained.begin(), retained.end(), [&](std::size_t a, std::size_t b) {
                const SearchState& sa = trace.all_states[a];
                const SearchState& sb = trace.all_states[b];
                if (*sa.reward != *sb.reward) return *sa.reward > *sb.reward;
                return sa.state_id < sb.state_id;
            });
            if (retained.size() > static_cast<std::size_t>(cfg.beam_width)) {
                retained.resize(static_cast<std::size_t>(cfg.beam_width));
            }
            std::vector<std::int64_t> retained_ids;
            retained_ids.reserve(retained.size());
            for (std::size_t idx : retained) {
                retained_ids.push_back(trace.all_states[idx].state_id);
            }
            trace.retained_per_iteration.push_back(std::move(retained_ids));

            if (iteration == cfg.depth) break;  // no expansion after the last scoring

            // Sample expand_width critiques per retained state, then revise.
            // Parents are tracked by index: all_states grows below and
            // pointers into it would dangle after a reallocation.
            std::vector<SimulatedUser::CritiqueTask> tasks;
            std::vector<std::size_t> task_parent;
            tasks.reserve(retained.size() * static_cast<std::size_t>(cfg.expand_width));
            task_parent.reserve(tasks.capacity());
            for (std::size_t idx : retained) {
                const SearchState& parent = trace.all_states[idx];
                for (int j = 0; j < cfg.expand_width; ++j) {
                    tasks.push_back({&parent, cfg.critique_temperature,
                                     derive_seed(cfg.master_seed, SeedStream::Critique,
                                                 static_cast<std::uint64_t>(parent.state_id),
                                                 static_cast<std::uint64_t>(j))});
                    task_parent.push_back(idx);
                }
            }
            const std::vector<Critique> critiques = user_.critique_batch(history, tasks);

            std::vector<GenerationRequest> revisions;
            revisions.reserve(tasks.size());
            for (std::size_t k = 0; k < tasks.size(); ++k) {
                const std::uint64_t j = k % static_cast<std::uint64_t>(cfg.expand_width);
                revisions.push_back(revision_request(
                    history, *tasks[k].state, critiques[k], cfg.revision_temperature,
                    derive_seed(cfg.master_seed, SeedStream::Revision,
                                static_cast<std::uint64_t>(tasks[k].state->state_id), j)));
            }
            std::vector<BatchOutcome> children =
                generate_batch(crs_, revisions, cfg.max_concurrency, retry_);
            trace.calls.recommendation_calls += revisions.size();

            frontier.clear();
            for (std::size_t k = 0; k < children.size(); ++k) {
                const SearchState& parent = trace.all_states[task_parent[k]];
                if (!children[k].ok()) {
                    throw GatewayError("revision of state " +
                                       std::to_string(parent.state_id) +
                                       " failed: " + children[k].error);
                }
                SearchState child =
                    assemble_child(children[k].result->text, parent, critiques[k]);
                frontier.push_back(trace.all_states.size());
                trace.all_states.push_back(std::move(child));
            }
        }
    } catch (const std::exception& e) {
        // Keep the partial trace; the caller decides what to do with it.
        trace.aborted = true;
        trace.abort_reason = e.what();
    }

    const SimulatedUserStats stats_now = user_.stats();
    trace.calls.critique_calls = stats_now.critique_calls - stats_base.critique_calls;
    trace.calls.scoring_calls =
        stats_now.scoring_backend_calls - stats_base.scoring_backend_calls;
    trace.calls.scoring_cache_hits =
        stats_now.scoring_cache_hits - stats_base.scoring_cache_hits;
    trace.calls.scoring_fallbacks =
        stats_now.scoring_fallbacks - stats_base.scoring_fallbacks;
    return trace;
}

namespace {

nlohmann::json state_to_json(const SearchState& state) {
    nlohmann::json j;
    j["state_id"] = state.state_id;
    j["items"] = state.items;
    if (state.per_item_scores) j["per_item_scores"] = *state.per_item_scores;
    if (state.reward) j["reward"] = *state.reward;
    j["depth"] = state.depth;
    if (state.parent_state_id) j["parent_state_id"] = *state.parent_state_id;
    if (state.critique_used) {
        j["critique"] = {{"text", state.critique_used->text},
                         {"sampled_from_state", state.critique_used->sampled_from_state}};
    }
    return j;
}

SearchState state_from_json(const nlohmann::json& j) {
    SearchState state;
    state.state_id = j.at("state_id").get<std::int64_t>();
    state.items = j.at("items").get<std::vector<int>>();
    if (j.contains("per_item_scores")) {
        state.per_item_scores = j["per_item_scores"].get<std::vector<double>>();
    }
    if (j.contains("reward")) state.reward = j["reward"].get<double>();
    state.depth = j.at("depth").get<int>();
    if (j.contains("parent_state_id")) {
        state.parent_state_id = j["parent_state_id"].get<std::int64_t>();
    }
    if (j.contains("critique")) {
        state.critique_used =
            Critique{j["critique"].at("text").get<std::string>(),
                     j["critique"].at("sampled_from_state").get<std::int64_t>()};
    }
    return state;
}

// max_concurrency is deliberately left out: it is an execution knob that
// never changes the result, and traces must be byte-identical across
// concurrency levels.
nlohmann::json config_to_json(const SearchConfig& cfg) {
    return {{"beam_width", cfg.beam_width},
            {"expand_width", cfg.expand_width},
            {"depth", cfg.depth},
            {"init_count", cfg.resolved_init_count()},
            {"list_length", cfg.list_length},
            {"init_temperature", cfg.init_temperature},
            {"critique_temperature", cfg.critique_temperature},
            {"revision_temperature", cfg.revision_temperature},
            {"master_seed", cfg.master_seed}};
}

SearchConfig config_from_json(const nlohmann::json& j) {
    SearchConfig cfg;
    cfg.beam_width = j.at("beam_width").get<int>();
    cfg.expand_width = j.at("expand_width").get<int>();
    cfg.depth = j.at("depth").get<int>();
    cfg.init_count = j.at("init_count").get<int>();
    cfg.list_length = j.at("list_length").get<int>();
    cfg.init_temperature = j.at("init_temperature").get<double>();
    cfg.critique_temperature = j.at("critique_temperature").get<double>();
    cfg.revision_temperature = j.at("revision_temperature").get<double>();
    cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    return cfg;
}

}  // namespace

std::string trace_to_json(const SearchTrace& trace) {
    nlohmann::json j;
    j["strategy"] = std::string(strategy_name(trace.strategy));
    j["config"] = config_to_json(trace.config);
    nlohmann::json states = nlohmann::json::array();
    for (const SearchState& state : trace.all_states) states.push_back(state_to_json(state));
    j["states"] = std::move(states);
    j["scored_state_ids"] = trace.scored_state_ids;
    j["retained_per_iteration"] = trace.retained_per_iteration;
    j["call_counts"] = {{"recommendation", trace.calls.recommendation_calls},
                        {"critique", trace.calls.critique_calls},
                        {"scoring", trace.calls.scoring_calls},
                        {"scoring_cache_hits", trace.calls.scoring_cache_hits},
                        {"scoring_fallbacks", trace.calls.scoring_fallbacks}};
    j["aborted"] = trace.aborted;
    j["abort_reason"] = trace.abort_reason;
    return j.dump(2) + "\n";
}

SearchTrace trace_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("trace: bad JSON: ") + e.what());
    }
    try {
        SearchTrace trace;
        trace.strategy = strategy_from_name(j.at("strategy").get<std::string>());
        trace.config = config_from_json(j.at("config"));
        for (const auto& js : j.at("states")) {
            trace.all_states.push_back(state_from_json(js));
        }
        trace.scored_state_ids = j.at("scored_state_ids").get<std::vector<std::int64_t>>();
        trace.retained_per_iteration =
            j.at("retained_per_iteration").get<std::vector<std::vector<std::int64_t>>>();
        const auto& calls = j.at("call_counts");
        trace.calls.recommendation_calls = calls.at("recommendation").get<std::uint64_t>();
        trace.calls.critique_calls = calls.at("critique").get<std::uint64_t>();
        trace.calls.scoring_calls = calls.at("scoring").get<std::uint64_t>();
        trace.calls.scoring_cache_hits =
            calls.at("scoring_cache_hits").get<std::uint64_t>();
        trace.calls.scoring_fallbacks =
            calls.at("scoring_fallbacks").get<std::uint64_t>();
        trace.aborted = j.at("aborted").get<bool>();
        trace.abort_reason = j.at("abort_reason").get<std::string>();
        return trace;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("trace: unexpected shape: ") + e.what());
    }
}

}  // namespace recsearch
