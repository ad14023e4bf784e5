#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "recsearch/errors.hpp"
#include "recsearch/scripted_backend.hpp"
#include "recsearch/search.hpp"
#include "recsearch/simulated_user.hpp"
#include "testutil.hpp"

using namespace recsearch;

namespace {

Item make_item(int id, std::string title, std::vector<std::string> genres = {}) {
    Item item;
    item.item_id = id;
    item.title = std::move(title);
    item.values(AttributeKind::Genre) = std::move(genres);
    return item;
}

ItemCatalog toy_catalog() {
    return ItemCatalog({
        make_item(0, "Alpha (2000)", {"action"}),
        make_item(1, "Beta (2001)", {"action", "comedy"}),
        make_item(2, "Gamma (2002)", {"comedy"}),
        make_item(3, "Delta (2003)", {"drama"}),
        make_item(4, "Epsilon (2004)", {"action", "comedy", "drama"}),
    });
}

std::vector<Utterance> action_comedy_history() {
    return {{Speaker::Seeker, "I love action and comedy movies.", {}}};
}

ItemCatalog generated_catalog(int count) {
    std::vector<Item> items;
    items.reserve(static_cast<std::size_t>(count));
    for (int id = 0; id < count; ++id) {
        char title[32];
        std::snprintf(title, sizeof(title), "Item %04d (%d)", id, 1950 + id % 60);
        items.push_back(make_item(id, title, {"drama"}));
    }
    return ItemCatalog(std::move(items));
}

SearchConfig small_config() {
    SearchConfig config;
    config.beam_width = 2;
    config.expand_width = 2;
    config.depth = 3;
    config.init_count = 0;  // resolves to 4
    config.list_length = 3;
    config.init_temperature = 0.7;
    config.critique_temperature = 1.0;
    config.revision_temperature = 0.3;
    config.master_seed = 7;
    config.max_concurrency = 2;
    return config;
}

// Runs the small scripted scenario from scratch so consecutive runs share
// no scoring cache.
SearchTrace run_small(SearchConfig config, SearchStrategy strategy = SearchStrategy::Beam,
                      const ItemCatalog* catalog_override = nullptr) {
    static const ItemCatalog catalog = toy_catalog();
    const ItemCatalog& cat = catalog_override ? *catalog_override : catalog;
    ScriptedCrsBackend crs(cat, {config.list_length});
    ScriptedUserConfig user_config;
    user_config.target_attributes = {"action", "comedy"};
    ScriptedUserBackend user_backend(cat, user_config);
    SimulatedUser user(user_backend, cat, {}, config.max_concurrency);
    SearchEngine engine(crs, user, cat, config);
    return engine.run(action_comedy_history(), strategy);
}

// Parent with chosen items and scores; reward kept consistent with validate().
SearchState scored_parent(std::int64_t id, std::vector<int> items,
                          std::vector<double> scores) {
    SearchState state;
    state.state_id = id;
    state.items = std::move(items);
    double sum = 0.0;
    for (double s : scores) sum += s;
    state.reward = scores.empty() ? 0.0 : sum / static_cast<double>(scores.size());
    state.per_item_scores = std::move(scores);
    state.validate();
    return state;
}

std::string numbered_titles(const ItemCatalog& catalog, const std::vector<int>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out += std::to_string(i + 1) + ". " + catalog.at(ids[i]).title + "\n";
    }
    return out;
}

}  // namespace

TEST_CASE("strategy names round-trip") {
    for (SearchStrategy s : {SearchStrategy::Beam, SearchStrategy::GreedySmall,
                             SearchStrategy::GreedyLarge, SearchStrategy::MonteCarlo}) {
        CHECK(strategy_from_name(strategy_name(s)) == s);
    }
    CHECK(strategy_name(SearchStrategy::Beam) == "beam");
    CHECK(strategy_name(SearchStrategy::MonteCarlo) == "monte_carlo");
    CHECK_THROWS_AS(strategy_from_name("depth_first"), ConfigError);
}

TEST_CASE("scored state counts follow the budget formula") {
    SearchConfig config;
    config.beam_width = 4;
    config.expand_width = 4;
    config.depth = 5;
    CHECK(config.resolved_init_count() == 16);
    CHECK(config.expected_scored_states() == 80);

    config.depth = 1;
    CHECK(config.expected_scored_states() == 16);

    SearchConfig narrow;
    narrow.beam_width = 1;
    narrow.expand_width = 4;
    narrow.depth = 3;
    narrow.init_count = 16;
    CHECK(narrow.expected_scored_states() == 24);
}

TEST_CASE("config validation rejects out-of-range knobs") {
    const SearchConfig base = small_config();

    SearchConfig c = base;
    c.beam_width = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = base;
    c.beam_width = 3;
    c.expand_width = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = base;
    c.depth = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = base;
    c.list_length = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = base;
    c.init_count = 1;  // below beam_width 2
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = base;
    c.revision_temperature = -0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = base;
    c.max_concurrency = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    CHECK_NOTHROW(base.validate());
}

TEST_CASE("strategy presets resolve onto the base config") {
    SearchConfig base;
    base.beam_width = 4;
    base.expand_width = 4;
    base.depth = 5;
    base.init_count = 0;

    SUBCASE("beam only materializes the init count") {
        const SearchConfig r = resolve_strategy(base, SearchStrategy::Beam);
        CHECK(r.init_count == 16);
        CHECK(r.beam_width == 4);
        CHECK(r.expand_width == 4);
        CHECK(r.depth == 5);
    }
    SUBCASE("monte_carlo runs a single iteration") {
        const SearchConfig r = resolve_strategy(base, SearchStrategy::MonteCarlo);
        CHECK(r.depth == 1);
        CHECK(r.init_count == 16);
        CHECK(r.expected_scored_states() == 16);
    }
    SUBCASE("greedy_small keeps one state per iteration") {
        const SearchConfig r = resolve_strategy(base, SearchStrategy::GreedySmall);
        CHECK(r.beam_width == 1);
        CHECK(r.expand_width == 4);
        CHECK(r.expected_scored_states() == 16 + 4 * 4);
    }
    SUBCASE("greedy_large matches the beam budget with one wide state") {
        const SearchConfig r = resolve_strategy(base, SearchStrategy::GreedyLarge);
        CHECK(r.beam_width == 1);
        CHECK(r.expand_width == 16);
        // The init count comes from the original expand width, not the
        // widened one: 4*4, never 16*16.
        CHECK(r.init_count == 16);
        CHECK(r.expected_scored_states() == base.expected_scored_states());
    }
    SUBCASE("presets still validate the result") {
        SearchConfig bad = base;
        bad.init_count = 2;  // below beam_width after resolution
        CHECK_THROWS_AS(resolve_strategy(bad, SearchStrategy::Beam), ConfigError);
    }
}

TEST_CASE("reward_of requires a scored state") {
    SearchState state;
    state.state_id = 9;
    state.items = {1, 2};
    CHECK_THROWS_AS(reward_of(state), SearchError);

    const SearchState scored = scored_parent(9, {1, 2}, {0.25, 0.75});
    CHECK(reward_of(scored) == doctest::Approx(0.5));
}

TEST_CASE("a beam run produces the budgeted tree") {
    const SearchConfig config = small_config();
    const SearchTrace trace = run_small(config);

    REQUIRE_FALSE(trace.aborted);
    CHECK(trace.config.init_count == 4);
    CHECK(trace.all_states.size() == 12);
    CHECK(trace.scored_state_ids.size() ==
          static_cast<std::size_t>(trace.config.expected_scored_states()));

    // Creation order: ids are dense and ascending.
    for (std::size_t i = 0; i < trace.all_states.size(); ++i) {
        CHECK(trace.all_states[i].state_id == static_cast<std::int64_t>(i));
    }
    CHECK(std::is_sorted(trace.scored_state_ids.begin(), trace.scored_state_ids.end()));

    // Every state is scored, carries exactly list_length distinct items, and
    // passes its own invariants.
    for (const SearchState& state : trace.all_states) {
        CHECK(state.scored());
        CHECK(state.items.size() == 3);
        CHECK_NOTHROW(state.validate());
        for (int id : state.items) {
            CHECK(id >= 0);
            CHECK(id < 5);
        }
    }

    // Depth structure: 4 roots, then beam*expand children per iteration.
    std::map<int, int> per_depth;
    for (const SearchState& state : trace.all_states) ++per_depth[state.depth];
    CHECK(per_depth[0] == 4);
    CHECK(per_depth[1] == 4);
    CHECK(per_depth[2] == 4);

    REQUIRE(trace.retained_per_iteration.size() == 3);
    for (const auto& retained : trace.retained_per_iteration) {
        CHECK(retained.size() == 2);
    }
}

TEST_CASE("retained states are exactly the top of each scored generation") {
    const SearchTrace trace = run_small(small_config());
    REQUIRE_FALSE(trace.aborted);

    std::map<int, std::vector<const SearchState*>> by_depth;
    for (const SearchState& state : trace.all_states) {
        by_depth[state.depth].push_back(&state);
    }
    REQUIRE(by_depth.size() == trace.retained_per_iteration.size());

    for (std::size_t d = 0; d < trace.retained_per_iteration.size(); ++d) {
        std::vector<const SearchState*> generation = by_depth[static_cast<int>(d)];
        std::sort(generation.begin(), generation.end(),
                  [](const SearchState* a, const SearchState* b) {
                      if (*a->reward != *b->reward) return *a->reward > *b->reward;
                      return a->state_id < b->state_id;
                  });
        const auto& retained = trace.retained_per_iteration[d];
        REQUIRE(retained.size() <= generation.size());
        for (std::size_t i = 0; i < retained.size(); ++i) {
            CHECK(retained[i] == generation[i]->state_id);
        }
    }
}

TEST_CASE("children descend from retained parents") {
    const SearchTrace trace = run_small(small_config());
    REQUIRE_FALSE(trace.aborted);

    std::map<std::int64_t, const SearchState*> by_id;
    for (const SearchState& state : trace.all_states) by_id[state.state_id] = &state;

    for (const SearchState& state : trace.all_states) {
        if (state.depth == 0) {
            CHECK_FALSE(state.parent_state_id.has_value());
            CHECK_FALSE(state.critique_used.has_value());
            continue;
        }
        REQUIRE(state.parent_state_id.has_value());
        REQUIRE(state.critique_used.has_value());
        const SearchState* parent = by_id.at(*state.parent_state_id);
        CHECK(state.depth == parent->depth + 1);
        // The critique that produced this child was sampled from its parent.
        CHECK(state.critique_used->sampled_from_state == parent->state_id);
        CHECK_FALSE(state.critique_used->text.empty());

        const auto& retained = trace.retained_per_iteration[static_cast<std::size_t>(
            parent->depth)];
        CHECK(std::find(retained.begin(), retained.end(), parent->state_id) !=
              retained.end());
    }
}

TEST_CASE("call counts add up for a beam run") {
    const SearchTrace trace = run_small(small_config());
    REQUIRE_FALSE(trace.aborted);

    // 4 initial lists + 2 expansion rounds of beam*expand revisions.
    CHECK(trace.calls.recommendation_calls == 4 + 2 * 4);
    CHECK(trace.calls.critique_calls == 2 * 4);
    // 12 scored lists of 3 items; only 5 distinct items exist, so the cache
    // absorbs everything beyond the first fetch of each.
    CHECK(trace.calls.scoring_calls + trace.calls.scoring_cache_hits == 12 * 3);
    CHECK(trace.calls.scoring_calls <= 5);
    CHECK(trace.calls.scoring_fallbacks == 0);
}

TEST_CASE("a single-iteration run scores only initial lists") {
    const SearchTrace trace = run_small(small_config(), SearchStrategy::MonteCarlo);
    REQUIRE_FALSE(trace.aborted);

    CHECK(trace.config.depth == 1);
    CHECK(trace.all_states.size() == 4);
    CHECK(trace.scored_state_ids.size() == 4);
    CHECK(trace.retained_per_iteration.size() == 1);
    CHECK(trace.calls.critique_calls == 0);
    CHECK(trace.calls.recommendation_calls == 4);
    for (const SearchState& state : trace.all_states) CHECK(state.depth == 0);
}

TEST_CASE("greedy runs spend the same scoring budget as beam") {
    const SearchConfig config = small_config();
    const SearchTrace small = run_small(config, SearchStrategy::GreedySmall);
    REQUIRE_FALSE(small.aborted);
    CHECK(small.config.beam_width == 1);
    CHECK(small.scored_state_ids.size() == 4 + 2 * 2);
    for (const auto& retained : small.retained_per_iteration) {
        CHECK(retained.size() == 1);
    }

    const SearchTrace large = run_small(config, SearchStrategy::GreedyLarge);
    REQUIRE_FALSE(large.aborted);
    CHECK(large.config.beam_width == 1);
    CHECK(large.config.expand_width == 4);
    CHECK(large.config.init_count == 4);
    CHECK(large.scored_state_ids.size() == run_small(config).scored_state_ids.size());
}

TEST_CASE("traces are identical at any concurrency") {
    SearchConfig config = small_config();
    config.max_concurrency = 1;
    const std::string serial = trace_to_json(run_small(config));

    config.max_concurrency = 8;
    const std::string concurrent = trace_to_json(run_small(config));

    CHECK(serial == concurrent);
}

TEST_CASE("reruns with one seed repeat and other seeds differ") {
    const SearchConfig config = small_config();
    const std::string first = trace_to_json(run_small(config));
    const std::string second = trace_to_json(run_small(config));
    CHECK(first == second);

    bool any_different = false;
    for (std::uint64_t seed : {101ULL, 202ULL, 303ULL}) {
        SearchConfig other = small_config();
        other.master_seed = seed;
        if (trace_to_json(run_small(other)) != first) {
            any_different = true;
            break;
        }
    }
    CHECK(any_different);
}

TEST_CASE("transition tops a short reply up from the parent's best items") {
    const ItemCatalog catalog = generated_catalog(20);
    testutil::CallableBackend crs([&](const GenerationRequest&) {
        return testutil::text_result(
            numbered_titles(catalog, {10, 11, 12, 13, 14, 15, 16}));
    });
    ScriptedUserBackend user_backend(catalog, {});
    SimulatedUser user(user_backend, catalog);
    SearchConfig config = small_config();
    config.list_length = 10;
    SearchEngine engine(crs, user, catalog, config);

    const SearchState parent = scored_parent(
        5, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9},
        {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
    const Critique critique{"More recent ones please.", 5};

    const SearchState child =
        engine.transition(action_comedy_history(), parent, critique, 42);

    // Seven parsed items, then the parent's three best scores: 9, 8, 7.
    CHECK(child.items == std::vector<int>{10, 11, 12, 13, 14, 15, 16, 9, 8, 7});
    CHECK(child.depth == parent.depth + 1);
    CHECK(child.parent_state_id == parent.state_id);
    REQUIRE(child.critique_used.has_value());
    CHECK(child.critique_used->text == critique.text);
    CHECK_FALSE(child.scored());
}

TEST_CASE("top-up ties fall back to parent list order") {
    const ItemCatalog catalog = generated_catalog(20);
    testutil::CallableBackend crs([&](const GenerationRequest&) {
        return testutil::text_result(numbered_titles(catalog, {12}));
    });
    ScriptedUserBackend user_backend(catalog, {});
    SimulatedUser user(user_backend, catalog);
    SearchConfig config = small_config();
    config.list_length = 3;
    SearchEngine engine(crs, user, catalog, config);

    const SearchState parent = scored_parent(1, {5, 3, 8}, {0.4, 0.4, 0.4});
    const SearchState child =
        engine.transition(action_comedy_history(), parent, {"x", 1}, 0);
    CHECK(child.items == std::vector<int>{12, 5, 3});
}

TEST_CASE("a full reply needs no top-up and no parent scores") {
    const ItemCatalog catalog = generated_catalog(20);
    testutil::CallableBackend crs([&](const GenerationRequest&) {
        return testutil::text_result(numbered_titles(catalog, {7, 3, 19}));
    });
    ScriptedUserBackend user_backend(catalog, {});
    SimulatedUser user(user_backend, catalog);
    SearchConfig config = small_config();
    config.list_length = 3;
    SearchEngine engine(crs, user, catalog, config);

    SearchState parent;  // unscored is fine when the reply is complete
    parent.state_id = 2;
    parent.items = {0, 1, 2};

    const SearchState child =
        engine.transition(action_comedy_history(), parent, {"x", 2}, 0);
    CHECK(child.items == std::vector<int>{7, 3, 19});
}

TEST_CASE("a short reply under an unscored parent cannot be topped up") {
    const ItemCatalog catalog = generated_catalog(20);
    testutil::CallableBackend crs([&](const GenerationRequest&) {
        return testutil::text_result(numbered_titles(catalog, {12}));
    });
    ScriptedUserBackend user_backend(catalog, {});
    SimulatedUser user(user_backend, catalog);
    SearchConfig config = small_config();
    config.list_length = 3;
    SearchEngine engine(crs, user, catalog, config);

    SearchState parent;
    parent.state_id = 3;
    parent.items = {0, 1, 2};
    CHECK_THROWS_AS(engine.transition(action_comedy_history(), parent, {"x", 3}, 0),
                    SearchError);
}

TEST_CASE("revision honors the critique attribute") {
    const ItemCatalog catalog = toy_catalog();
    ScriptedCrsBackend crs(catalog, {3});
    ScriptedUserBackend user_backend(catalog, {});
    SimulatedUser user(user_backend, catalog);
    SearchConfig config = small_config();
    config.list_length = 3;
    config.revision_temperature = 0.0;
    SearchEngine engine(crs, user, catalog, config);

    const std::vector<Utterance> neutral = {{Speaker::Seeker, "Hello.", {}}};
    const SearchState parent = scored_parent(0, {3}, {0.5});
    const Critique critique{"More comedy.", 0};

    const SearchState child = engine.transition(neutral, parent, critique, 0);

    // Every comedy item outranks the rest once the feedback lands.
    CHECK(child.items == std::vector<int>{1, 2, 4});
    auto comedy_count = [&](const std::vector<int>& items) {
        int n = 0;
        for (int id : items) {
            const auto& genres = catalog.at(id).values(AttributeKind::Genre);
            if (std::find(genres.begin(), genres.end(), "comedy") != genres.end()) ++n;
        }
        return n;
    };
    CHECK(comedy_count(child.items) >= comedy_count(parent.items));
}

TEST_CASE("one (parent, critique, seed) triple always yields one child list") {
    const ItemCatalog catalog = toy_catalog();
    ScriptedCrsBackend crs(catalog, {3});
    ScriptedUserBackend user_backend(catalog, {});
    SimulatedUser user(user_backend, catalog);
    SearchConfig config = small_config();
    config.list_length = 3;
    config.revision_temperature = 1.5;
    SearchEngine engine(crs, user, catalog, config);

    const SearchState parent = scored_parent(0, {0, 1, 2}, {0.5, 0.5, 0.5});
    const Critique critique{"More drama.", 0};

    const SearchState a = engine.transition(action_comedy_history(), parent, critique, 99);
    const SearchState b = engine.transition(action_comedy_history(), parent, critique, 99);
    CHECK(a.items == b.items);

    std::set<std::vector<int>> distinct;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        distinct.insert(
            engine.transition(action_comedy_history(), parent, critique, seed).items);
    }
    CHECK(distinct.size() >= 2);
}

TEST_CASE("traces survive a JSON round-trip byte for byte") {
    const SearchTrace trace = run_small(small_config());
    const std::string text = trace_to_json(trace);

    const SearchTrace parsed = trace_from_json(text);
    CHECK(trace_to_json(parsed) == text);

    CHECK(parsed.strategy == trace.strategy);
    CHECK(parsed.all_states.size() == trace.all_states.size());
    CHECK(parsed.scored_state_ids == trace.scored_state_ids);
    CHECK(parsed.retained_per_iteration == trace.retained_per_iteration);
    CHECK(parsed.config.master_seed == trace.config.master_seed);
    CHECK(parsed.calls.recommendation_calls == trace.calls.recommendation_calls);
}

TEST_CASE("trace parsing rejects damaged input") {
    CHECK_THROWS_AS(trace_from_json("not json at all"), ParseError);
    CHECK_THROWS_AS(trace_from_json("{\"strategy\": \"beam\"}"), ParseError);
}

TEST_CASE("a failing recommender aborts the run but keeps the trace") {
    const ItemCatalog catalog = toy_catalog();
    testutil::CallableBackend crs([](const GenerationRequest&) -> GenerationResult {
        throw ProtocolError("recommender exploded");
    });
    ScriptedUserBackend user_backend(catalog, {});
    SimulatedUser user(user_backend, catalog);
    SearchEngine engine(crs, user, catalog, small_config());

    const SearchTrace trace = engine.run(action_comedy_history());
    CHECK(trace.aborted);
    CHECK(trace.abort_reason.find("initial list") != std::string::npos);
    CHECK(trace.all_states.empty());
    CHECK(trace.scored_state_ids.empty());
}

TEST_CASE("a failing scorer aborts after the initial lists") {
    const ItemCatalog catalog = toy_catalog();
    ScriptedCrsBackend crs(catalog, {3});
    testutil::CallableBackend user_backend(
        [](const GenerationRequest&) -> GenerationResult {
            throw ProtocolError("scorer exploded");
        });
    SimulatedUser user(user_backend, catalog);
    SearchEngine engine(crs, user, catalog, small_config());

    const SearchTrace trace = engine.run(action_comedy_history());
    CHECK(trace.aborted);
    CHECK(trace.abort_reason.find("scoring item") != std::string::npos);
    CHECK(trace.all_states.size() == 4);  // unscored roots survive
    CHECK(trace.scored_state_ids.empty());
    CHECK(trace.retained_per_iteration.empty());
}
