// Command line front end: ingest, search, evaluate, synthesize, ablate.
// Every command writes a manifest with the effective settings, seeds and
// call counts (never timestamps), so a rerun with equal inputs produces
// byte-identical artifacts.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "recsearch/catalog.hpp"
#include "recsearch/config.hpp"
#include "recsearch/crs_agent.hpp"
#include "recsearch/domain.hpp"
#include "recsearch/errors.hpp"
#include "recsearch/gateway.hpp"
#include "recsearch/http_backend.hpp"
#include "recsearch/ingestion.hpp"
#include "recsearch/metrics.hpp"
#include "recsearch/prompts.hpp"
#include "recsearch/ranker.hpp"
#include "recsearch/rng.hpp"
#include "recsearch/scripted_backend.hpp"
#include "recsearch/search.hpp"
#include "recsearch/simulated_user.hpp"
#include "recsearch/synthesis.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace recsearch;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path.string());
    out << content;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_digest(const fs::path& path) {
    const std::string bytes = read_file(path);
    return hex16(fnv1a64(bytes.data(), bytes.size()));
}

// Stable per-turn artifact name: sanitized conv_id + "_turn" + index.
std::string turn_key(const RecommendationTurn& turn) {
    std::string key;
    key.reserve(turn.conv_id.size() + 8);
    for (char c : turn.conv_id) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                          (c >= '0' && c <= '9') || c == '_' || c == '-';
        key.push_back(keep ? c : '_');
    }
    key += "_turn";
    key += std::to_string(turn.turn_index);
    return key;
}

std::uint64_t turn_seed(std::uint64_t base_seed, const RecommendationTurn& turn) {
    const std::uint64_t conv_hash = fnv1a64(turn.conv_id.data(), turn.conv_id.size());
    return derive_seed(base_seed, SeedStream::Turn, conv_hash,
                       static_cast<std::uint64_t>(turn.turn_index));
}

// Attribute values of the ground-truth items, deduplicated and sorted.
// These define what the scripted user is after for this turn.
std::vector<std::string> turn_target_attributes(const RecommendationTurn& turn,
                                                const ItemCatalog& catalog) {
    std::set<std::string> values;
    for (int id : turn.ground_truth_item_ids) {
        const Item& item = catalog.at(id);
        for (AttributeKind kind : kAllAttributeKinds) {
            for (const std::string& v : item.values(kind)) values.insert(v);
        }
    }
    return {values.begin(), values.end()};
}

struct TurnBackends {
    std::unique_ptr<Backend> crs;
    std::unique_ptr<Backend> user;
};

TurnBackends make_backends(const RunConfig& cfg, const ItemCatalog& catalog,
                           const RecommendationTurn& turn) {
    TurnBackends b;
    if (cfg.backend_kind == "scripted") {
        b.crs = std::make_unique<ScriptedCrsBackend>(
            catalog, ScriptedCrsConfig{cfg.search.list_length});
        ScriptedUserConfig user_cfg;
        user_cfg.target_attributes = turn_target_attributes(turn, catalog);
        b.user = std::make_unique<ScriptedUserBackend>(catalog, user_cfg);
        return b;
    }
    if (cfg.http.base_url.empty()) {
        throw ConfigError(
            "backends.http.base_url is required for http backends "
            "(or set GATEWAY_BASE_URL)");
    }
    if (cfg.crs_http().model.empty() || cfg.user_http().model.empty()) {
        throw ConfigError(
            "backends.http.model is required for http backends (or set GATEWAY_MODEL)");
    }
    b.crs = std::make_unique<HttpChatBackend>(cfg.crs_http());
    b.user = std::make_unique<HttpChatBackend>(cfg.user_http());
    return b;
}

json call_counts_json(const SearchCallCounts& c) {
    return {{"recommendation", c.recommendation_calls},
            {"critique", c.critique_calls},
            {"scoring", c.scoring_calls},
            {"scoring_cache_hits", c.scoring_cache_hits},
            {"scoring_fallbacks", c.scoring_fallbacks}};
}

struct SearchRunSummary {
    std::vector<json> turn_entries;
    SearchCallCounts totals;
    int aborted_turns = 0;
    // key -> ranked item ids, for in-process evaluation (ablate).
    std::map<std::string, std::vector<int>> rankings;
    std::string crs_name;
    std::string user_name;
};

// Runs one strategy over every turn, writing traces/<key>.json and
// rankings/<key>.json under out_dir. Per-turn seeds derive from the turn
// identity, not the processing order, so subsets and reruns line up.
SearchRunSummary run_search_over_turns(const RunConfig& cfg, SearchStrategy strategy,
                                       std::span<const RecommendationTurn> turns,
                                       const ItemCatalog& catalog, const fs::path& out_dir,
                                       std::uint64_t base_seed) {
    SearchRunSummary summary;
    fs::create_directories(out_dir / "traces");
    fs::create_directories(out_dir / "rankings");

    for (const RecommendationTurn& turn : turns) {
        const std::string key = turn_key(turn);
        TurnBackends backends = make_backends(cfg, catalog, turn);
        summary.crs_name = backends.crs->name();
        summary.user_name = backends.user->name();

        SearchConfig scfg = cfg.search;
        scfg.master_seed = turn_seed(base_seed, turn);

        SimulatedUser user(*backends.user, catalog, RewardTokenConfig{},
                           scfg.max_concurrency);
        SearchEngine engine(*backends.crs, user, catalog, scfg);
        const SearchTrace trace = engine.run(turn.history, strategy);

        write_file(out_dir / "traces" / (key + ".json"), trace_to_json(trace));

        bool has_scored = !trace.scored_state_ids.empty();
        if (has_scored) {
            const std::vector<ScoredItem> ranking =
                rank_candidates(trace, cfg.ranker_l_out, cfg.ranker_aggregation);
            write_file(out_dir / "rankings" / (key + ".json"),
                       ranking_to_json(ranking, catalog));
            std::vector<int>& ids = summary.rankings[key];
            ids.reserve(ranking.size());
            for (const ScoredItem& s : ranking) ids.push_back(s.item_id);
        }

        summary.totals.recommendation_calls += trace.calls.recommendation_calls;
        summary.totals.critique_calls += trace.calls.critique_calls;
        summary.totals.scoring_calls += trace.calls.scoring_calls;
        summary.totals.scoring_cache_hits += trace.calls.scoring_cache_hits;
        summary.totals.scoring_fallbacks += trace.calls.scoring_fallbacks;
        if (trace.aborted) summary.aborted_turns += 1;

        json entry = {{"key", key},
                      {"conv_id", turn.conv_id},
                      {"turn_index", turn.turn_index},
                      {"master_seed", scfg.master_seed},
                      {"scored_states", trace.scored_state_ids.size()},
                      {"aborted", trace.aborted}};
        if (trace.aborted) entry["abort_reason"] = trace.abort_reason;
        summary.turn_entries.push_back(std::move(entry));
    }
    return summary;
}

// No-search baseline: one zero-temperature recommendation per turn, kept in
// list order. Writes rankings only; there is no search tree to trace.
SearchRunSummary run_baseline_over_turns(const RunConfig& cfg,
                                         std::span<const RecommendationTurn> turns,
                                         const ItemCatalog& catalog,
                                         const fs::path& out_dir,
                                         std::uint64_t base_seed) {
    SearchRunSummary summary;
    fs::create_directories(out_dir / "rankings");

    for (const RecommendationTurn& turn : turns) {
        const std::string key = turn_key(turn);
        TurnBackends backends = make_backends(cfg, catalog, turn);
        summary.crs_name = backends.crs->name();
        summary.user_name = backends.user->name();

        const std::uint64_t seed = turn_seed(base_seed, turn);
        RecommendationPrompt prompt;
        prompt.history = {turn.history.begin(), turn.history.end()};
        prompt.list_length = cfg.search.list_length;

        StateIdAllocator ids;
        const SearchState state =
            recommend(*backends.crs, prompt, catalog, 0.0, seed, ids);
        summary.totals.recommendation_calls += 1;

        std::vector<ScoredItem> ranking;
        ranking.reserve(state.items.size());
        for (int id : state.items) ranking.push_back({id, 0.0});
        write_file(out_dir / "rankings" / (key + ".json"),
                   ranking_to_json(ranking, catalog));
        summary.rankings[key] = state.items;

        summary.turn_entries.push_back(json{{"key", key},
                                            {"conv_id", turn.conv_id},
                                            {"turn_index", turn.turn_index},
                                            {"master_seed", seed},
                                            {"scored_states", 0},
                                            {"aborted", false}});
    }
    return summary;
}

void check_unique_keys(std::span<const RecommendationTurn> turns) {
    std::set<std::string> seen;
    for (const RecommendationTurn& turn : turns) {
        if (!seen.insert(turn_key(turn)).second) {
            throw Error("turn key collision after sanitization: " + turn_key(turn));
        }
    }
}

// ---------------------------------------------------------------- ingest --

int cmd_ingest(const std::string& corpus_path, const std::string& catalog_path,
               const std::string& out_dir, bool dedupe) {
    const ItemCatalog catalog = ItemCatalog::load(catalog_path);
    const std::vector<Conversation> conversations =
        load_conversations(corpus_path, catalog);
    const std::vector<RecommendationTurn> turns =
        derive_recommendation_turns(conversations, dedupe);
    check_unique_keys(turns);

    const fs::path out(out_dir);
    fs::create_directories(out);
    const fs::path turns_path = out / "turns.jsonl";
    write_turns(turns_path.string(), turns);

    json manifest = {{"command", "ingest"},
                     {"corpus", corpus_path},
                     {"catalog", catalog_path},
                     {"dedupe", dedupe},
                     {"conversations", conversations.size()},
                     {"recommendation_turns", turns.size()},
                     {"catalog_items", catalog.size()},
                     {"turns_file", "turns.jsonl"},
                     {"turns_digest", file_digest(turns_path)}};
    write_file(out / "manifest.json", manifest.dump(2) + "\n");

    std::cout << conversations.size() << " conversations\n"
              << turns.size() << " recommendation turns\n"
              << catalog.size() << " catalog items\n"
              << "wrote " << turns_path.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- search --

int cmd_search(const std::string& turns_path, const std::string& config_path,
               const std::string& out_dir, const std::string& strategy_name_str,
               std::optional<std::uint64_t> seed, std::optional<int> max_concurrency,
               int max_turns) {
    RunConfig cfg = load_run_config(config_path);
    if (seed) cfg.search.master_seed = *seed;
    if (max_concurrency) cfg.search.max_concurrency = *max_concurrency;
    cfg.search.validate();
    const SearchStrategy strategy = strategy_from_name(strategy_name_str);

    const ItemCatalog catalog = ItemCatalog::load(cfg.catalog_path);
    std::vector<RecommendationTurn> turns = load_turns(turns_path, catalog);
    if (max_turns > 0 && static_cast<int>(turns.size()) > max_turns) {
        turns.resize(static_cast<std::size_t>(max_turns));
    }
    check_unique_keys(turns);

    const fs::path out(out_dir);
    const std::uint64_t base_seed = cfg.search.master_seed;
    const SearchRunSummary summary =
        run_search_over_turns(cfg, strategy, turns, catalog, out, base_seed);

    json manifest = {{"command", "search"},
                     {"strategy", std::string(strategy_name(strategy))},
                     {"seed", base_seed},
                     {"config", json::parse(effective_config_json(cfg))},
                     {"config_digest", config_digest(cfg)},
                     {"prompt_version", std::string(prompts::kPromptVersion)},
                     {"turns_path", turns_path},
                     {"turns_digest", file_digest(turns_path)},
                     {"turn_count", turns.size()},
                     {"turns", summary.turn_entries},
                     {"call_counts", call_counts_json(summary.totals)},
                     {"aborted_turns", summary.aborted_turns},
                     {"backends", {{"crs", summary.crs_name}, {"user", summary.user_name}}}};
    write_file(out / "manifest.json", manifest.dump(2) + "\n");

    std::cout << "strategy: " << strategy_name(strategy) << "\n"
              << "turns: " << turns.size() << " (" << summary.aborted_turns
              << " aborted)\n"
              << "calls: " << summary.totals.recommendation_calls << " recommendation, "
              << summary.totals.critique_calls << " critique, "
              << summary.totals.scoring_calls << " scoring ("
              << summary.totals.scoring_cache_hits << " cache hits, "
              << summary.totals.scoring_fallbacks << " fallbacks)\n"
              << "wrote " << (out / "manifest.json").string() << "\n";
    return summary.aborted_turns > 0 ? 1 : 0;
}

// -------------------------------------------------------------- evaluate --

std::vector<fs::path> discover_run_dirs(const fs::path& rankings_dir) {
    if (!fs::is_directory(rankings_dir)) {
        throw Error("not a directory: " + rankings_dir.string());
    }
    // A run directory may be passed directly; use its rankings/ child.
    if (fs::is_directory(rankings_dir / "rankings")) {
        return {rankings_dir / "rankings"};
    }
    const auto has_json = [](const fs::path& dir) {
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file() && e.path().extension() == ".json") return true;
        }
        return false;
    };
    if (has_json(rankings_dir)) return {rankings_dir};

    std::vector<fs::path> runs;
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(rankings_dir)) {
        if (e.is_directory()) subdirs.push_back(e.path());
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const fs::path& d : subdirs) {
        const fs::path inner = fs::is_directory(d / "rankings") ? d / "rankings" : d;
        if (has_json(inner)) runs.push_back(inner);
    }
    if (runs.empty()) {
        throw Error("no ranking files found under " + rankings_dir.string());
    }
    return runs;
}

int cmd_evaluate(const std::string& rankings_dir, const std::string& turns_path,
                 std::vector<int> cuts, int expected_runs,
                 const std::string& catalog_path, const std::string& config_path,
                 std::string out_path) {
    std::string effective_catalog = catalog_path;
    if (effective_catalog.empty() && !config_path.empty()) {
        effective_catalog = load_run_config(config_path).catalog_path;
    }
    if (effective_catalog.empty()) {
        throw ConfigError("evaluate needs --catalog or --config to locate the catalog");
    }
    if (cuts.empty()) cuts = {kDefaultCuts[0], kDefaultCuts[1]};
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const ItemCatalog catalog = ItemCatalog::load(effective_catalog);
    const std::vector<RecommendationTurn> turns = load_turns(turns_path, catalog);
    check_unique_keys(turns);

    const fs::path rdir(rankings_dir);
    const std::vector<fs::path> run_dirs = discover_run_dirs(rdir);
    if (expected_runs > 0 && static_cast<int>(run_dirs.size()) != expected_runs) {
        throw ConfigError("--runs " + std::to_string(expected_runs) + " requested but " +
                          std::to_string(run_dirs.size()) + " run directories found");
    }

    std::vector<std::vector<MetricMap>> runs;
    runs.reserve(run_dirs.size());
    for (const fs::path& dir : run_dirs) {
        std::vector<MetricMap> turn_rows;
        turn_rows.reserve(turns.size());
        for (const RecommendationTurn& turn : turns) {
            const fs::path file = dir / (turn_key(turn) + ".json");
            if (!fs::exists(file)) {
                throw Error("missing ranking file: " + file.string());
            }
            const std::vector<ScoredItem> ranking = ranking_from_json(read_file(file));
            std::vector<int> ids;
            ids.reserve(ranking.size());
            for (const ScoredItem& s : ranking) ids.push_back(s.item_id);
            turn_rows.push_back(turn_metrics(ids, turn.ground_truth_item_ids, cuts));
        }
        runs.push_back(std::move(turn_rows));
    }

    const AggregateReport report = aggregate(runs);

    if (out_path.empty()) {
        const fs::path base = rdir.filename() == "rankings" || !rdir.has_parent_path()
                                  ? rdir.parent_path()
                                  : rdir;
        out_path = (base.empty() ? fs::path(".") : base) / "report.json";
    }

    json doc = json::parse(report_to_json(report));
    doc["command"] = "evaluate";
    doc["rankings_dir"] = rankings_dir;
    doc["turns_path"] = turns_path;
    doc["turns_digest"] = file_digest(turns_path);
    doc["catalog"] = effective_catalog;
    doc["cuts"] = cuts;
    json run_names = json::array();
    for (const fs::path& d : run_dirs) run_names.push_back(d.string());
    doc["run_dirs"] = run_names;
    write_file(out_path, doc.dump(2) + "\n");

    std::cout << format_report_table(report) << "runs: " << report.run_count
              << "  turns per run: " << report.turns_per_run << "\n"
              << "wrote " << out_path << "\n";
    return 0;
}

// ------------------------------------------------------------ synthesize --

struct SynthesisCounts {
    std::size_t scoring = 0;
    std::size_t critiquing = 0;
    std::size_t dropped_empty = 0;
    std::size_t failed_calls = 0;
    std::size_t teacher_calls = 0;
};

json synthesis_manifest(const std::string& behavior, const RunConfig& cfg,
                        const std::string& turns_digest, bool complete,
                        const std::set<std::string>& done_scoring,
                        const std::set<std::string>& done_critiquing,
                        const SynthesisCounts& counts, std::size_t total,
                        const std::string& teacher_name) {
    return {{"command", "synthesize"},
            {"behavior", behavior},
            {"config_digest", config_digest(cfg)},
            {"turns_digest", turns_digest},
            {"prompt_version", std::string(prompts::kPromptVersion)},
            {"seed", cfg.synthesis.seed},
            {"complete", complete},
            {"completed_scoring_turns", json(done_scoring)},
            {"completed_critiquing_turns", json(done_critiquing)},
            {"counts",
             {{"scoring_examples", counts.scoring},
              {"critiquing_examples", counts.critiquing},
              {"dropped_empty", counts.dropped_empty},
              {"failed_calls", counts.failed_calls},
              {"teacher_calls", counts.teacher_calls},
              {"total_exported", total}}},
            {"teacher", teacher_name}};
}

int cmd_synthesize(const std::string& turns_path, const std::string& config_path,
                   const std::string& out_path, const std::string& behavior,
                   int max_turns) {
    const RunConfig cfg = load_run_config(config_path);
    const bool want_scoring = behavior == "both" || behavior == "scoring";
    const bool want_critiquing = behavior == "both" || behavior == "critiquing";
    if (!want_scoring && !want_critiquing) {
        throw ConfigError("--behavior must be both, scoring or critiquing, got '" +
                          behavior + "'");
    }

    const ItemCatalog catalog = ItemCatalog::load(cfg.catalog_path);
    std::vector<RecommendationTurn> turns = load_turns(turns_path, catalog);
    if (max_turns > 0 && static_cast<int>(turns.size()) > max_turns) {
        turns.resize(static_cast<std::size_t>(max_turns));
    }
    check_unique_keys(turns);
    const std::string turns_digest = file_digest(turns_path);

    const fs::path out(out_path);
    const fs::path manifest_path(out_path + ".manifest.json");
    const fs::path journal_path(out_path + ".partial.jsonl");

    // Resume bookkeeping. A manifest from different settings is refused
    // rather than silently mixed in.
    std::set<std::string> done_scoring;
    std::set<std::string> done_critiquing;
    std::vector<InstructionExample> examples;
    SynthesisCounts counts;
    std::string prev_teacher_name;
    if (fs::exists(manifest_path)) {
        const json prev = json::parse(read_file(manifest_path));
        const bool same = prev.value("behavior", "") == behavior &&
                          prev.value("config_digest", "") == config_digest(cfg) &&
                          prev.value("turns_digest", "") == turns_digest &&
                          prev.value("prompt_version", "") == prompts::kPromptVersion;
        if (!same) {
            throw ConfigError("existing manifest " + manifest_path.string() +
                              " was produced with different settings; delete it to "
                              "start over");
        }
        for (const auto& k : prev.at("completed_scoring_turns")) {
            done_scoring.insert(k.get<std::string>());
        }
        for (const auto& k : prev.at("completed_critiquing_turns")) {
            done_critiquing.insert(k.get<std::string>());
        }
        counts.teacher_calls = prev.at("counts").value("teacher_calls", std::size_t{0});
        counts.dropped_empty = prev.at("counts").value("dropped_empty", std::size_t{0});
        prev_teacher_name = prev.value("teacher", "");
        if (prev.value("complete", false) && fs::exists(out)) {
            examples = read_dataset(out_path);
        } else if (fs::exists(journal_path)) {
            examples = read_dataset(journal_path.string());
        }
    }

    std::unique_ptr<Backend> teacher;
    const auto get_teacher = [&]() -> Backend& {
        if (!teacher) {
            if (cfg.backend_kind == "scripted") {
                // Targets come from the preference section of each teacher
                // prompt, so no per-turn goal wiring is needed here.
                teacher = std::make_unique<ScriptedUserBackend>(catalog,
                                                                ScriptedUserConfig{});
            } else {
                teacher = std::make_unique<HttpChatBackend>(cfg.user_http());
            }
        }
        return *teacher;
    };

    bool any_failed = false;
    std::ofstream journal;
    const auto append_to_journal = [&](std::span<const InstructionExample> fresh) {
        if (fresh.empty()) return;
        if (!journal.is_open()) {
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            journal.open(journal_path, std::ios::app | std::ios::binary);
            if (!journal) {
                throw Error("cannot write journal file: " + journal_path.string());
            }
        }
        for (const InstructionExample& e : fresh) {
            journal << example_to_json_line(e) << '\n';
        }
        journal.flush();
    };
    const auto checkpoint = [&](bool complete) {
        const std::string teacher_name =
            teacher ? teacher->name()
                    : (prev_teacher_name.empty() ? "none" : prev_teacher_name);
        const json manifest =
            synthesis_manifest(behavior, cfg, turns_digest, complete, done_scoring,
                               done_critiquing, counts, examples.size(), teacher_name);
        write_file(manifest_path, manifest.dump(2) + "\n");
    };

    for (const RecommendationTurn& turn : turns) {
        const std::string key = turn_key(turn);
        bool progressed = false;

        if (want_scoring && !done_scoring.count(key)) {
            const std::vector<InstructionExample> s =
                build_scoring_examples(turn, catalog, cfg.synthesis);
            append_to_journal(s);
            examples.insert(examples.end(), s.begin(), s.end());
            done_scoring.insert(key);
            progressed = true;
        }
        if (want_critiquing && !done_critiquing.count(key)) {
            const SynthesisResult r = synthesize_critiques(
                get_teacher(), std::span<const RecommendationTurn>(&turn, 1), catalog,
                cfg.synthesis);
            counts.teacher_calls +=
                r.examples.size() + r.dropped_empty + r.failed_calls;
            counts.dropped_empty += r.dropped_empty;
            counts.failed_calls += r.failed_calls;
            // All or nothing per turn: the journal only ever holds examples
            // of completed turns, so a retry cannot duplicate them.
            if (r.failed_calls == 0) {
                append_to_journal(r.examples);
                examples.insert(examples.end(), r.examples.begin(), r.examples.end());
                done_critiquing.insert(key);
            } else {
                any_failed = true;
            }
            progressed = true;
        }

        if (progressed) checkpoint(false);
    }

    counts.scoring = 0;
    counts.critiquing = 0;
    for (const InstructionExample& e : examples) {
        (e.behavior == Behavior::Scoring ? counts.scoring : counts.critiquing) += 1;
    }

    if (!any_failed) {
        export_dataset(examples, out_path, cfg.synthesis.seed);
        checkpoint(true);
        if (journal.is_open()) journal.close();
        std::error_code ec;
        fs::remove(journal_path, ec);
    } else {
        checkpoint(false);
    }

    std::cout << "scoring examples: " << counts.scoring << "\n"
              << "critiquing examples: " << counts.critiquing << "\n"
              << "dropped empty: " << counts.dropped_empty << "\n"
              << "failed calls: " << counts.failed_calls << "\n"
              << "teacher calls: " << counts.teacher_calls << "\n";
    if (!any_failed) {
        std::cout << "wrote " << examples.size() << " examples to " << out_path << "\n";
    } else {
        std::cout << "incomplete; rerun to retry failed turns (journal kept at "
                  << journal_path.string() << ")\n";
    }
    return any_failed ? 1 : 0;
}

// ---------------------------------------------------------------- ablate --

int cmd_ablate(const std::string& turns_path, const std::string& config_path,
               const std::string& out_dir, const std::string& strategies_csv,
               std::optional<std::uint64_t> seed) {
    RunConfig cfg = load_run_config(config_path);
    if (seed) cfg.search.master_seed = *seed;
    const std::uint64_t base_seed = cfg.search.master_seed;

    std::vector<std::string> strategies;
    {
        std::stringstream ss(strategies_csv);
        std::string part;
        while (std::getline(ss, part, ',')) {
            if (!part.empty()) strategies.push_back(part);
        }
    }
    if (strategies.empty()) throw ConfigError("--strategies must name at least one");

    const ItemCatalog catalog = ItemCatalog::load(cfg.catalog_path);
    const std::vector<RecommendationTurn> turns = load_turns(turns_path, catalog);
    check_unique_keys(turns);

    const std::vector<int> cuts = {kDefaultCuts[0], kDefaultCuts[1]};
    const fs::path out(out_dir);
    const int beam_budget = cfg.search.expected_scored_states();

    json strategy_rows = json::array();
    std::vector<std::string> table_lines;
    char line[256];
    std::snprintf(line, sizeof(line), "%-14s %8s %6s %6s %8s %10s %9s %8s", "strategy",
                  "states", "rec", "crit", "scoring", "recall@10", "ndcg@10", "mrr@10");
    table_lines.emplace_back(line);

    for (const std::string& name : strategies) {
        RunConfig scfg = cfg;
        const fs::path sdir = out / name;
        SearchRunSummary summary;
        int states_per_turn = 0;

        if (name == "none") {
            summary = run_baseline_over_turns(scfg, turns, catalog, sdir, base_seed);
        } else {
            const SearchStrategy strategy = strategy_from_name(name);
            if (strategy == SearchStrategy::MonteCarlo) {
                // Same scoring budget as beam search on this config, so the
                // comparison is sample-for-sample fair.
                scfg.search.init_count = beam_budget;
            }
            summary = run_search_over_turns(scfg, strategy, turns, catalog, sdir,
                                            base_seed);
            states_per_turn =
                resolve_strategy(scfg.search, strategy).expected_scored_states();
        }

        std::vector<MetricMap> rows;
        rows.reserve(turns.size());
        for (const RecommendationTurn& turn : turns) {
            const auto it = summary.rankings.find(turn_key(turn));
            if (it == summary.rankings.end()) {
                throw Error("strategy " + name + " produced no ranking for turn " +
                            turn_key(turn));
            }
            rows.push_back(turn_metrics(it->second, turn.ground_truth_item_ids, cuts));
        }
        const AggregateReport report = aggregate({rows});
        write_file(sdir / "report.json", report_to_json(report));

        json metric_means;
        for (const auto& [metric, stats] : report.metrics) {
            metric_means[metric] = stats.mean;
        }
        strategy_rows.push_back({{"name", name},
                                 {"states_per_turn", states_per_turn},
                                 {"call_counts", call_counts_json(summary.totals)},
                                 {"aborted_turns", summary.aborted_turns},
                                 {"metrics", metric_means}});

        std::snprintf(line, sizeof(line), "%-14s %8d %6llu %6llu %8llu %10.3f %9.3f %8.3f",
                      name.c_str(), states_per_turn,
                      static_cast<unsigned long long>(summary.totals.recommendation_calls),
                      static_cast<unsigned long long>(summary.totals.critique_calls),
                      static_cast<unsigned long long>(summary.totals.scoring_calls),
                      report.metrics.at("recall@10").mean,
                      report.metrics.at("ndcg@10").mean,
                      report.metrics.at("mrr@10").mean);
        table_lines.emplace_back(line);
    }

    json manifest = {{"command", "ablate"},
                     {"seed", base_seed},
                     {"config", json::parse(effective_config_json(cfg))},
                     {"config_digest", config_digest(cfg)},
                     {"prompt_version", std::string(prompts::kPromptVersion)},
                     {"turns_path", turns_path},
                     {"turns_digest", file_digest(turns_path)},
                     {"turn_count", turns.size()},
                     {"beam_budget", beam_budget},
                     {"strategies", strategy_rows}};
    write_file(out / "ablation.json", manifest.dump(2) + "\n");

    for (const std::string& l : table_lines) std::cout << l << "\n";
    std::cout << "wrote " << (out / "ablation.json").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reward-guided search for conversational recommendation"};
    app.require_subcommand(1);

    // ingest
    std::string in_corpus, in_catalog, in_out_dir;
    bool in_dedupe = true;
    CLI::App* ingest = app.add_subcommand(
        "ingest", "derive recommendation turns from a conversation corpus");
    ingest->add_option("corpus", in_corpus, "conversation corpus (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("catalog", in_catalog, "item catalog (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("--out-dir", in_out_dir, "output directory")->required();
    ingest->add_flag("--dedupe,!--no-dedupe", in_dedupe,
                     "drop ground-truth items already mentioned earlier in the "
                     "conversation (default on)");

    // search
    std::string se_turns, se_config, se_out_dir, se_strategy = "beam";
    std::optional<std::uint64_t> se_seed;
    std::optional<int> se_concurrency;
    int se_max_turns = 0;
    CLI::App* search = app.add_subcommand(
        "search", "run reward-guided search over each turn and write rankings");
    search->add_option("turns", se_turns, "turns file from ingest (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    search->add_option("--config", se_config, "run config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    search->add_option("--out-dir", se_out_dir, "run directory to create")->required();
    search->add_option("--strategy", se_strategy,
                       "beam | greedy_small | greedy_large | monte_carlo");
    search->add_option("--seed", se_seed, "override search.master_seed");
    search->add_option("--max-concurrency", se_concurrency,
                       "override search.max_concurrency");
    search->add_option("--max-turns", se_max_turns, "only process the first N turns");

    // evaluate
    std::string ev_rankings, ev_turns, ev_catalog, ev_config, ev_out;
    std::vector<int> ev_cuts;
    int ev_runs = 0;
    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "score rankings against ground truth and aggregate");
    evaluate->add_option("rankings", ev_rankings,
                         "rankings directory, run directory, or directory of runs")
        ->required()
        ->check(CLI::ExistingDirectory);
    evaluate->add_option("turns", ev_turns, "turns file (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate->add_option("--cuts", ev_cuts, "ranking cutoffs (default 10,50)")
        ->delimiter(',');
    evaluate->add_option("--runs", ev_runs,
                         "expected number of runs; 0 accepts whatever is found");
    evaluate->add_option("--catalog", ev_catalog, "item catalog (JSONL)")
        ->check(CLI::ExistingFile);
    evaluate->add_option("--config", ev_config,
                         "run config to read the catalog path from")
        ->check(CLI::ExistingFile);
    evaluate->add_option("--out", ev_out, "report path (default <run>/report.json)");

    // synthesize
    std::string sy_turns, sy_config, sy_out, sy_behavior = "both";
    int sy_max_turns = 0;
    CLI::App* synthesize = app.add_subcommand(
        "synthesize", "build instruction data for training the simulated user");
    synthesize->add_option("turns", sy_turns, "turns file (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    synthesize->add_option("--config", sy_config, "run config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    synthesize->add_option("--out", sy_out, "output dataset (JSONL)")->required();
    synthesize->add_option("--behavior", sy_behavior, "both | scoring | critiquing");
    synthesize->add_option("--max-turns", sy_max_turns,
                           "only process the first N turns");

    // ablate
    std::string ab_turns, ab_config, ab_out;
    std::string ab_strategies = "beam,greedy_small,greedy_large,monte_carlo,none";
    std::optional<std::uint64_t> ab_seed;
    CLI::App* ablate = app.add_subcommand(
        "ablate", "compare search strategies on the same turns and budget");
    ablate->add_option("turns", ab_turns, "turns file (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    ablate->add_option("--config", ab_config, "run config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    ablate->add_option("--out-dir", ab_out, "output directory")->required();
    ablate->add_option("--strategies", ab_strategies, "comma list; 'none' is the "
                                                      "no-search baseline");
    ablate->add_option("--seed", ab_seed, "override search.master_seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*ingest) return cmd_ingest(in_corpus, in_catalog, in_out_dir, in_dedupe);
        if (*search) {
            return cmd_search(se_turns, se_config, se_out_dir, se_strategy, se_seed,
                              se_concurrency, se_max_turns);
        }
        if (*evaluate) {
            return cmd_evaluate(ev_rankings, ev_turns, ev_cuts, ev_runs, ev_catalog,
                                ev_config, ev_out);
        }
        if (*synthesize) {
            return cmd_synthesize(sy_turns, sy_config, sy_out, sy_behavior,
                                  sy_max_turns);
        }
        if (*ablate) return cmd_ablate(ab_turns, ab_config, ab_out, ab_strategies,
                                       ab_seed);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
