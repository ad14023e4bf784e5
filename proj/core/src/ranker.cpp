#include "recsearch/ranker.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>

#include <json.hpp>

#include "recsearch/errors.hpp"

namespace recsearch {

std::string_view aggregation_name(ScoreAggregation a) {
    return a == ScoreAggregation::Max ? "max" : "mean";
}

ScoreAggregation aggregation_from_name(std::string_view name) {
    if (name == "max") return ScoreAggregation::Max;
    if (name == "mean") return ScoreAggregation::Mean;
    throw ConfigError("unknown score aggregation: " + std::string(name));
}

std::vector<ScoredItem> rank_candidates(const SearchTrace& trace, int l_out,
                                        ScoreAggregation aggregation) {
    if (l_out < 1) throw ValidationError("rank_candidates: l_out must be >= 1");

    struct Pooled {
        double max_score = 0.0;
        double sum = 0.0;
        std::uint64_t count = 0;
        std::int64_t first_state = 0;
        std::size_t first_position = 0;
    };
    std::unordered_map<int, Pooled> pooled;
    bool any_scored = false;

    for (const SearchState& state : trace.all_states) {
        if (!state.per_item_scores) continue;
        any_scored = true;
        for (std::size_t pos = 0; pos < state.items.size(); ++pos) {
            const int item_id = state.items[pos];
            const double score = (*state.per_item_scores)[pos];
            auto [it, inserted] = pooled.try_emplace(item_id);
            Pooled& p = it->second;
            if (inserted) {
                p.first_state = state.state_id;
                p.first_position = pos;
            }
            p.max_score = inserted ? score : std::max(p.max_score, score);
            p.sum += score;
            ++p.count;
        }
    }
    if (!any_scored) {
        throw SearchError("rank_candidates: trace has no scored states");
    }

    struct Entry {
        int item_id;
        double score;
        std::int64_t first_state;
        std::size_t first_position;
    };
    std::vector<Entry> entries;
    entries.reserve(pooled.size());
    for (const auto& [item_id, p] : pooled) {
        const double score = aggregation == ScoreAggregation::Max
                                 ? p.max_score
                                 : p.sum / static_cast<double>(p.count);
        entries.push_back({item_id, score, p.first_state, p.first_position});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.first_state != b.first_state) return a.first_state < b.first_state;
        if (a.first_position != b.first_position) return a.first_position < b.first_position;
        return a.item_id < b.item_id;
    });
    if (entries.size() > static_cast<std::size_t>(l_out)) {
        entries.resize(static_cast<std::size_t>(l_out));
    }

    std::vector<ScoredItem> ranking;
    ranking.reserve(entries.size());
    for (const Entry& e : entries) ranking.push_back({e.item_id, e.score});
    return ranking;
}

std::string ranking_to_json(const std::vector<ScoredItem>& ranking,
                            const ItemCatalog& catalog) {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        j.push_back({{"item_id", ranking[i].item_id},
                     {"title", catalog.at(ranking[i].item_id).title},
                     {"score", ranking[i].score},
                     {"rank", i + 1}});
    }
    return j.dump(2) + "\n";
}

std::vector<ScoredItem> ranking_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("ranking: bad JSON: ") + e.what());
    }
    std::vector<ScoredItem> ranking;
    try {
        for (const auto& entry : j) {
            ranking.push_back(
                {entry.at("item_id").get<int>(), entry.at("score").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("ranking: unexpected shape: ") + e.what());
    }
    return ranking;
}

}  // namespace recsearch
