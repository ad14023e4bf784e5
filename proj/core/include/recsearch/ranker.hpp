#pragma once

#include <string>
#include <vector>

#include "recsearch/catalog.hpp"
#include "recsearch/search.hpp"

namespace recsearch {

enum class ScoreAggregation { Max, Mean };

std::string_view aggregation_name(ScoreAggregation a);
ScoreAggregation aggregation_from_name(std::string_view name);

// Pools the per-item scores of every scored state in the trace, keeps one
// entry per item (max score by default, mean as the alternative), sorts by
// score descending with ties broken by earliest first appearance (state_id,
// then list position), and truncates to l_out. Needs no model calls.
// Throws SearchError when the trace contains no scored state.
std::vector<ScoredItem> rank_candidates(const SearchTrace& trace, int l_out = 50,
                                        ScoreAggregation aggregation = ScoreAggregation::Max);

// JSON array [{"item_id", "title", "score", "rank"}], rank starting at 1.
std::string ranking_to_json(const std::vector<ScoredItem>& ranking,
                            const ItemCatalog& catalog);

std::vector<ScoredItem> ranking_from_json(const std::string& text);

}  // namespace recsearch
