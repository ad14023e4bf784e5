#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "recsearch/catalog.hpp"
#include "recsearch/domain.hpp"

namespace recsearch {

// Loads a conversation corpus, one JSON object per line:
//   {"conv_id": "...", "turns": [{"speaker": "seeker"|"recommender",
//    "text": "...", "items": [item_id, ...]}, ...]}
// Every mentioned item id must exist in the catalog; conversations must have
// at least one turn; conv_ids must be unique. Throws ParseError naming the
// offending line.
std::vector<Conversation> load_conversations(const std::string& path,
                                             const ItemCatalog& catalog);

// Extracts one RecommendationTurn per recommender utterance that mentions
// items and has at least one preceding turn. With dedupe enabled, items
// already seen anywhere earlier in the conversation (either speaker) are
// removed from the ground truth; turns whose ground truth empties out are
// dropped. Ground truth ids are sorted and unique.
std::vector<RecommendationTurn> derive_recommendation_turns(
    std::span<const Conversation> conversations, bool dedupe);

enum class Split { Train, Valid, Test };

std::string_view split_name(Split s);

// Parses {"train": [conv_id...], "valid": [...], "test": [...]}. A conv_id
// appearing in more than one split is an error.
std::map<std::string, Split> load_split(const std::string& path);

// conv_ids in the split map that do not appear in the corpus. These are
// reported, not fatal.
std::vector<std::string> split_coverage_warnings(
    const std::map<std::string, Split>& split,
    std::span<const Conversation> conversations);

// Turn file round-trip (JSONL, one turn per line). This is the hand-off
// format between the ingest and search commands.
void write_turns(const std::string& path, std::span<const RecommendationTurn> turns);
std::vector<RecommendationTurn> load_turns(const std::string& path,
                                           const ItemCatalog& catalog);

}  // namespace recsearch
