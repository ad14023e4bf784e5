#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recsearch/domain.hpp"
#include "recsearch/gateway.hpp"

namespace recsearch::prompts {

// Bumped whenever any template below changes; recorded in manifests and in
// the scoring cache key so stale prompts never mix with fresh ones.
inline constexpr std::string_view kPromptVersion = "v1";

// Task description for per-item scoring.
inline constexpr std::string_view kScoringTask =
    "You are the user to look for recommendations. You need to provide feedback on "
    "the recommendations given by the system. For each recommendation, you should "
    "give feedback in the form of \"Accept the recommendation (Yes/No)? X\", where "
    "X is either \"Yes\" or \"No\".";

// Task description for critiquing a whole list.
inline constexpr std::string_view kCritiqueTask =
    "You are the user to look for recommendations. Read the conversation and "
    "provide feedback on the recommendations given by the system.";

// The scoring question; forced as the start of the reply so the next token
// is the Yes/No decision.
inline constexpr std::string_view kRewardQuestion =
    "Accept the recommendation (Yes/No)?";

// Section markers inside user messages. Scripted backends key off these.
inline constexpr std::string_view kRecommendedItemHeader = "Recommended item:";
inline constexpr std::string_view kRecommendedItemsHeader = "Recommended items:";
inline constexpr std::string_view kPreferenceHeader = "User preference:";
inline constexpr std::string_view kPreviousListHeader = "Your previous recommendations:";
inline constexpr std::string_view kFeedbackPrefix = "User feedback: ";
inline constexpr std::string_view kReviseInstruction =
    "Please revise your recommendations based on the feedback. Output only the "
    "revised numbered list of item titles.";

inline constexpr std::string_view kSeekerTag = "User: ";
inline constexpr std::string_view kRecommenderTag = "System: ";

// Task description for the recommender, already carrying the list length.
std::string recommender_task(int list_length);

// "User:"/"System:" tagged lines, one per utterance, joined with newlines.
std::string serialize_history(std::span<const Utterance> history);

// "1. line\n2. line\n..." numbering starts at 1.
std::string numbered_lines(std::span<const std::string> lines);

// [system kScoringTask, user history + recommended-item section].
std::vector<ChatMessage> scoring_messages(std::span<const Utterance> history,
                                          const std::string& item_line);

// [system kCritiqueTask, user history + numbered list section + optional
// preference section]. The preference section is only ever present in
// teacher prompts, never in stored training instructions.
std::vector<ChatMessage> critique_messages(
    std::span<const Utterance> history, std::span<const std::string> item_lines,
    const std::optional<std::vector<std::string>>& preference_lines = std::nullopt);

}  // namespace recsearch::prompts
