#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recsearch/catalog.hpp"
#include "recsearch/domain.hpp"
#include "recsearch/gateway.hpp"

namespace recsearch {

enum class Behavior { Scoring, Critiquing };

std::string_view behavior_name(Behavior b);
Behavior behavior_from_name(std::string_view name);

struct ExampleMeta {
    std::string conv_id;
    int turn_index = 0;
    int l_p = 0;  // ground-truth items in the shown list
    int l_n = 0;  // negatives in the shown list
};

// One training example in chat form. For scoring, target is exactly
// "<question> Yes" or "<question> No"; for critiquing it is the teacher's
// feedback text.
struct InstructionExample {
    Behavior behavior = Behavior::Scoring;
    std::vector<ChatMessage> messages;
    std::string target;
    ExampleMeta meta;
};

struct SynthesisConfig {
    int list_length = 10;
    // Cap on lists containing ground truth per turn; the one all-negative
    // list is always added on top.
    int max_lists = 64;
    int negatives_per_positive = 1;
    double teacher_temperature = 0.0;
    int max_concurrency = 1;
    std::uint64_t seed = 0;
};

struct CritiqueListSpec {
    std::vector<int> items;  // length list_length, shuffled
    int l_p = 0;
    int l_n = 0;
};

// Item lists for critique synthesis: every non-empty ground-truth subset
// smaller than list_length (smallest subsets first, lexicographic within a
// size, capped at max_lists), each padded with negatives and shuffled, plus
// exactly one all-negative list. Deterministic in (turn, config.seed).
std::vector<CritiqueListSpec> build_critiquing_lists(const RecommendationTurn& turn,
                                                     const ItemCatalog& catalog,
                                                     const SynthesisConfig& config);

// Yes/No examples: one positive per ground-truth item plus
// negatives_per_positive sampled negatives, each as its own example.
std::vector<InstructionExample> build_scoring_examples(const RecommendationTurn& turn,
                                                       const ItemCatalog& catalog,
                                                       const SynthesisConfig& config);

struct SynthesisResult {
    std::vector<InstructionExample> examples;
    std::size_t dropped_empty = 0;
    std::size_t failed_calls = 0;
};

// Runs the teacher over every critiquing list. The teacher sees the ground
// truth as a preference section; the stored example does not, so no
// ground-truth title can leak into training inputs unless it is part of the
// shown list itself.
SynthesisResult synthesize_critiques(Backend& teacher,
                                     std::span<const RecommendationTurn> turns,
                                     const ItemCatalog& catalog,
                                     const SynthesisConfig& config);

// One example as a single JSONL line (no trailing newline), the same
// encoding export_dataset writes and read_dataset parses.
std::string example_to_json_line(const InstructionExample& example);

// Writes examples as JSONL in seeded-shuffle order over a canonical (sorted)
// serialization, so equal example sets produce equal files regardless of the
// order they were assembled in. Returns the count.
std::size_t export_dataset(std::span<const InstructionExample> examples,
                           const std::string& path, std::uint64_t seed);

std::vector<InstructionExample> read_dataset(const std::string& path);

}  // namespace recsearch
