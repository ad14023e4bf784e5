#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace recsearch {

// Attribute kinds an item may carry. The order here is the canonical
// rendering order.
enum class AttributeKind { Genre, Actor, Writer, Director };

inline constexpr std::array<AttributeKind, 4> kAllAttributeKinds = {
    AttributeKind::Genre, AttributeKind::Actor, AttributeKind::Writer,
    AttributeKind::Director};

std::string_view attribute_kind_name(AttributeKind kind);
AttributeKind attribute_kind_from_name(std::string_view name);

// One catalog entry. item_id is dense: 0..n-1 in catalog order. The title
// carries any disambiguating year suffix, e.g. "Happy Death Day (2017)".
struct Item {
    int item_id = 0;
    std::string title;
    std::array<std::vector<std::string>, 4> attributes;

    const std::vector<std::string>& values(AttributeKind kind) const {
        return attributes[static_cast<std::size_t>(kind)];
    }
    std::vector<std::string>& values(AttributeKind kind) {
        return attributes[static_cast<std::size_t>(kind)];
    }
};

enum class Speaker { Seeker, Recommender };

std::string_view speaker_name(Speaker s);
Speaker speaker_from_name(std::string_view name);

struct Utterance {
    Speaker speaker = Speaker::Seeker;
    std::string text;
    std::vector<int> mentioned_item_ids;
};

struct Conversation {
    std::string conv_id;
    std::vector<Utterance> turns;
};

// One evaluation unit: the dialogue context up to (excluding) a recommender
// turn, plus the items that turn went on to mention.
struct RecommendationTurn {
    std::string conv_id;
    int turn_index = 0;  // position of the recommender turn in the conversation
    std::vector<Utterance> history;
    std::vector<int> ground_truth_item_ids;  // sorted, unique, non-empty
};

// A critique sampled from a recommended list, e.g. "I would like to see
// more comedy elements."
struct Critique {
    std::string text;
    std::int64_t sampled_from_state = 0;
};

struct ScoredItem {
    int item_id = 0;
    double score = 0.0;
};

// Tolerance for the reward == mean(per_item_scores) identity.
inline constexpr double kRewardMeanTolerance = 1e-12;

// One node of the search tree: a recommended item list plus scoring and
// provenance. Treated as immutable once scored.
struct SearchState {
    std::int64_t state_id = 0;
    std::vector<int> items;
    std::optional<std::vector<double>> per_item_scores;
    std::optional<double> reward;
    int depth = 0;
    std::optional<std::int64_t> parent_state_id;
    std::optional<Critique> critique_used;

    bool scored() const { return reward.has_value(); }

    // Throws ValidationError when an invariant is broken:
    //  - duplicate item ids
    //  - per_item_scores and reward must be present together, scores in [0,1],
    //    reward equal to their mean within kRewardMeanTolerance
    //  - depth == 0 iff the state has no parent and no critique
    void validate() const;
};

// Renders "Title (genre: g1, g2; actor: a1)" for the requested kinds, in the
// order given. Kinds without values are omitted; with no values at all the
// bare title is returned.
std::string format_item_with_attributes(const Item& item,
                                        std::span<const AttributeKind> kinds);

// Convenience overload over all four kinds in canonical order.
std::string format_item_with_attributes(const Item& item);

// Canonical form used for title identity and fuzzy matching: lowercase,
// whitespace runs collapsed, surrounding punctuation stripped. Parentheses
// are kept so that year suffixes like "(1995)" survive.
std::string normalize_title(std::string_view raw);

}  // namespace recsearch
