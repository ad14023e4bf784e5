#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "recsearch/domain.hpp"

namespace recsearch {

// Result of resolving free-form text against the catalog. item_id is set
// only when similarity reached the threshold.
struct MatchResult {
    std::optional<int> item_id;
    double similarity = 0.0;
    std::string raw_text;
};

inline constexpr double kDefaultFuzzyThreshold = 0.9;

// Immutable item catalog with a normalized-title index. Item ids are dense
// (0..size-1) and equal to the position in the backing file.
class ItemCatalog {
  public:
    ItemCatalog() = default;
    explicit ItemCatalog(std::vector<Item> items);

    // Loads a JSONL file, one item per line:
    //   {"item_id": 0, "title": "...", "attributes": {"genre": [...],
    //    "actor": [...], "writer": [...], "director": [...]}}
    // All four attribute keys must be present. Throws ParseError with the
    // offending line number on malformed input, duplicate normalized titles,
    // non-dense ids, or an empty file.
    static ItemCatalog load(const std::string& path);

    std::size_t size() const { return items_.size(); }
    const Item& at(int item_id) const;
    std::span<const Item> items() const { return items_; }

    std::optional<int> lookup_normalized(std::string_view title) const;

    // Precomputed normalized forms, indexed by item_id.
    const std::string& normalized_title(int item_id) const;
    const std::string& normalized_title_no_year(int item_id) const;

  private:
    void build_index();

    std::vector<Item> items_;
    std::vector<std::string> normalized_;
    std::vector<std::string> normalized_no_year_;  // == normalized_ when no year suffix
    std::unordered_map<std::string, int> index_;
};

// Similarity in [0, 1] based on insert/delete edit operations only:
// 2 * LCS(a, b) / (|a| + |b|). Two empty strings compare equal (1.0).
double indel_similarity(std::string_view a, std::string_view b);

// Removes one trailing " (dddd)" year suffix if present: "Heat (1995)" ->
// "Heat". Returns the input unchanged otherwise.
std::string_view strip_trailing_year(std::string_view title);

// Resolves raw text to the best catalog item. The similarity of a candidate
// is the max of indel similarity against its normalized title and against
// the title with the year suffix removed; ties go to the lower item_id.
// raw must be non-empty after trimming.
MatchResult fuzzy_match(std::string_view raw, const ItemCatalog& catalog,
                        double threshold = kDefaultFuzzyThreshold);

// Uniform sample of `count` distinct item ids from the catalog minus
// `exclude`, deterministic in `seed`. Throws ValidationError when fewer than
// `count` ids remain.
std::vector<int> sample_negatives(const ItemCatalog& catalog,
                                  const std::unordered_set<int>& exclude,
                                  std::size_t count, std::uint64_t seed);

}  // namespace recsearch
