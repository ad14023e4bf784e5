#pragma once

#include <optional>
#include <string>
#include <vector>

#include "recsearch/catalog.hpp"
#include "recsearch/gateway.hpp"

namespace recsearch {

// Deterministic in-process stand-ins for the model backends. They parse the
// exact prompt layouts produced by prompts.hpp, so end-to-end behavior can
// be tested without a model server. Every reply is a pure function of
// (request, request.seed).

struct ScriptedUserConfig {
    // Attribute values (matched case-insensitively) that define what the
    // simulated person is actually after.
    std::vector<std::string> target_attributes;
    double clamp_lo = 0.05;
    double clamp_hi = 0.95;
};

// Plays the seeker: answers scoring prompts with Yes/No token probabilities
// derived from attribute overlap, and critique prompts with a template
// naming one target attribute the list is missing.
class ScriptedUserBackend : public Backend {
  public:
    ScriptedUserBackend(const ItemCatalog& catalog, ScriptedUserConfig config);

    GenerationResult generate_once(const GenerationRequest& request) override;
    std::string name() const override { return "scripted-user"; }

    // P(accept) for one item: Jaccard overlap between the item's attribute
    // values and the targets, clamped into [clamp_lo, clamp_hi].
    double acceptance_probability(const Item& item) const;

  private:
    GenerationResult answer_scoring(const GenerationRequest& request) const;
    GenerationResult answer_critique(const GenerationRequest& request) const;

    const ItemCatalog& catalog_;
    ScriptedUserConfig config_;
    std::vector<std::string> normalized_targets_;
};

struct ScriptedCrsConfig {
    int list_length = 10;
};

// Plays the recommender: collects attribute mentions from the dialogue and
// the feedback line, ranks catalog items by how many mentioned attributes
// they carry, and emits a numbered title list. temperature > 0 perturbs the
// ranking with seeded Gumbel noise.
class ScriptedCrsBackend : public Backend {
  public:
    ScriptedCrsBackend(const ItemCatalog& catalog, ScriptedCrsConfig config = {});

    GenerationResult generate_once(const GenerationRequest& request) override;
    std::string name() const override { return "scripted-crs"; }

  private:
    const ItemCatalog& catalog_;
    ScriptedCrsConfig config_;
    std::vector<std::string> vocabulary_;  // normalized attribute values, first-seen order
    std::vector<std::vector<int>> item_attribute_ids_;  // per item, vocabulary indices
};

// Resolves a rendered item line ("Title (genre: ...)" or bare "Title") back
// to its catalog item by longest title prefix. Returns nullopt when nothing
// matches.
std::optional<int> resolve_item_line(const ItemCatalog& catalog, std::string_view line);

}  // namespace recsearch
