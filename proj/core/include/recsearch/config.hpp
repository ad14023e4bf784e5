#pragma once

#include <string>

#include "recsearch/http_backend.hpp"
#include "recsearch/ranker.hpp"
#include "recsearch/search.hpp"
#include "recsearch/synthesis.hpp"

namespace recsearch {

// One JSON config file with a section per module. catalog.path and
// backends.kind are required; everything else has defaults. Unknown section
// names are rejected so typos surface as errors instead of silent defaults.
struct RunConfig {
    std::string catalog_path;
    double fuzzy_threshold = kDefaultFuzzyThreshold;

    std::string backend_kind;  // "scripted" or "http"
    HttpBackendConfig http;    // used when backend_kind == "http"
    // Per-role model overrides for http backends; empty means http.model.
    // The recommender and the simulated user are usually different models
    // served behind the same endpoint.
    std::string http_crs_model;
    std::string http_user_model;

    // http config with the override applied.
    HttpBackendConfig crs_http() const;
    HttpBackendConfig user_http() const;

    SearchConfig search;

    int ranker_l_out = 50;
    ScoreAggregation ranker_aggregation = ScoreAggregation::Max;

    SynthesisConfig synthesis;
};

// Throws ConfigError naming the missing/invalid key, e.g.
// "missing config key: backends.kind".
RunConfig load_run_config(const std::string& path);

// Every effective value, serialized deterministically. This is what run
// manifests embed, so two runs with equal settings produce equal manifests.
std::string effective_config_json(const RunConfig& config);

// 16 hex digits over effective_config_json.
std::string config_digest(const RunConfig& config);

}  // namespace recsearch
