#include "recsearch/config.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "recsearch/errors.hpp"
#include "recsearch/rng.hpp"

namespace recsearch {

namespace {

template <typename T>
void read_field(const nlohmann::json& section, const char* section_name, const char* key,
                T& out) {
    if (!section.contains(key)) return;
    try {
        out = section.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("invalid config value for ") + section_name + "." +
                          key);
    }
}

void check_known_keys(const nlohmann::json& object, const char* section_name,
                      std::initializer_list<const char*> known) {
    for (const auto& [key, _] : object.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ConfigError("unknown config key: " + std::string(section_name) +
                              (*section_name ? "." : "") + key);
        }
    }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    check_known_keys(j, "", {"catalog", "backends", "search", "ranker", "synthesis"});

    RunConfig config;

    if (!j.contains("catalog") || !j["catalog"].contains("path")) {
        throw ConfigError("missing config key: catalog.path");
    }
    const auto& catalog = j["catalog"];
    check_known_keys(catalog, "catalog", {"path", "fuzzy_threshold"});
    config.catalog_path = catalog.at("path").get<std::string>();
    read_field(catalog, "catalog", "fuzzy_threshold", config.fuzzy_threshold);

    if (!j.contains("backends") || !j["backends"].contains("kind")) {
        throw ConfigError("missing config key: backends.kind");
    }
    const auto& backends = j["backends"];
    check_known_keys(backends, "backends", {"kind", "http"});
    config.backend_kind = backends.at("kind").get<std::string>();
    if (config.backend_kind != "scripted" && config.backend_kind != "http") {
        throw ConfigError("backends.kind must be 'scripted' or 'http', got '" +
                          config.backend_kind + "'");
    }
    config.http = HttpBackendConfig::from_env();
    if (backends.contains("http")) {
        const auto& http = backends["http"];
        check_known_keys(http, "backends.http",
                         {"base_url", "api_key", "model", "crs_model", "user_model",
                          "timeout_ms", "prefix_mode"});
        read_field(http, "backends.http", "base_url", config.http.base_url);
        read_field(http, "backends.http", "api_key", config.http.api_key);
        read_field(http, "backends.http", "model", config.http.model);
        read_field(http, "backends.http", "crs_model", config.http_crs_model);
        read_field(http, "backends.http", "user_model", config.http_user_model);
        read_field(http, "backends.http", "timeout_ms", config.http.timeout_ms);
        read_field(http, "backends.http", "prefix_mode", config.http.prefix_mode);
    }

    if (j.contains("search")) {
        const auto& search = j["search"];
        check_known_keys(search, "search",
                         {"beam_width", "expand_width", "depth", "init_count",
                          "list_length", "init_temperature", "critique_temperature",
                          "revision_temperature", "master_seed", "max_concurrency"});
        read_field(search, "search", "beam_width", config.search.beam_width);
        read_field(search, "search", "expand_width", config.search.expand_width);
        read_field(search, "search", "depth", config.search.depth);
        read_field(search, "search", "init_count", config.search.init_count);
        read_field(search, "search", "list_length", config.search.list_length);
        read_field(search, "search", "init_temperature", config.search.init_temperature);
        read_field(search, "search", "critique_temperature",
                   config.search.critique_temperature);
        read_field(search, "search", "revision_temperature",
                   config.search.revision_temperature);
        read_field(search, "search", "master_seed", config.search.master_seed);
        read_field(search, "search", "max_concurrency", config.search.max_concurrency);
        config.search.validate();
    }

    if (j.contains("ranker")) {
        const auto& ranker = j["ranker"];
        check_known_keys(ranker, "ranker", {"l_out", "aggregation"});
        read_field(ranker, "ranker", "l_out", config.ranker_l_out);
        if (ranker.contains("aggregation")) {
            config.ranker_aggregation =
                aggregation_from_name(ranker.at("aggregation").get<std::string>());
        }
        if (config.ranker_l_out < 1) {
            throw ConfigError("ranker.l_out must be >= 1");
        }
    }

    if (j.contains("synthesis")) {
        const auto& synthesis = j["synthesis"];
        check_known_keys(synthesis, "synthesis",
                         {"list_length", "max_lists", "negatives_per_positive",
                          "teacher_temperature", "max_concurrency", "seed"});
        read_field(synthesis, "synthesis", "list_length", config.synthesis.list_length);
        read_field(synthesis, "synthesis", "max_lists", config.synthesis.max_lists);
        read_field(synthesis, "synthesis", "negatives_per_positive",
                   config.synthesis.negatives_per_positive);
        read_field(synthesis, "synthesis", "teacher_temperature",
                   config.synthesis.teacher_temperature);
        read_field(synthesis, "synthesis", "max_concurrency",
                   config.synthesis.max_concurrency);
        read_field(synthesis, "synthesis", "seed", config.synthesis.seed);
    }

    return config;
}

HttpBackendConfig RunConfig::crs_http() const {
    HttpBackendConfig c = http;
    if (!http_crs_model.empty()) c.model = http_crs_model;
    return c;
}

HttpBackendConfig RunConfig::user_http() const {
    HttpBackendConfig c = http;
    if (!http_user_model.empty()) c.model = http_user_model;
    return c;
}

std::string effective_config_json(const RunConfig& config) {
    nlohmann::json j;
    j["catalog"] = {{"path", config.catalog_path},
                    {"fuzzy_threshold", config.fuzzy_threshold}};
    j["backends"] = {{"kind", config.backend_kind},
                     {"http",
                      {{"base_url", config.http.base_url},
                       {"api_key_set", !config.http.api_key.empty()},
                       {"model", config.http.model},
                       {"crs_model", config.crs_http().model},
                       {"user_model", config.user_http().model},
                       {"timeout_ms", config.http.timeout_ms},
                       {"prefix_mode", config.http.prefix_mode}}}};
    j["search"] = {{"beam_width", config.search.beam_width},
                   {"expand_width", config.search.expand_width},
                   {"depth", config.search.depth},
                   {"init_count", config.search.resolved_init_count()},
                   {"list_length", config.search.list_length},
                   {"init_temperature", config.search.init_temperature},
                   {"critique_temperature", config.search.critique_temperature},
                   {"revision_temperature", config.search.revision_temperature},
                   {"master_seed", config.search.master_seed},
                   {"max_concurrency", config.search.max_concurrency}};
    j["ranker"] = {{"l_out", config.ranker_l_out},
                   {"aggregation", std::string(aggregation_name(config.ranker_aggregation))}};
    j["synthesis"] = {{"list_length", config.synthesis.list_length},
                      {"max_lists", config.synthesis.max_lists},
                      {"negatives_per_positive", config.synthesis.negatives_per_positive},
                      {"teacher_temperature", config.synthesis.teacher_temperature},
                      {"max_concurrency", config.synthesis.max_concurrency},
                      {"seed", config.synthesis.seed}};
    return j.dump(2);
}

std::string config_digest(const RunConfig& config) {
    const std::string echo = effective_config_json(config);
    const std::uint64_t h = fnv1a64(echo.data(), echo.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace recsearch
