#include <doctest.h>

#include <string>

#include "recsearch/config.hpp"
#include "recsearch/errors.hpp"
#include "testutil.hpp"

using namespace recsearch;

namespace {

std::string write_config(const testutil::TempDir& dir, const std::string& name,
                         const std::string& body) {
    const std::string path = dir.file(name);
    testutil::write_text_file(path, body);
    return path;
}

constexpr const char* kMinimal = R"({
  "catalog": {"path": "items.jsonl"},
  "backends": {"kind": "scripted"}
})";

}  // namespace

TEST_CASE("a minimal config loads with every default in place") {
    testutil::TempDir dir("config");
    const RunConfig config = load_run_config(write_config(dir, "min.json", kMinimal));

    CHECK(config.catalog_path == "items.jsonl");
    CHECK(config.fuzzy_threshold == doctest::Approx(0.9));
    CHECK(config.backend_kind == "scripted");
    CHECK(config.http_crs_model.empty());
    CHECK(config.http_user_model.empty());

    CHECK(config.search.beam_width == 4);
    CHECK(config.search.expand_width == 4);
    CHECK(config.search.depth == 5);
    CHECK(config.search.init_count == 0);
    CHECK(config.search.resolved_init_count() == 16);
    CHECK(config.search.list_length == 10);
    CHECK(config.search.init_temperature == doctest::Approx(1.0));
    CHECK(config.search.master_seed == 0);

    CHECK(config.ranker_l_out == 50);
    CHECK(config.ranker_aggregation == ScoreAggregation::Max);

    CHECK(config.synthesis.list_length == 10);
    CHECK(config.synthesis.max_lists == 64);
    CHECK(config.synthesis.negatives_per_positive == 1);
    CHECK(config.synthesis.teacher_temperature == doctest::Approx(0.0));
    CHECK(config.synthesis.max_concurrency == 1);
    CHECK(config.synthesis.seed == 0);
}

TEST_CASE("missing required keys are named exactly") {
    testutil::TempDir dir("config-missing");

    SUBCASE("no catalog section") {
        const std::string path =
            write_config(dir, "a.json", R"({"backends": {"kind": "scripted"}})");
        try {
            load_run_config(path);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()) == "missing config key: catalog.path");
        }
    }
    SUBCASE("catalog section without path") {
        const std::string path = write_config(
            dir, "b.json",
            R"({"catalog": {}, "backends": {"kind": "scripted"}})");
        CHECK_THROWS_WITH_AS(load_run_config(path), "missing config key: catalog.path",
                             ConfigError);
    }
    SUBCASE("no backends section") {
        const std::string path =
            write_config(dir, "c.json", R"({"catalog": {"path": "x"}})");
        CHECK_THROWS_WITH_AS(load_run_config(path), "missing config key: backends.kind",
                             ConfigError);
    }
    SUBCASE("backends section without kind") {
        const std::string path = write_config(
            dir, "d.json", R"({"catalog": {"path": "x"}, "backends": {}})");
        CHECK_THROWS_WITH_AS(load_run_config(path), "missing config key: backends.kind",
                             ConfigError);
    }
}

TEST_CASE("unknown sections and keys are rejected by name") {
    testutil::TempDir dir("config-unknown");

    SUBCASE("unknown section") {
        const std::string path = write_config(
            dir, "a.json",
            R"({"catalog": {"path": "x"}, "backends": {"kind": "scripted"},
                "rankers": {}})");
        CHECK_THROWS_WITH_AS(load_run_config(path), "unknown config key: rankers",
                             ConfigError);
    }
    SUBCASE("misspelled search key") {
        const std::string path = write_config(
            dir, "b.json",
            R"({"catalog": {"path": "x"}, "backends": {"kind": "scripted"},
                "search": {"beem_width": 2}})");
        CHECK_THROWS_WITH_AS(load_run_config(path),
                             "unknown config key: search.beem_width", ConfigError);
    }
    SUBCASE("misspelled http key") {
        const std::string path = write_config(
            dir, "c.json",
            R"({"catalog": {"path": "x"},
                "backends": {"kind": "http", "http": {"modle": "m"}}})");
        CHECK_THROWS_WITH_AS(load_run_config(path),
                             "unknown config key: backends.http.modle", ConfigError);
    }
}

TEST_CASE("invalid values are rejected by key or rule") {
    testutil::TempDir dir("config-invalid");

    SUBCASE("wrong type") {
        const std::string path = write_config(
            dir, "a.json",
            R"({"catalog": {"path": "x"}, "backends": {"kind": "scripted"},
                "search": {"depth": "five"}})");
        CHECK_THROWS_WITH_AS(load_run_config(path),
                             "invalid config value for search.depth", ConfigError);
    }
    SUBCASE("unsupported backend kind") {
        const std::string path = write_config(
            dir, "b.json",
            R"({"catalog": {"path": "x"}, "backends": {"kind": "local"}})");
        try {
            load_run_config(path);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("'scripted' or 'http'") !=
                  std::string::npos);
            CHECK(std::string(e.what()).find("'local'") != std::string::npos);
        }
    }
    SUBCASE("search settings are validated on load") {
        const std::string path = write_config(
            dir, "c.json",
            R"({"catalog": {"path": "x"}, "backends": {"kind": "scripted"},
                "search": {"beam_width": 0}})");
        CHECK_THROWS_AS(load_run_config(path), ConfigError);
    }
    SUBCASE("ranker l_out below one") {
        const std::string path = write_config(
            dir, "d.json",
            R"({"catalog": {"path": "x"}, "backends": {"kind": "scripted"},
                "ranker": {"l_out": 0}})");
        CHECK_THROWS_WITH_AS(load_run_config(path), "ranker.l_out must be >= 1",
                             ConfigError);
    }
    SUBCASE("unknown aggregation") {
        const std::string path = write_config(
            dir, "e.json",
            R"({"catalog": {"path": "x"}, "backends": {"kind": "scripted"},
                "ranker": {"aggregation": "median"}})");
        CHECK_THROWS_AS(load_run_config(path), ConfigError);
    }
    SUBCASE("unreadable file") {
        CHECK_THROWS_AS(load_run_config(dir.file("absent.json")), ConfigError);
    }
    SUBCASE("malformed JSON") {
        const std::string path = write_config(dir, "f.json", "{nope");
        CHECK_THROWS_AS(load_run_config(path), ConfigError);
    }
}

TEST_CASE("sections override their defaults") {
    testutil::TempDir dir("config-override");
    const std::string path = write_config(dir, "full.json", R"({
  "catalog": {"path": "cat.jsonl", "fuzzy_threshold": 0.8},
  "backends": {"kind": "scripted"},
  "search": {"beam_width": 2, "expand_width": 3, "depth": 4, "init_count": 5,
             "list_length": 6, "init_temperature": 0.7,
             "critique_temperature": 0.9, "revision_temperature": 0.2,
             "master_seed": 99, "max_concurrency": 8},
  "ranker": {"l_out": 25, "aggregation": "mean"},
  "synthesis": {"list_length": 12, "max_lists": 20, "negatives_per_positive": 3,
                "teacher_temperature": 0.4, "max_concurrency": 2, "seed": 77}
})");
    const RunConfig config = load_run_config(path);

    CHECK(config.fuzzy_threshold == doctest::Approx(0.8));
    CHECK(config.search.beam_width == 2);
    CHECK(config.search.expand_width == 3);
    CHECK(config.search.depth == 4);
    CHECK(config.search.init_count == 5);
    CHECK(config.search.list_length == 6);
    CHECK(config.search.init_temperature == doctest::Approx(0.7));
    CHECK(config.search.critique_temperature == doctest::Approx(0.9));
    CHECK(config.search.revision_temperature == doctest::Approx(0.2));
    CHECK(config.search.master_seed == 99);
    CHECK(config.search.max_concurrency == 8);
    CHECK(config.ranker_l_out == 25);
    CHECK(config.ranker_aggregation == ScoreAggregation::Mean);
    CHECK(config.synthesis.list_length == 12);
    CHECK(config.synthesis.max_lists == 20);
    CHECK(config.synthesis.negatives_per_positive == 3);
    CHECK(config.synthesis.teacher_temperature == doctest::Approx(0.4));
    CHECK(config.synthesis.max_concurrency == 2);
    CHECK(config.synthesis.seed == 77);
}

TEST_CASE("http backends resolve per-role models") {
    testutil::TempDir dir("config-http");
    const std::string path = write_config(dir, "http.json", R"({
  "catalog": {"path": "cat.jsonl"},
  "backends": {"kind": "http",
               "http": {"base_url": "http://localhost:9999", "api_key": "sk-test",
                        "model": "base-model", "crs_model": "rec-model",
                        "user_model": "sim-model", "timeout_ms": 1234,
                        "prefix_mode": false}}
})");
    const RunConfig config = load_run_config(path);

    CHECK(config.backend_kind == "http");
    CHECK(config.http.base_url == "http://localhost:9999");
    CHECK(config.http.api_key == "sk-test");
    CHECK(config.http.model == "base-model");
    CHECK(config.http.timeout_ms == 1234);
    CHECK(config.http.prefix_mode == false);
    CHECK(config.crs_http().model == "rec-model");
    CHECK(config.user_http().model == "sim-model");
    // Everything but the model carries over unchanged.
    CHECK(config.crs_http().base_url == config.http.base_url);
    CHECK(config.user_http().timeout_ms == 1234);
}

TEST_CASE("absent model overrides fall back to the shared model") {
    testutil::TempDir dir("config-http-fallback");
    const std::string path = write_config(dir, "http.json", R"({
  "catalog": {"path": "cat.jsonl"},
  "backends": {"kind": "http", "http": {"base_url": "http://h", "model": "m"}}
})");
    const RunConfig config = load_run_config(path);
    CHECK(config.crs_http().model == "m");
    CHECK(config.user_http().model == "m");
}

TEST_CASE("the effective config hides the key but records that one is set") {
    testutil::TempDir dir("config-echo");
    const std::string path = write_config(dir, "http.json", R"({
  "catalog": {"path": "cat.jsonl"},
  "backends": {"kind": "http", "http": {"api_key": "sk-secret-value"}}
})");
    const std::string echo = effective_config_json(load_run_config(path));

    CHECK(echo.find("sk-secret-value") == std::string::npos);
    CHECK(echo.find("\"api_key_set\": true") != std::string::npos);
    // init_count is echoed in resolved form.
    CHECK(echo.find("\"init_count\": 16") != std::string::npos);
}

TEST_CASE("config digests are stable and sensitive") {
    testutil::TempDir dir("config-digest");
    const std::string path = write_config(dir, "a.json", kMinimal);

    const std::string digest = config_digest(load_run_config(path));
    CHECK(digest.size() == 16);
    CHECK(digest.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(config_digest(load_run_config(path)) == digest);

    const std::string changed = write_config(dir, "b.json", R"({
  "catalog": {"path": "items.jsonl"},
  "backends": {"kind": "scripted"},
  "search": {"master_seed": 1}
})");
    CHECK(config_digest(load_run_config(changed)) != digest);
}
