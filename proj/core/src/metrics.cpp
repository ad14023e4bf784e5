#include "recsearch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "recsearch/errors.hpp"

namespace recsearch {

MetricMap turn_metrics(std::span<const int> ranked, std::span<const int> ground_truth,
                       std::span<const int> cuts) {
    if (ground_truth.empty()) {
        throw ValidationError("turn_metrics: ground truth is empty");
    }
    std::unordered_set<int> seen;
    for (int id : ranked) {
        if (!seen.insert(id).second) {
            throw ValidationError("turn_metrics: duplicate item " + std::to_string(id) +
                                  " in ranking");
        }
    }
    const std::unordered_set<int> relevant(ground_truth.begin(), ground_truth.end());

    MetricMap metrics;
    for (int k : cuts) {
        if (k < 1) throw ValidationError("turn_metrics: cut must be >= 1");
        const std::size_t limit = std::min<std::size_t>(ranked.size(),
                                                        static_cast<std::size_t>(k));
        std::size_t hits = 0;
        double dcg = 0.0;
        double mrr = 0.0;
        for (std::size_t i = 0; i < limit; ++i) {
            if (!relevant.contains(ranked[i])) continue;
            ++hits;
            const double position = static_cast<double>(i + 1);
            dcg += 1.0 / std::log2(position + 1.0);
            if (mrr == 0.0) mrr = 1.0 / position;
        }
        const std::size_t ideal_hits =
            std::min<std::size_t>(relevant.size(), static_cast<std::size_t>(k));
        double idcg = 0.0;
        for (std::size_t i = 1; i <= ideal_hits; ++i) {
            idcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);
        }
        const std::string suffix = "@" + std::to_string(k);
        metrics["recall" + suffix] =
            static_cast<double>(hits) / static_cast<double>(relevant.size());
        metrics["ndcg" + suffix] = idcg > 0.0 ? dcg / idcg : 0.0;
        metrics["mrr" + suffix] = mrr;
    }
    return metrics;
}

AggregateReport aggregate(const std::vector<std::vector<MetricMap>>& runs) {
    if (runs.empty()) throw ValidationError("aggregate: no runs");
    for (const auto& run : runs) {
        if (run.empty()) throw ValidationError("aggregate: a run has no turns");
    }

    // Per-run means, validated against the key set of the very first turn.
    const MetricMap& reference = runs.front().front();
    std::vector<MetricMap> run_means;
    run_means.reserve(runs.size());
    for (const auto& run : runs) {
        MetricMap sums;
        for (const auto& [key, _] : reference) sums[key] = 0.0;
        for (const MetricMap& turn : run) {
            if (turn.size() != reference.size()) {
                throw ValidationError("aggregate: metric keys differ across turns");
            }
            for (const auto& [key, value] : turn) {
                auto it = sums.find(key);
                if (it == sums.end()) {
                    throw ValidationError("aggregate: metric keys differ across turns");
                }
                it->second += value;
            }
        }
        MetricMap means;
        for (auto& [key, sum] : sums) {
            means[key] = sum / static_cast<double>(run.size());
        }
        run_means.push_back(std::move(means));
    }

    AggregateReport report;
    report.run_count = runs.size();
    report.turns_per_run = runs.front().size();
    const double n = static_cast<double>(runs.size());
    for (const auto& [key, _] : reference) {
        double mean = 0.0;
        for (const MetricMap& rm : run_means) mean += rm.at(key);
        mean /= n;
        double variance = 0.0;
        if (runs.size() > 1) {
            for (const MetricMap& rm : run_means) {
                const double d = rm.at(key) - mean;
                variance += d * d;
            }
            variance /= (n - 1.0);
        }
        report.metrics[key] = {mean, std::sqrt(variance)};
    }
    return report;
}

std::string report_to_json(const AggregateReport& report) {
    nlohmann::json metrics;
    for (const auto& [key, stats] : report.metrics) {
        metrics[key] = {{"mean", stats.mean}, {"stddev", stats.stddev}};
    }
    nlohmann::json j = {{"metrics", std::move(metrics)},
                        {"run_count", report.run_count},
                        {"turns_per_run", report.turns_per_run}};
    return j.dump(2) + "\n";
}

namespace {

// Display order: recall, ndcg, mrr, each by ascending cut.
int family_rank(std::string_view key) {
    if (key.starts_with("recall")) return 0;
    if (key.starts_with("ndcg")) return 1;
    if (key.starts_with("mrr")) return 2;
    return 3;
}

int cut_of(std::string_view key) {
    const std::size_t at = key.find('@');
    if (at == std::string_view::npos) return 0;
    int cut = 0;
    for (std::size_t i = at + 1; i < key.size(); ++i) {
        const char c = key[i];
        if (c < '0' || c > '9') break;
        cut = cut * 10 + (c - '0');
    }
    return cut;
}

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace

std::string format_report_table(const AggregateReport& report) {
    std::vector<std::string> keys;
    keys.reserve(report.metrics.size());
    for (const auto& [key, _] : report.metrics) keys.push_back(key);
    std::sort(keys.begin(), keys.end(), [](const std::string& a, const std::string& b) {
        if (family_rank(a) != family_rank(b)) return family_rank(a) < family_rank(b);
        if (cut_of(a) != cut_of(b)) return cut_of(a) < cut_of(b);
        return a < b;
    });

    std::vector<std::string> cells;
    cells.reserve(keys.size());
    for (const std::string& key : keys) {
        const MetricStats& s = report.metrics.at(key);
        std::string cell = fixed3(s.mean);
        if (report.run_count > 1) cell += " +/- " + fixed3(s.stddev);
        cells.push_back(std::move(cell));
    }

    std::string header;
    std::string row;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const std::size_t width = std::max(keys[i].size(), cells[i].size()) + 2;
        header += keys[i] + std::string(width - keys[i].size(), ' ');
        row += cells[i] + std::string(width - cells[i].size(), ' ');
    }
    std::string out = header;
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
    while (!row.empty() && row.back() == ' ') row.pop_back();
    out += row;
    out += '\n';
    return out;
}

}  // namespace recsearch
