#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace recsearch {

// Metric name ("recall@10", "ndcg@50", "mrr@10") -> value.
using MetricMap = std::map<std::string, double>;

// Rank metrics for one turn. `ranked` is the candidate ranking (best first,
// no duplicates), `ground_truth` the relevant item ids (non-empty). For each
// cut k:
//   recall@k = |gt hits in top k| / |gt|
//   ndcg@k   = sum over hit positions p<=k of 1/log2(p+1), normalized by the
//              ideal DCG for min(|gt|, k) hits at the top
//   mrr@k    = 1 / first hit position, 0 when there is no hit in the top k
// Positions are 1-based.
MetricMap turn_metrics(std::span<const int> ranked, std::span<const int> ground_truth,
                       std::span<const int> cuts);

inline constexpr int kDefaultCuts[] = {10, 50};

struct MetricStats {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation over runs; 0 for one run
};

struct AggregateReport {
    std::map<std::string, MetricStats> metrics;
    std::size_t run_count = 0;
    std::size_t turns_per_run = 0;
};

// Mean over turns within each run, then mean and sample standard deviation
// over runs. All runs must be non-empty and agree on the metric keys.
AggregateReport aggregate(const std::vector<std::vector<MetricMap>>& runs);

std::string report_to_json(const AggregateReport& report);

// Fixed-width table, one column per metric, "mean +/- std" cells.
std::string format_report_table(const AggregateReport& report);

}  // namespace recsearch
