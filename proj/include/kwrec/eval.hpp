#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace kwrec {

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double ndcg = 0.0;
};

struct MetricsReport {
    std::map<int, Metrics> per_k;
    int users_evaluated = 0;
    int users_skipped = 0;  // users whose relevance set was empty
};

// Binary relevance. P@K = hits/K, R@K = hits/|relevant|, NDCG with gain 1 and
// discount 1/log2(rank+1), ideal DCG truncated at min(K, |relevant|).
Metrics metrics_at_k(const std::vector<std::string>& ranked,
                     const std::set<std::string>& relevant, int k);

// Arithmetic mean of per-user metrics over users with non-empty relevance.
// Every result user must have a truth entry.
MetricsReport evaluate_run(const std::map<std::string, std::vector<std::string>>& results,
                           const std::map<std::string, std::set<std::string>>& truths,
                           const std::vector<int>& ks);

}  // namespace kwrec
