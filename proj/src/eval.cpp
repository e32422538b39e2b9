#include "kwrec/eval.hpp"

#include <cmath>
#include <stdexcept>

namespace kwrec {

Metrics metrics_at_k(const std::vector<std::string>& ranked,
                     const std::set<std::string>& relevant, int k) {
    if (k < 1) throw std::invalid_argument("metrics_at_k: k must be >= 1");
    if (relevant.empty()) {
        throw std::invalid_argument("metrics_at_k: empty relevance set");
    }

    const std::size_t depth = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
    std::size_t hits = 0;
    double dcg = 0.0;
    for (std::size_t i = 0; i < depth; ++i) {
        if (relevant.count(ranked[i])) {
            ++hits;
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
        }
    }
    const std::size_t ideal = std::min<std::size_t>(static_cast<std::size_t>(k), relevant.size());
    double idcg = 0.0;
    for (std::size_t i = 0; i < ideal; ++i) {
        idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }

    Metrics m;
    m.precision = static_cast<double>(hits) / static_cast<double>(k);
    m.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
    m.ndcg = idcg == 0.0 ? 0.0 : dcg / idcg;
    return m;
}

MetricsReport evaluate_run(const std::map<std::string, std::vector<std::string>>& results,
                           const std::map<std::string, std::set<std::string>>& truths,
                           const std::vector<int>& ks) {
    MetricsReport report;
    for (int k : ks) report.per_k[k] = Metrics{};

    for (const auto& [user_id, ranked] : results) {
        auto truth = truths.find(user_id);
        if (truth == truths.end()) {
            throw std::runtime_error("evaluate_run: no relevance set for user " + user_id);
        }
        if (truth->second.empty()) {
            ++report.users_skipped;
            continue;
        }
        for (int k : ks) {
            Metrics m = metrics_at_k(ranked, truth->second, k);
            report.per_k[k].precision += m.precision;
            report.per_k[k].recall += m.recall;
            report.per_k[k].ndcg += m.ndcg;
        }
        ++report.users_evaluated;
    }

    if (report.users_evaluated > 0) {
        const double n = report.users_evaluated;
        for (auto& [k, m] : report.per_k) {
            m.precision /= n;
            m.recall /= n;
            m.ndcg /= n;
        }
    }
    return report;
}

}  // namespace kwrec
