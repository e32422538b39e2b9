#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kwrec/corpus.hpp"
#include "kwrec/eval.hpp"
#include "kwrec/llm_client.hpp"
#include "kwrec/rerank.hpp"

namespace kwrec {

inline constexpr std::string_view kReportSchema = "kwrec.report.v1";
inline constexpr std::string_view kManifestSchema = "kwrec.manifest.v1";

struct ExperimentConfig {
    // data
    std::filesystem::path reviews_path;
    std::filesystem::path tagged_path;      // optional: merge keywords first
    std::filesystem::path embeddings_path;  // optional: else fallback embedder
    std::size_t embedding_dim = 64;

    // split
    SplitSpec split;

    // retrieval
    std::string method = "mpg";  // mpg | jaccard
    int k_retrieve = 20;

    // rerank
    bool rerank_enabled = false;
    std::string client = "identity";  // identity | reverse | transcript | http
    PromptConfig prompt;
    std::string endpoint;
    std::string model;
    int retries = 3;
    int backoff_ms = 0;
    int max_in_flight = 4;
    std::string on_error = "fail";  // fail | retrieval_order
    std::vector<TranscriptMockClient::Entry> transcript;

    // eval
    std::vector<int> ks = {1, 3, 20};
    int max_query_keywords = 0;  // 0 = use all of the user's keywords

    // output
    std::filesystem::path output_dir = "out";
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ExperimentOutcome {
    MetricsReport report;
    std::string report_json;  // exact bytes written to report.json
    std::filesystem::path report_path;
    std::filesystem::path manifest_path;
    std::filesystem::path audit_path;  // empty when rerank is off
};

// split -> profiles -> index -> per-user retrieve -> optional rerank ->
// metrics. Deterministic for fixed config and seeds with mock clients; all
// artifacts are written under config.output_dir.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

// The simulated cold-start query for a held-out user: profile keywords
// ordered by count descending then keyword, optionally capped.
std::vector<std::string> query_keywords_for(const UserProfile& profile, int max_keywords);

}  // namespace kwrec
