#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "kwrec/corpus.hpp"
#include "kwrec/llm_client.hpp"
#include "kwrec/retrieval.hpp"

namespace kwrec {

enum class KeywordOrder { TfirfDesc, Shuffled };
enum class CandidateOrder { RetrievalOrder, Shuffled };

struct PromptConfig {
    std::string template_text;  // empty -> default template
    std::string task_preamble;  // empty -> default preamble
    int shots = 0;
    int keywords_per_item = 10;
    KeywordOrder keyword_order = KeywordOrder::TfirfDesc;
    std::uint64_t keyword_order_seed = 0;
    CandidateOrder candidate_order = CandidateOrder::RetrievalOrder;
    std::uint64_t candidate_order_seed = 0;
    int max_user_keywords = 30;
    int example_candidate_count = 20;
};

const std::string& default_prompt_template();
const std::string& default_task_preamble();

// Rejects templates that do not contain each placeholder exactly once:
// {task_preamble} {examples} {user_keywords} {candidates_block}.
void validate_prompt_config(const PromptConfig& config);

struct FewShotExample {
    std::vector<std::string> example_keywords;
    std::vector<std::string> example_candidates;  // lexicographic in the prompt
    std::vector<std::string> example_ranking;     // permutation, rating desc
};

struct PromptBundle {
    std::string text;
    std::vector<std::string> candidate_ids;  // order as embedded in text
    std::string config_fingerprint;
};

enum class Provenance { Llm, Repaired };

struct RankedList {
    std::vector<std::string> item_ids;  // permutation of the candidate set
    std::vector<Provenance> provenance;
};

// Training users ranked by Jaccard overlap with the query keywords (ties by
// user_id); each selected user contributes their rated items plus retrieval
// filler up to example_candidate_count, ranked by their actual ratings.
std::vector<FewShotExample> select_examples(
    const std::map<std::string, UserProfile>& train_user_profiles,
    const std::vector<std::string>& query_keywords, int shots, const KeywordItemIndex& index,
    int example_candidate_count);

PromptBundle build_prompt(const std::vector<std::string>& query_keywords,
                          const CandidateList& candidates, const KeywordItemIndex& index,
                          const std::vector<FewShotExample>& examples,
                          const PromptConfig& config);

// Token-cost comparison variant: same template, but user and item content
// rendered from full review texts instead of keyword sets.
PromptBundle build_review_prompt(const std::vector<std::string>& user_texts,
                                 const CandidateList& candidates,
                                 const std::map<std::string, std::vector<std::string>>& texts,
                                 const PromptConfig& config);

// Never fails: unknown ids are dropped, duplicates keep the first occurrence,
// missing candidates are appended in candidate order tagged Repaired. A fully
// unparseable response therefore yields the original candidate order.
RankedList parse_response(const std::string& text,
                          const std::vector<std::string>& candidate_ids);

// Thread-safe JSONL audit writer: one record per rerank call.
class AuditLog {
public:
    explicit AuditLog(std::filesystem::path path) : path_(std::move(path)) {}

    void append(const std::string& json_line);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mutex_;
};

std::string audit_record(const PromptBundle& bundle, const std::string& raw_response,
                         const RankedList& ranked);

// Sends the prompt, parses and repairs the response. Transport errors are
// rethrown with the bundle fingerprint attached.
RankedList rerank(LlmClient& client, const PromptBundle& bundle, AuditLog* audit = nullptr);

// Same, but hands back the raw response so callers managing their own audit
// buffers (the experiment runner) can record it.
struct RerankOutcome {
    RankedList ranked;
    std::string raw_response;
};
RerankOutcome rerank_with_raw(LlmClient& client, const PromptBundle& bundle);

}  // namespace kwrec
