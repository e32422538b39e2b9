#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kwrec/corpus.hpp"
#include "kwrec/embeddings.hpp"

namespace kwrec {

// Sparse keyword-item weight matrix. Row w holds a_r^w = tf_r^w * irf^w with
// tf_r^w = f_r^w / q_w and irf^w = ln(|items| / f^w). Entries exist exactly
// where f_r^w > 0; a ubiquitous keyword keeps its entries with weight 0.
struct KeywordItemIndex {
    std::vector<std::string> vocab;  // sorted lexicographically
    std::vector<std::string> items;  // caller-supplied column order

    // postings by keyword: [row_begin[w], row_begin[w+1]) into entry_*
    std::vector<std::size_t> row_begin;
    std::vector<std::uint32_t> entry_item;
    std::vector<std::int64_t> entry_count;  // f_r^w
    std::vector<double> entry_weight;       // a_r^w

    std::vector<std::int64_t> global_count;  // q_w per keyword
    std::vector<std::uint32_t> doc_freq;     // f^w: items containing w
    std::vector<double> irf;

    // postings by item, rebuilt from the rows (not serialized)
    std::vector<std::size_t> col_begin;
    std::vector<std::uint32_t> col_keyword;
    std::vector<double> col_weight;

    std::optional<std::uint32_t> vocab_index(std::string_view keyword) const;
};

// Binary query over the index vocabulary plus the record of OOV replacements
// that produced it.
struct QueryVector {
    std::set<std::string> selected;
    std::map<std::string, std::string> substitutions;  // original -> replacement
};

struct Candidate {
    std::string item_id;
    double score = 0.0;
};

struct CandidateList {
    std::vector<Candidate> entries;  // scores non-increasing, ids distinct
    int k = 0;                       // requested length
};

struct RetrievalResult {
    CandidateList candidates;
    QueryVector query;
};

KeywordItemIndex build_index(const std::map<std::string, ItemProfile>& item_profiles,
                             std::vector<std::string> items);

// score(r) = sum of a_r^w over selected keywords; the binary-indicator row
// times the weight matrix. Selected keywords must be in vocab.
std::vector<double> score_items(const KeywordItemIndex& index, const QueryVector& query);

// Per-query kernel applied across queries; OpenMP over queries, results
// identical to the serial loop.
std::vector<std::vector<double>> score_batch(const KeywordItemIndex& index,
                                             const std::vector<QueryVector>& queries,
                                             bool parallel = true);

// OOV keywords are replaced by their nearest in-vocab neighbor before
// scoring. Top-k by score descending, ties and zero-score padding by
// lexicographic item_id, so the list always has min(k, |items|) entries.
RetrievalResult retrieve(const KeywordItemIndex& index,
                         const std::vector<std::string>& raw_keywords, int k,
                         const EmbeddingStore& store);

std::vector<RetrievalResult> retrieve_batch(const KeywordItemIndex& index,
                                            const std::vector<std::vector<std::string>>& queries,
                                            int k, const EmbeddingStore& store,
                                            bool parallel = true);

// Substitution-free variant: keywords missing from the vocab are ignored.
// Used for few-shot example filler where train keywords are in vocab anyway.
CandidateList retrieve_known(const KeywordItemIndex& index,
                             const std::vector<std::string>& keywords, int k);

// Baseline: score(r) = |Q ∩ keys(r)| / |Q ∪ keys(r)|, same tie/padding rules.
CandidateList jaccard_retrieve(const std::map<std::string, ItemProfile>& item_profiles,
                               const std::vector<std::string>& raw_keywords, int k);

// Reconstructs keyword-count profiles from the stored f_r^w entries, so the
// Jaccard baseline can run off a persisted index.
std::map<std::string, ItemProfile> item_profiles_from_index(const KeywordItemIndex& index);

inline constexpr std::string_view kIndexSchema = "kwrec.index.v1";

void save_index(const KeywordItemIndex& index, const std::filesystem::path& path);
KeywordItemIndex load_index(const std::filesystem::path& path);

}  // namespace kwrec
