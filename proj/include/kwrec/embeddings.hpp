#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kwrec {

// Keyword vectors ingested from file; keywords without a stored vector fall
// back to the deterministic trigram embedder, so a store with an empty map
// (dim > 0) is fully usable.
struct EmbeddingStore {
    std::size_t dim = 0;
    std::map<std::string, std::vector<double>> vectors;
};

struct EmbeddingLoadResult {
    EmbeddingStore store;
    int duplicate_warnings = 0;  // keywords seen more than once; last wins
};

struct NeighborResult {
    std::string keyword;
    double cosine = 0.0;
};

// JSONL of {keyword, vector:[floats]}; all lines must share one dimension
// and contain only finite components.
EmbeddingLoadResult load_embeddings(const std::filesystem::path& path);

// Deterministic stand-in for a sentence embedder: signed hashing of
// boundary-padded character trigrams, L2-normalized to unit length.
std::vector<double> fallback_embed(std::string_view keyword, std::size_t dim);

// Stored vector if present, else fallback_embed.
std::vector<double> resolve_vector(const EmbeddingStore& store, std::string_view keyword);

double cosine(std::span<const double> a, std::span<const double> b);

// Vocab vectors resolved up front so repeated nearest-neighbor queries skip
// re-embedding. Results are identical to the per-call scan.
struct VocabEmbeddings {
    std::vector<std::string> keywords;
    std::size_t dim = 0;
    std::vector<double> data;  // row-major, keywords.size() x dim

    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * dim, dim};
    }
};

VocabEmbeddings resolve_vocab(const EmbeddingStore& store, std::span<const std::string> vocab,
                              bool parallel = true);

// Highest-cosine vocab keyword; ties broken by lexicographic keyword order.
// The OpenMP scan partitions the vocab and merges per-thread bests with the
// same comparator, so it matches the serial scan exactly.
NeighborResult nearest_keyword(const EmbeddingStore& store, const std::string& query,
                               const VocabEmbeddings& vocab, bool parallel = true);
NeighborResult nearest_keyword(const EmbeddingStore& store, const std::string& query,
                               std::span<const std::string> vocab);

// Serial reference scan, kept for equivalence tests and the benchmark.
NeighborResult nearest_keyword_serial(const EmbeddingStore& store, const std::string& query,
                                      std::span<const std::string> vocab);

}  // namespace kwrec
