#include "kwrec/embeddings.hpp"

#include <cmath>
#include <stdexcept>

#include "kwrec/util.hpp"
#include "jsonl_util.hpp"

namespace kwrec {

EmbeddingLoadResult load_embeddings(const std::filesystem::path& path) {
    EmbeddingLoadResult result;
    detail::for_each_jsonl(path, [&](int line_no, const nlohmann::json& j) {
        std::string keyword = detail::require_string(j, "keyword", line_no);
        auto vec_it = j.find("vector");
        if (vec_it == j.end() || !vec_it->is_array()) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": missing field vector");
        }
        std::vector<double> vec;
        vec.reserve(vec_it->size());
        for (const auto& v : *vec_it) {
            if (!v.is_number()) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": non-finite component");
            }
            double x = v.get<double>();
            if (!std::isfinite(x)) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": non-finite component");
            }
            vec.push_back(x);
        }
        if (result.store.dim == 0) {
            if (vec.empty()) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": empty vector");
            }
            result.store.dim = vec.size();
        } else if (vec.size() != result.store.dim) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": dimension mismatch");
        }
        auto [it, inserted] = result.store.vectors.try_emplace(keyword, std::move(vec));
        if (!inserted) {
            it->second = j["vector"].get<std::vector<double>>();
            ++result.duplicate_warnings;
        }
    });
    return result;
}

std::vector<double> fallback_embed(std::string_view keyword, std::size_t dim) {
    if (dim == 0) {
        throw std::invalid_argument("fallback_embed: dim must be positive");
    }
    std::string padded;
    padded.reserve(keyword.size() + 2);
    padded.push_back('^');
    padded.append(keyword);
    padded.push_back('$');

    std::vector<double> v(dim, 0.0);
    const std::size_t gram = padded.size() < 3 ? padded.size() : 3;
    for (std::size_t i = 0; i + gram <= padded.size(); ++i) {
        std::uint64_t h = fnv1a64(std::string_view(padded).substr(i, gram));
        double sign = ((h >> 61) & 1) ? -1.0 : 1.0;
        v[h % dim] += sign;
    }
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    if (norm_sq == 0.0) {
        // signed buckets can cancel entirely; pin one deterministic component
        v[fnv1a64(padded) % dim] = 1.0;
        norm_sq = 1.0;
    }
    double norm = std::sqrt(norm_sq);
    for (double& x : v) x /= norm;
    return v;
}

std::vector<double> resolve_vector(const EmbeddingStore& store, std::string_view keyword) {
    if (auto it = store.vectors.find(std::string(keyword)); it != store.vectors.end()) {
        return it->second;
    }
    return fallback_embed(keyword, store.dim);
}

double cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

VocabEmbeddings resolve_vocab(const EmbeddingStore& store, std::span<const std::string> vocab,
                              bool parallel) {
    VocabEmbeddings out;
    out.keywords.assign(vocab.begin(), vocab.end());
    out.dim = store.dim;
    out.data.resize(out.keywords.size() * out.dim);

    const auto n = static_cast<std::int64_t>(out.keywords.size());
#pragma omp parallel for schedule(dynamic, 64) if (parallel)
    for (std::int64_t i = 0; i < n; ++i) {
        std::vector<double> v = resolve_vector(store, out.keywords[static_cast<std::size_t>(i)]);
        std::copy(v.begin(), v.end(),
                  out.data.begin() + static_cast<std::size_t>(i) * out.dim);
    }
    return out;
}

namespace {

// true when (cos_a, kw_a) beats (cos_b, kw_b)
bool better(double cos_a, const std::string& kw_a, double cos_b, const std::string& kw_b) {
    if (cos_a != cos_b) return cos_a > cos_b;
    return kw_a < kw_b;
}

}  // namespace

NeighborResult nearest_keyword(const EmbeddingStore& store, const std::string& query,
                               const VocabEmbeddings& vocab, bool parallel) {
    if (vocab.keywords.empty()) {
        throw std::runtime_error("nearest_keyword: empty vocabulary");
    }
    std::vector<double> q = resolve_vector(store, query);

    const auto n = static_cast<std::int64_t>(vocab.keywords.size());
    std::int64_t best_idx = 0;
    double best_cos = cosine(q, vocab.row(0));

#pragma omp parallel if (parallel)
    {
        std::int64_t local_idx = -1;
        double local_cos = 0.0;
#pragma omp for nowait
        for (std::int64_t i = 0; i < n; ++i) {
            double c = cosine(q, vocab.row(static_cast<std::size_t>(i)));
            if (local_idx < 0 ||
                better(c, vocab.keywords[static_cast<std::size_t>(i)], local_cos,
                       vocab.keywords[static_cast<std::size_t>(local_idx)])) {
                local_cos = c;
                local_idx = i;
            }
        }
#pragma omp critical(kwrec_nearest_merge)
        {
            if (local_idx >= 0 &&
                better(local_cos, vocab.keywords[static_cast<std::size_t>(local_idx)], best_cos,
                       vocab.keywords[static_cast<std::size_t>(best_idx)])) {
                best_cos = local_cos;
                best_idx = local_idx;
            }
        }
    }
    return {vocab.keywords[static_cast<std::size_t>(best_idx)], best_cos};
}

NeighborResult nearest_keyword(const EmbeddingStore& store, const std::string& query,
                               std::span<const std::string> vocab) {
    return nearest_keyword(store, query, resolve_vocab(store, vocab), true);
}

NeighborResult nearest_keyword_serial(const EmbeddingStore& store, const std::string& query,
                                      std::span<const std::string> vocab) {
    if (vocab.empty()) {
        throw std::runtime_error("nearest_keyword: empty vocabulary");
    }
    std::vector<double> q = resolve_vector(store, query);
    std::size_t best_idx = 0;
    double best_cos = cosine(q, resolve_vector(store, vocab[0]));
    for (std::size_t i = 1; i < vocab.size(); ++i) {
        double c = cosine(q, resolve_vector(store, vocab[i]));
        if (better(c, vocab[i], best_cos, vocab[best_idx])) {
            best_cos = c;
            best_idx = i;
        }
    }
    return {vocab[best_idx], best_cos};
}

}  // namespace kwrec
