#include "kwrec/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace kwrec {

namespace {

void build_columns(KeywordItemIndex& index) {
    const std::size_t n_items = index.items.size();
    std::vector<std::size_t> degree(n_items, 0);
    for (std::uint32_t item : index.entry_item) ++degree[item];

    index.col_begin.assign(n_items + 1, 0);
    for (std::size_t i = 0; i < n_items; ++i) {
        index.col_begin[i + 1] = index.col_begin[i] + degree[i];
    }
    index.col_keyword.resize(index.entry_item.size());
    index.col_weight.resize(index.entry_item.size());

    std::vector<std::size_t> cursor(index.col_begin.begin(), index.col_begin.end() - 1);
    for (std::size_t w = 0; w < index.vocab.size(); ++w) {
        for (std::size_t e = index.row_begin[w]; e < index.row_begin[w + 1]; ++e) {
            std::size_t slot = cursor[index.entry_item[e]]++;
            index.col_keyword[slot] = static_cast<std::uint32_t>(w);
            index.col_weight[slot] = index.entry_weight[e];
        }
    }
    // rows are scanned in vocab order, so each column ends up keyword-sorted
}

// Shared ordering: score descending, then item_id ascending. Zero-score items
// participate, which pads short result sets deterministically.
CandidateList top_k(const std::vector<double>& scores, const std::vector<std::string>& items,
                    int k) {
    std::vector<std::uint32_t> order(items.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    auto cmp = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return items[a] < items[b];
    };
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), items.size());
    std::partial_sort(order.begin(), order.begin() + take, order.end(), cmp);

    CandidateList list;
    list.k = k;
    list.entries.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        list.entries.push_back({items[order[i]], scores[order[i]]});
    }
    return list;
}

}  // namespace

std::optional<std::uint32_t> KeywordItemIndex::vocab_index(std::string_view keyword) const {
    auto it = std::lower_bound(vocab.begin(), vocab.end(), keyword);
    if (it == vocab.end() || *it != keyword) return std::nullopt;
    return static_cast<std::uint32_t>(it - vocab.begin());
}

KeywordItemIndex build_index(const std::map<std::string, ItemProfile>& item_profiles,
                             std::vector<std::string> items) {
    if (items.empty()) {
        throw std::runtime_error("build_index: empty item set");
    }
    std::map<std::string, std::uint32_t> item_pos;
    for (std::uint32_t i = 0; i < items.size(); ++i) {
        if (!item_pos.emplace(items[i], i).second) {
            throw std::runtime_error("build_index: duplicate item id " + items[i]);
        }
    }

    // postings per keyword in a sorted map doubles as the vocab ordering
    struct Posting {
        std::uint32_t item;
        std::int64_t count;
    };
    std::map<std::string, std::vector<Posting>> postings;
    for (const auto& [item_id, profile] : item_profiles) {
        auto pos = item_pos.find(item_id);
        if (pos == item_pos.end()) {
            throw std::runtime_error("build_index: profile for unknown item " + item_id);
        }
        for (const auto& [kw, count] : profile.keyword_counts) {
            postings[kw].push_back({pos->second, count});
        }
    }

    KeywordItemIndex index;
    index.items = std::move(items);
    const double n_items = static_cast<double>(index.items.size());

    index.vocab.reserve(postings.size());
    index.row_begin.reserve(postings.size() + 1);
    index.row_begin.push_back(0);
    for (auto& [kw, plist] : postings) {
        std::sort(plist.begin(), plist.end(),
                  [](const Posting& a, const Posting& b) { return a.item < b.item; });
        std::int64_t q_w = 0;
        for (const Posting& p : plist) q_w += p.count;
        const double irf = std::log(n_items / static_cast<double>(plist.size()));

        index.vocab.push_back(kw);
        index.global_count.push_back(q_w);
        index.doc_freq.push_back(static_cast<std::uint32_t>(plist.size()));
        index.irf.push_back(irf);
        for (const Posting& p : plist) {
            const double tf = static_cast<double>(p.count) / static_cast<double>(q_w);
            index.entry_item.push_back(p.item);
            index.entry_count.push_back(p.count);
            index.entry_weight.push_back(tf * irf);
        }
        index.row_begin.push_back(index.entry_item.size());
    }

    build_columns(index);
    return index;
}

std::vector<double> score_items(const KeywordItemIndex& index, const QueryVector& query) {
    std::vector<double> scores(index.items.size(), 0.0);
    // std::set iterates sorted, matching vocab order, so the accumulation
    // order per item is fixed regardless of how the query was assembled
    for (const auto& kw : query.selected) {
        auto w = index.vocab_index(kw);
        if (!w) {
            throw std::invalid_argument("score_items: keyword not in vocab: " + kw);
        }
        for (std::size_t e = index.row_begin[*w]; e < index.row_begin[*w + 1]; ++e) {
            scores[index.entry_item[e]] += index.entry_weight[e];
        }
    }
    return scores;
}

std::vector<std::vector<double>> score_batch(const KeywordItemIndex& index,
                                             const std::vector<QueryVector>& queries,
                                             bool parallel) {
    std::vector<std::vector<double>> out(queries.size());
    const auto n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = score_items(index, queries[static_cast<std::size_t>(i)]);
    }
    return out;
}

namespace {

RetrievalResult retrieve_with_vocab(const KeywordItemIndex& index,
                                    const std::vector<std::string>& raw_keywords, int k,
                                    const EmbeddingStore& store,
                                    const VocabEmbeddings* resolved) {
    QueryVector query;
    for (const auto& kw : raw_keywords) {
        if (index.vocab_index(kw)) {
            query.selected.insert(kw);
        } else if (resolved) {
            NeighborResult nn = nearest_keyword(store, kw, *resolved, /*parallel=*/false);
            query.substitutions[kw] = nn.keyword;
            query.selected.insert(nn.keyword);
        } else {
            NeighborResult nn = nearest_keyword(store, kw, index.vocab);
            query.substitutions[kw] = nn.keyword;
            query.selected.insert(nn.keyword);
        }
    }
    std::vector<double> scores = score_items(index, query);
    RetrievalResult result;
    result.candidates = top_k(scores, index.items, k);
    result.query = std::move(query);
    return result;
}

}  // namespace

RetrievalResult retrieve(const KeywordItemIndex& index,
                         const std::vector<std::string>& raw_keywords, int k,
                         const EmbeddingStore& store) {
    if (k < 1) {
        throw std::invalid_argument("retrieve: k must be >= 1");
    }
    if (index.vocab.empty()) {
        throw std::runtime_error("retrieve: index has an empty vocabulary");
    }
    return retrieve_with_vocab(index, raw_keywords, k, store, nullptr);
}

std::vector<RetrievalResult> retrieve_batch(const KeywordItemIndex& index,
                                            const std::vector<std::vector<std::string>>& queries,
                                            int k, const EmbeddingStore& store, bool parallel) {
    if (k < 1) {
        throw std::invalid_argument("retrieve: k must be >= 1");
    }
    if (index.vocab.empty()) {
        throw std::runtime_error("retrieve: index has an empty vocabulary");
    }
    bool any_oov = false;
    for (const auto& q : queries) {
        for (const auto& kw : q) {
            if (!index.vocab_index(kw)) {
                any_oov = true;
                break;
            }
        }
        if (any_oov) break;
    }
    VocabEmbeddings resolved;
    if (any_oov) {
        resolved = resolve_vocab(store, index.vocab, parallel);
    }

    std::vector<RetrievalResult> out(queries.size());
    const auto n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] =
            retrieve_with_vocab(index, queries[static_cast<std::size_t>(i)], k, store,
                                any_oov ? &resolved : nullptr);
    }
    return out;
}

CandidateList retrieve_known(const KeywordItemIndex& index,
                             const std::vector<std::string>& keywords, int k) {
    if (k < 1) {
        throw std::invalid_argument("retrieve_known: k must be >= 1");
    }
    QueryVector query;
    for (const auto& kw : keywords) {
        if (index.vocab_index(kw)) query.selected.insert(kw);
    }
    std::vector<double> scores = score_items(index, query);
    return top_k(scores, index.items, k);
}

CandidateList jaccard_retrieve(const std::map<std::string, ItemProfile>& item_profiles,
                               const std::vector<std::string>& raw_keywords, int k) {
    if (k < 1) {
        throw std::invalid_argument("jaccard_retrieve: k must be >= 1");
    }
    std::set<std::string> query(raw_keywords.begin(), raw_keywords.end());

    std::vector<std::string> items;
    std::vector<double> scores;
    items.reserve(item_profiles.size());
    scores.reserve(item_profiles.size());
    for (const auto& [item_id, profile] : item_profiles) {
        std::size_t hits = 0;
        for (const auto& kw : query) {
            if (profile.keyword_counts.count(kw)) ++hits;
        }
        const std::size_t uni = query.size() + profile.keyword_counts.size() - hits;
        items.push_back(item_id);
        scores.push_back(uni == 0 ? 0.0
                                  : static_cast<double>(hits) / static_cast<double>(uni));
    }
    return top_k(scores, items, k);
}

std::map<std::string, ItemProfile> item_profiles_from_index(const KeywordItemIndex& index) {
    std::map<std::string, ItemProfile> profiles;
    for (const auto& item : index.items) {
        profiles[item].item_id = item;
    }
    for (std::size_t w = 0; w < index.vocab.size(); ++w) {
        for (std::size_t e = index.row_begin[w]; e < index.row_begin[w + 1]; ++e) {
            profiles[index.items[index.entry_item[e]]].keyword_counts[index.vocab[w]] =
                index.entry_count[e];
        }
    }
    return profiles;
}

void save_index(const KeywordItemIndex& index, const std::filesystem::path& path) {
    nlohmann::json j;
    j["schema"] = kIndexSchema;
    j["items"] = index.items;
    j["vocab"] = index.vocab;
    j["global_counts"] = index.global_count;
    j["doc_freq"] = index.doc_freq;
    j["irf"] = index.irf;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t w = 0; w < index.vocab.size(); ++w) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t e = index.row_begin[w]; e < index.row_begin[w + 1]; ++e) {
            row.push_back({index.entry_item[e], index.entry_count[e], index.entry_weight[e]});
        }
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);

    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << j.dump() << '\n';
}

KeywordItemIndex load_index(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw std::runtime_error(path.string() + ": not a JSON index file");
    }
    if (j.value("schema", "") != kIndexSchema) {
        throw std::runtime_error(path.string() + ": unsupported index schema");
    }
    KeywordItemIndex index;
    index.items = j.at("items").get<std::vector<std::string>>();
    index.vocab = j.at("vocab").get<std::vector<std::string>>();
    index.global_count = j.at("global_counts").get<std::vector<std::int64_t>>();
    index.doc_freq = j.at("doc_freq").get<std::vector<std::uint32_t>>();
    index.irf = j.at("irf").get<std::vector<double>>();

    const auto& rows = j.at("rows");
    if (!rows.is_array() || rows.size() != index.vocab.size()) {
        throw std::runtime_error(path.string() + ": row count does not match vocab");
    }
    index.row_begin.push_back(0);
    for (const auto& row : rows) {
        for (const auto& entry : row) {
            index.entry_item.push_back(entry.at(0).get<std::uint32_t>());
            index.entry_count.push_back(entry.at(1).get<std::int64_t>());
            index.entry_weight.push_back(entry.at(2).get<double>());
        }
        index.row_begin.push_back(index.entry_item.size());
    }
    build_columns(index);
    return index;
}

}  // namespace kwrec
