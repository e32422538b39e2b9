// Compares the OpenMP kernels against their serial reference paths on a
// synthetic corpus, verifying that both produce identical output, and reports
// keyword-prompt vs review-prompt sizes.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kwrec/corpus.hpp"
#include "kwrec/embeddings.hpp"
#include "kwrec/experiment.hpp"
#include "kwrec/rerank.hpp"
#include "kwrec/retrieval.hpp"
#include "synthetic.hpp"

using namespace kwrec;

namespace {

template <typename F>
double time_ms(F&& fn) {
    double best = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        if (rep == 0 || ms < best) best = ms;
    }
    return best;
}

void report(const char* kernel, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-28s serial %8.2f ms   openmp %8.2f ms   speedup %4.2fx   %s\n", kernel,
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "outputs identical" : "OUTPUT MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads = %d\n\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP, parallel paths run serially\n\n");
#endif

    testsupport::SyntheticSpec spec;
    spec.n_users = 400;
    spec.n_items = 300;
    spec.n_keywords = 2000;
    spec.n_reviews = 8000;
    spec.text_repeat = 5;
    spec.seed = 42;
    Corpus corpus = testsupport::make_synthetic_corpus(spec);
    Profiles profiles = build_profiles(corpus);
    KeywordItemIndex index = build_index(profiles.items, corpus.item_ids());
    EmbeddingStore store;
    store.dim = 64;

    std::printf("corpus: %zu reviews, %zu items, %zu keywords\n\n", corpus.reviews.size(),
                index.items.size(), index.vocab.size());

    std::mt19937_64 gen(7);

    // batch scoring
    std::vector<QueryVector> score_queries(3000);
    for (auto& q : score_queries) {
        for (int i = 0; i < 6; ++i) q.selected.insert(index.vocab[gen() % index.vocab.size()]);
    }
    std::vector<std::vector<double>> scores_serial, scores_parallel;
    score_batch(index, score_queries, true);  // warmup
    double t_serial = time_ms([&] { scores_serial = score_batch(index, score_queries, false); });
    double t_parallel = time_ms([&] { scores_parallel = score_batch(index, score_queries, true); });
    report("score_batch", t_serial, t_parallel, scores_serial == scores_parallel);

    // end-to-end retrieval with OOV substitution
    std::vector<std::vector<std::string>> queries(600);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (int j = 0; j < 5; ++j) {
            queries[i].push_back(index.vocab[gen() % index.vocab.size()]);
        }
        if (i % 3 == 0) queries[i].push_back("unseen phrase " + std::to_string(i));
    }
    std::vector<RetrievalResult> ret_serial, ret_parallel;
    retrieve_batch(index, queries, 20, store, true);  // warmup
    t_serial = time_ms([&] { ret_serial = retrieve_batch(index, queries, 20, store, false); });
    t_parallel = time_ms([&] { ret_parallel = retrieve_batch(index, queries, 20, store, true); });
    bool same = ret_serial.size() == ret_parallel.size();
    for (std::size_t i = 0; same && i < ret_serial.size(); ++i) {
        same = ret_serial[i].query.selected == ret_parallel[i].query.selected &&
               ret_serial[i].candidates.entries.size() ==
                   ret_parallel[i].candidates.entries.size();
        for (std::size_t e = 0; same && e < ret_serial[i].candidates.entries.size(); ++e) {
            same = ret_serial[i].candidates.entries[e].item_id ==
                       ret_parallel[i].candidates.entries[e].item_id &&
                   ret_serial[i].candidates.entries[e].score ==
                       ret_parallel[i].candidates.entries[e].score;
        }
    }
    report("retrieve_batch", t_serial, t_parallel, same);

    // nearest-neighbor scan at production vocabulary scale; serial and
    // parallel share the resolved vectors so only the scan differs
    std::vector<std::string> large_vocab(30000);
    for (std::size_t i = 0; i < large_vocab.size(); ++i) {
        large_vocab[i] = "vocab entry " + std::to_string(i);
    }
    VocabEmbeddings resolved = resolve_vocab(store, large_vocab);
    std::vector<std::string> nn_queries(100);
    for (std::size_t i = 0; i < nn_queries.size(); ++i) {
        nn_queries[i] = "oov query " + std::to_string(i);
    }
    std::vector<NeighborResult> nn_serial(nn_queries.size()), nn_parallel(nn_queries.size());
    nearest_keyword(store, nn_queries[0], resolved, true);  // warmup
    t_serial = time_ms([&] {
        for (std::size_t i = 0; i < nn_queries.size(); ++i) {
            nn_serial[i] = nearest_keyword(store, nn_queries[i], resolved, false);
        }
    });
    t_parallel = time_ms([&] {
        for (std::size_t i = 0; i < nn_queries.size(); ++i) {
            nn_parallel[i] = nearest_keyword(store, nn_queries[i], resolved, true);
        }
    });
    same = true;
    for (std::size_t i = 0; i < nn_queries.size(); ++i) {
        same = same && nn_serial[i].keyword == nn_parallel[i].keyword &&
               nn_serial[i].cosine == nn_parallel[i].cosine;
    }
    report("nearest_keyword scan (30k)", t_serial, t_parallel, same);

    // prompt size: keywords vs full reviews
    auto texts = item_texts(corpus);
    CandidateList candidates = retrieve(index, queries[0], 20, store).candidates;
    PromptBundle keyword_prompt = build_prompt(queries[0], candidates, index, {}, PromptConfig{});
    PromptBundle review_prompt =
        build_review_prompt({"placeholder request"}, candidates, texts, PromptConfig{});
    std::printf("\nprompt size: keywords %zu chars, full reviews %zu chars (%.1f%% shorter)\n",
                keyword_prompt.text.size(), review_prompt.text.size(),
                100.0 * (1.0 - static_cast<double>(keyword_prompt.text.size()) /
                                   static_cast<double>(review_prompt.text.size())));
    return 0;
}
