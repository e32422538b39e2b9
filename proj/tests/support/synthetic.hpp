#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kwrec/corpus.hpp"

namespace kwrec::testsupport {

struct SyntheticSpec {
    int n_users = 20;
    int n_items = 10;
    int n_keywords = 50;
    int n_reviews = 100;
    int min_kw_per_review = 1;
    int max_kw_per_review = 8;
    bool with_ratings = true;
    // when > 0, review text = the keyword list repeated this many times,
    // which pins the text/keyword length ratio for token-cost tests
    int text_repeat = 0;
    std::uint64_t seed = 1;
};

inline std::string padded_id(const char* prefix, int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%04d", prefix, i);
    return buf;
}

// Deterministic random corpus: every user reviews at least once, items and
// keywords drawn uniformly. Uses raw engine draws so output is identical on
// every platform.
inline Corpus make_synthetic_corpus(const SyntheticSpec& spec) {
    std::mt19937_64 gen(spec.seed);
    auto draw = [&gen](int n) { return static_cast<int>(gen() % static_cast<std::uint64_t>(n)); };

    Corpus corpus;
    corpus.reviews.reserve(static_cast<std::size_t>(spec.n_reviews));
    for (int i = 0; i < spec.n_reviews; ++i) {
        ReviewRecord rec;
        // first pass guarantees every user appears
        rec.user_id = padded_id("u", i < spec.n_users ? i : draw(spec.n_users));
        rec.item_id = padded_id("r", draw(spec.n_items));
        if (spec.with_ratings) rec.rating = 1.0 + draw(5);

        const int span = spec.max_kw_per_review - spec.min_kw_per_review + 1;
        const int n_kw = spec.min_kw_per_review + draw(span);
        for (int k = 0; k < n_kw; ++k) {
            rec.keywords.push_back(padded_id("kw", draw(spec.n_keywords)));
        }
        if (spec.text_repeat > 0) {
            for (int rep = 0; rep < spec.text_repeat; ++rep) {
                for (const auto& kw : rec.keywords) {
                    if (!rec.text.empty()) rec.text += ' ';
                    rec.text += kw;
                }
            }
        }
        corpus.reviews.push_back(std::move(rec));
    }
    return corpus;
}

}  // namespace kwrec::testsupport
