// Acceptance suite: runs every gating property end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any gating criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kwrec/corpus.hpp"
#include "kwrec/embeddings.hpp"
#include "kwrec/eval.hpp"
#include "kwrec/experiment.hpp"
#include "kwrec/llm_client.hpp"
#include "kwrec/rerank.hpp"
#include "kwrec/retrieval.hpp"
#include "kwrec/util.hpp"
#include "synthetic.hpp"
#include "temp_files.hpp"

using namespace kwrec;
using kwrec::testsupport::make_synthetic_corpus;
using kwrec::testsupport::SyntheticSpec;
using kwrec::testsupport::TempDir;

namespace {

int g_checked = 0;

bool expect(bool ok, const char* what) {
    ++g_checked;
    if (!ok) std::cout << "    failed check: " << what << "\n";
    return ok;
}

// ---------------------------------------------------------------------------
// Scoring oracle: sparse gather equals the dense indicator-times-matrix
// product, exactly, on randomized corpora.

std::vector<double> dense_product(const std::map<std::string, ItemProfile>& profiles,
                                  const std::vector<std::string>& items,
                                  const std::set<std::string>& selected) {
    std::set<std::string> vocab;
    for (const auto& [id, p] : profiles) {
        for (const auto& [kw, c] : p.keyword_counts) vocab.insert(kw);
    }
    std::map<std::string, std::size_t> item_pos;
    for (std::size_t i = 0; i < items.size(); ++i) item_pos[items[i]] = i;

    std::vector<double> scores(items.size(), 0.0);
    for (const auto& kw : vocab) {
        std::int64_t q_w = 0, doc_freq = 0;
        for (const auto& [id, p] : profiles) {
            auto it = p.keyword_counts.find(kw);
            if (it != p.keyword_counts.end()) {
                q_w += it->second;
                ++doc_freq;
            }
        }
        const double irf =
            std::log(static_cast<double>(items.size()) / static_cast<double>(doc_freq));
        const double indicator = selected.count(kw) ? 1.0 : 0.0;
        for (const auto& [id, p] : profiles) {
            auto it = p.keyword_counts.find(kw);
            if (it == p.keyword_counts.end()) continue;
            const double tf = static_cast<double>(it->second) / static_cast<double>(q_w);
            scores[item_pos.at(id)] += indicator * (tf * irf);
        }
    }
    return scores;
}

bool scoring_oracle() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 gen(2027);
    bool ok = true;
    for (int corpus_no = 0; corpus_no < 20; ++corpus_no) {
        SyntheticSpec spec;
        spec.n_users = 20 + static_cast<int>(gen() % 40);
        spec.n_items = 10 + static_cast<int>(gen() % 91);    // up to 100
        spec.n_keywords = 50 + static_cast<int>(gen() % 451);  // up to 500
        spec.n_reviews = 200 + static_cast<int>(gen() % 1801); // up to 2000
        spec.seed = gen();
        Corpus corpus = make_synthetic_corpus(spec);
        Profiles profiles = build_profiles(corpus);
        std::vector<std::string> items = corpus.item_ids();
        KeywordItemIndex index = build_index(profiles.items, items);

        for (int q = 0; q < 20; ++q) {
            QueryVector query;
            const int n_kw = 1 + static_cast<int>(gen() % 8);
            for (int i = 0; i < n_kw; ++i) {
                query.selected.insert(index.vocab[gen() % index.vocab.size()]);
            }
            std::vector<double> got = score_items(index, query);
            std::vector<double> want = dense_product(profiles.items, items, query.selected);
            ok = expect(got == want, "score_items == dense product (bitwise)") && ok;
            if (!ok) return false;
        }
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ok = expect(seconds < 10.0, "oracle sweep under 10 s") && ok;
    std::cout << "    20 corpora, 400 queries, " << seconds << " s\n";
    return ok;
}

// ---------------------------------------------------------------------------
// TF-IRF invariants on randomized corpora.

bool tfirf_invariants() {
    std::mt19937_64 gen(515);
    bool ok = true;
    for (int corpus_no = 0; corpus_no < 10; ++corpus_no) {
        SyntheticSpec spec;
        spec.n_items = 5 + static_cast<int>(gen() % 60);
        spec.n_keywords = 20 + static_cast<int>(gen() % 200);
        spec.n_reviews = 100 + static_cast<int>(gen() % 900);
        spec.seed = gen();
        Corpus corpus = make_synthetic_corpus(spec);
        Profiles profiles = build_profiles(corpus);
        KeywordItemIndex index = build_index(profiles.items, corpus.item_ids());

        for (std::size_t w = 0; w < index.vocab.size() && ok; ++w) {
            double tf_sum = 0.0;
            bool all_zero = true;
            for (std::size_t e = index.row_begin[w]; e < index.row_begin[w + 1]; ++e) {
                ok = expect(index.entry_weight[e] >= 0.0, "weights are non-negative") && ok;
                tf_sum += static_cast<double>(index.entry_count[e]) /
                          static_cast<double>(index.global_count[w]);
                if (index.entry_weight[e] != 0.0) all_zero = false;
            }
            ok = expect(std::abs(tf_sum - 1.0) <= 1e-9, "sum of tf over items == 1") && ok;
            const bool ubiquitous = index.doc_freq[w] == index.items.size();
            ok = expect(all_zero == ubiquitous,
                        "weight == 0 exactly for ubiquitous keywords") &&
                 ok;
        }
    }
    return ok;
}

// ---------------------------------------------------------------------------
// Metric unit suite: the three hand-computed cases at 1e-9.

bool metric_units() {
    bool ok = true;
    Metrics a = metrics_at_k({"r1", "r2", "r3"}, {"r1"}, 3);
    ok = expect(std::abs(a.precision - 1.0 / 3.0) <= 1e-9, "P@3 == 1/3") && ok;
    ok = expect(std::abs(a.recall - 1.0) <= 1e-9, "R@3 == 1") && ok;
    ok = expect(std::abs(a.ndcg - 1.0) <= 1e-9, "N@3 == 1 (perfect)") && ok;

    Metrics b = metrics_at_k({"r3", "r2", "r1"}, {"r1"}, 3);
    ok = expect(std::abs(b.ndcg - 0.5) <= 1e-9, "N@3 == 0.5 (reversed)") && ok;

    Metrics c = metrics_at_k({"r1", "r2"}, {"r1", "r2", "r3"}, 2);
    ok = expect(std::abs(c.precision - 1.0) <= 1e-9, "P@2 == 1 (truncation)") && ok;
    ok = expect(std::abs(c.recall - 2.0 / 3.0) <= 1e-9, "R@2 == 2/3 (truncation)") && ok;
    ok = expect(std::abs(c.ndcg - 1.0) <= 1e-9, "N@2 == 1 (IDCG truncation)") && ok;
    return ok;
}

// ---------------------------------------------------------------------------
// Cold-start split property over 100 seeds.

bool split_property() {
    SyntheticSpec spec;
    spec.n_users = 50;
    spec.n_items = 20;
    spec.n_reviews = 400;
    spec.seed = 606;
    Corpus corpus = make_synthetic_corpus(spec);

    auto review_key = [](const ReviewRecord& r) {
        return r.user_id + "\x1f" + r.item_id + "\x1f" + r.text;
    };
    std::multiset<std::string> original;
    for (const auto& r : corpus.reviews) original.insert(review_key(r));

    bool ok = true;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto [train, test] = cold_start_split(corpus, {0.2, seed});
        std::vector<std::string> tu = train.user_ids(), su = test.user_ids();
        std::vector<std::string> overlap;
        std::set_intersection(tu.begin(), tu.end(), su.begin(), su.end(),
                              std::back_inserter(overlap));
        ok = expect(overlap.empty(), "train/test user sets disjoint") && ok;
        ok = expect(su.size() == 10, "test user count == round(0.2 * 50)") && ok;

        std::multiset<std::string> merged;
        for (const auto& r : train.reviews) merged.insert(review_key(r));
        for (const auto& r : test.reviews) merged.insert(review_key(r));
        ok = expect(merged == original, "reviews conserved across the split") && ok;
        if (!ok) return false;
    }
    return ok;
}

// ---------------------------------------------------------------------------
// Closure + identity: permutation guarantee under any mock; identity mock
// end-to-end leaves metrics bit-identical.

bool closure_and_identity() {
    bool ok = true;

    // permutations under assorted mock behaviors
    Corpus corpus = make_synthetic_corpus(
        {.n_users = 20, .n_items = 15, .n_keywords = 50, .n_reviews = 200, .seed = 31337});
    Profiles profiles = build_profiles(corpus);
    KeywordItemIndex index = build_index(profiles.items, corpus.item_ids());
    EmbeddingStore store;
    store.dim = 16;

    IdentityMockClient identity;
    ReverseMockClient reverse;

    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 12; ++trial) {
        TranscriptMockClient garbage({{false, "no ids here at all"},
                                      {false, R"(["bogus","r0003","also-bogus","r0003"])"},
                                      {false, "1. r0001\n2. r0001\nwhat?"},
                                      {false, ""}});
        std::vector<LlmClient*> clients = {&identity, &reverse, &garbage, &garbage, &garbage,
                                           &garbage};
        std::vector<std::string> query = {index.vocab[gen() % index.vocab.size()],
                                          index.vocab[gen() % index.vocab.size()]};
        CandidateList candidates = retrieve(index, query, 8, store).candidates;
        PromptBundle bundle = build_prompt(query, candidates, index, {}, PromptConfig{});
        for (LlmClient* client : clients) {
            RankedList ranked = rerank(*client, bundle);
            std::vector<std::string> sorted_ids = ranked.item_ids;
            std::sort(sorted_ids.begin(), sorted_ids.end());
            std::vector<std::string> expected = bundle.candidate_ids;
            std::sort(expected.begin(), expected.end());
            ok = expect(sorted_ids == expected,
                        "re-ranked list is a permutation of the candidates") &&
                 ok;
        }
    }

    // identity mock is a metrics no-op end to end
    TempDir dir;
    std::filesystem::path reviews = dir.path() / "reviews.jsonl";
    save_reviews(corpus, reviews);

    ExperimentConfig plain;
    plain.reviews_path = reviews;
    plain.split = {0.25, 7};
    plain.k_retrieve = 8;
    plain.ks = {1, 3, 8};
    plain.output_dir = dir.path() / "plain";

    ExperimentConfig with_identity = plain;
    with_identity.rerank_enabled = true;
    with_identity.client = "identity";
    with_identity.output_dir = dir.path() / "identity";

    ExperimentOutcome a = run_experiment(plain);
    ExperimentOutcome b = run_experiment(with_identity);
    ok = expect(a.report_json == b.report_json,
                "identity rerank report bytes == retrieval-only report bytes") &&
         ok;
    return ok;
}

// ---------------------------------------------------------------------------
// OOV substitution: nearest_keyword agrees with an exhaustive cosine scan on
// 1000 random (store, query) trials; in-vocab queries return themselves.

bool oov_substitution() {
    std::mt19937_64 gen(808);
    // full-mantissa uniforms: stored vectors are distinct with certainty
    auto rand_real = [&gen] {
        return static_cast<double>(gen() >> 11) * 0x1p-52 - 1.0;
    };
    bool ok = true;
    int trials = 0;
    while (trials < 1000) {
        EmbeddingStore store;
        store.dim = 4 + gen() % 29;
        std::vector<std::string> vocab;
        std::vector<std::string> stored;
        const int n_vocab = 5 + static_cast<int>(gen() % 56);
        for (int i = 0; i < n_vocab; ++i) {
            std::string kw = "v" + std::to_string(i);
            vocab.push_back(kw);
            if (gen() % 4 != 0) {  // some vocab entries use the fallback embedder
                std::vector<double> v(store.dim);
                for (double& x : v) x = rand_real();
                store.vectors[kw] = v;
                stored.push_back(kw);
            }
        }
        if (stored.empty()) continue;

        for (int q = 0; q < 10 && trials < 1000; ++q, ++trials) {
            // self-match is only guaranteed for distinct vectors, so in-vocab
            // probes draw from the stored (collision-free) keywords
            const bool in_vocab = gen() % 3 == 0;
            std::string query =
                in_vocab ? stored[gen() % stored.size()] : "query " + std::to_string(gen() % 997);

            NeighborResult got = nearest_keyword(store, query, vocab);

            // exhaustive scan, written independently of the library kernel
            std::vector<double> qv = resolve_vector(store, query);
            std::string best;
            double best_cos = 0.0;
            bool have = false;
            for (const auto& kw : vocab) {
                std::vector<double> v = resolve_vector(store, kw);
                double dot = 0, nq = 0, nv = 0;
                for (std::size_t i = 0; i < qv.size(); ++i) {
                    dot += qv[i] * v[i];
                    nq += qv[i] * qv[i];
                    nv += v[i] * v[i];
                }
                double c = (nq == 0.0 || nv == 0.0) ? 0.0 : dot / (std::sqrt(nq) * std::sqrt(nv));
                if (!have || c > best_cos || (c == best_cos && kw < best)) {
                    have = true;
                    best_cos = c;
                    best = kw;
                }
            }
            ok = expect(got.keyword == best && got.cosine == best_cos,
                        "nearest_keyword == exhaustive scan") &&
                 ok;
            if (in_vocab) {
                ok = expect(got.keyword == query, "in-vocab query returns itself") && ok;
            }
            if (!ok) return false;
        }
    }
    std::cout << "    " << trials << " randomized trials\n";
    return ok;
}

// ---------------------------------------------------------------------------
// CLI determinism: two `run --config exp.json --seed 13` executions produce
// byte-identical report.json and identical prompt fingerprints.

bool cli_determinism() {
    TempDir dir;
    Corpus corpus = make_synthetic_corpus(
        {.n_users = 24, .n_items = 12, .n_keywords = 40, .n_reviews = 180, .seed = 1001});
    std::filesystem::path reviews = dir.path() / "reviews.jsonl";
    save_reviews(corpus, reviews);

    nlohmann::json config = {
        {"data", {{"reviews", reviews.string()}, {"embedding_dim", 16}}},
        {"split", {{"test_fraction", 0.25}, {"seed", 1}}},
        {"retrieval", {{"method", "mpg"}, {"k", 6}}},
        {"rerank", {{"enabled", true}, {"client", "reverse"}, {"shots", 1}}},
        {"eval", {{"ks", {1, 3}}}},
    };

    auto run_once = [&](const std::string& name) {
        config["output"] = {{"dir", (dir.path() / name).string()}};
        std::filesystem::path config_path = dir.path() / (name + ".json");
        std::ofstream(config_path) << config.dump(2);
        std::string cmd = std::string(KWREC_CLI_PATH) + " run --config " + config_path.string() +
                          " --seed 13 > " + (dir.path() / (name + ".stdout")).string() + " 2>&1";
        return std::system(cmd.c_str());
    };

    bool ok = true;
    ok = expect(run_once("first") == 0, "first run exits 0") && ok;
    ok = expect(run_once("second") == 0, "second run exits 0") && ok;
    if (!ok) return false;

    auto report_a = testsupport::read_file(dir.path() / "first" / "report.json");
    auto report_b = testsupport::read_file(dir.path() / "second" / "report.json");
    ok = expect(!report_a.empty() && report_a == report_b, "report.json bytes identical") && ok;

    auto fingerprints = [](const std::filesystem::path& audit) {
        std::istringstream in(testsupport::read_file(audit));
        std::ostringstream out;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            out << nlohmann::json::parse(line)["fingerprint"].get<std::string>() << "\n";
        }
        return out.str();
    };
    auto fp_a = fingerprints(dir.path() / "first" / "audit.jsonl");
    auto fp_b = fingerprints(dir.path() / "second" / "audit.jsonl");
    ok = expect(!fp_a.empty() && fp_a == fp_b, "prompt fingerprints identical") && ok;
    return ok;
}

// ---------------------------------------------------------------------------
// Token economy: with review texts at least 5x the keyword-set length, the
// keyword prompt is at least 50% shorter for every test user.

bool token_economy() {
    SyntheticSpec spec;
    spec.n_users = 20;
    spec.n_items = 10;
    spec.n_keywords = 40;
    spec.n_reviews = 160;
    spec.text_repeat = 5;
    spec.seed = 7331;
    Corpus corpus = make_synthetic_corpus(spec);

    // precondition: mean text length >= 5x mean keyword-set length
    double text_chars = 0.0, keyword_chars = 0.0;
    for (const auto& rec : corpus.reviews) {
        text_chars += static_cast<double>(rec.text.size());
        std::size_t joined = 0;
        for (const auto& kw : rec.keywords) joined += kw.size() + 1;
        keyword_chars += static_cast<double>(joined > 0 ? joined - 1 : 0);
    }
    bool ok = expect(text_chars >= 5.0 * keyword_chars,
                     "corpus precondition: texts >= 5x keyword sets");

    auto [train, test] = cold_start_split(corpus, {0.25, 3});
    Profiles train_profiles = build_profiles(train);
    Profiles test_profiles = build_profiles(test);
    KeywordItemIndex index = build_index(train_profiles.items, train.item_ids());
    EmbeddingStore store;
    store.dim = 16;
    auto texts = item_texts(train);

    std::map<std::string, std::vector<std::string>> user_texts;
    for (const auto& rec : test.reviews) user_texts[rec.user_id].push_back(rec.text);

    PromptConfig config;
    for (const auto& [user_id, profile] : test_profiles.users) {
        std::vector<std::string> query = query_keywords_for(profile, 0);
        CandidateList candidates = retrieve(index, query, 8, store).candidates;
        PromptBundle keyword_prompt = build_prompt(query, candidates, index, {}, config);
        PromptBundle review_prompt =
            build_review_prompt(user_texts[user_id], candidates, texts, config);
        ok = expect(2 * keyword_prompt.text.size() <= review_prompt.text.size(),
                    "keyword prompt at least 50% shorter") &&
             ok;
    }
    return ok;
}

// ---------------------------------------------------------------------------
// Optional dataset-backed check, controlled by KWREC_YELP_EDINBURGH.

void optional_dataset_check() {
    const char* path = std::getenv("KWREC_YELP_EDINBURGH");
    if (!path) {
        std::cout << "SKIP - dataset check (set KWREC_YELP_EDINBURGH to a reviews JSONL "
                     "to enable; environment-dependent, not gating)\n";
        return;
    }
    try {
        TempDir dir;
        ExperimentConfig config;
        config.reviews_path = path;
        config.split = {223.0 / 1410.0, 13};  // published per-city user counts
        config.k_retrieve = 20;
        config.ks = {20};
        config.output_dir = dir.path() / "dataset";
        ExperimentOutcome outcome = run_experiment(config);
        const double r20 = 100.0 * outcome.report.per_k.at(20).recall;
        const bool within = std::abs(r20 - 40.44) <= 3.0;
        std::cout << (within ? "PASS" : "FAIL") << " - dataset check: R@20 = " << r20
                  << " (target 40.44 +/- 3, not gating)\n";
    } catch (const std::exception& e) {
        std::cout << "SKIP - dataset check failed to run: " << e.what() << "\n";
    }
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<bool()> run;
    };
    const Criterion criteria[] = {
        {"scoring oracle (dense product, exact)", scoring_oracle},
        {"TF-IRF invariants", tfirf_invariants},
        {"metric unit suite", metric_units},
        {"cold-start split property (100 seeds)", split_property},
        {"closure + identity no-op", closure_and_identity},
        {"OOV substitution vs exhaustive scan", oov_substitution},
        {"CLI determinism (byte-identical artifacts)", cli_determinism},
        {"token economy (keyword vs review prompts)", token_economy},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        bool ok = false;
        try {
            ok = criterion.run();
        } catch (const std::exception& e) {
            std::cout << "    exception: " << e.what() << "\n";
        }
        std::cout << (ok ? "PASS" : "FAIL") << " - " << criterion.name << "\n";
        if (!ok) ++failures;
    }
    optional_dataset_check();

    std::cout << (failures == 0 ? "ALL ACCEPTANCE CRITERIA PASSED" : "ACCEPTANCE FAILURES")
              << " (" << g_checked << " checks)\n";
    return failures == 0 ? 0 : 1;
}
