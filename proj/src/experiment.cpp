#include "kwrec/experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kwrec/keywords.hpp"
#include "kwrec/retrieval.hpp"

namespace kwrec {

namespace {

using nlohmann::json;

[[noreturn]] void stage_fail(const std::string& stage, const std::exception& e) {
    throw std::runtime_error(stage + ": " + e.what());
}

KeywordOrder parse_keyword_order(const std::string& s) {
    if (s == "tfirf_desc") return KeywordOrder::TfirfDesc;
    if (s == "shuffled") return KeywordOrder::Shuffled;
    throw std::runtime_error("config: unknown keyword_order " + s);
}

CandidateOrder parse_candidate_order(const std::string& s) {
    if (s == "retrieval_order") return CandidateOrder::RetrievalOrder;
    if (s == "shuffled") return CandidateOrder::Shuffled;
    throw std::runtime_error("config: unknown candidate_order " + s);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::unique_ptr<LlmClient> make_client(const ExperimentConfig& config) {
    if (config.client == "identity") return std::make_unique<IdentityMockClient>();
    if (config.client == "reverse") return std::make_unique<ReverseMockClient>();
    if (config.client == "transcript") {
        return std::make_unique<TranscriptMockClient>(config.transcript);
    }
    if (config.client == "http") {
        HttpLlmClient::Options opts;
        opts.endpoint = config.endpoint;
        opts.model = config.model;
        return std::make_unique<HttpLlmClient>(std::move(opts));
    }
    throw std::runtime_error("config: unknown client " + config.client);
}

json config_manifest(const ExperimentConfig& c) {
    json j;
    j["data"] = {{"reviews", c.reviews_path.string()},
                 {"tagged", c.tagged_path.string()},
                 {"embeddings", c.embeddings_path.string()},
                 {"embedding_dim", c.embedding_dim}};
    j["split"] = {{"test_fraction", c.split.test_fraction}, {"seed", c.split.seed}};
    j["retrieval"] = {{"method", c.method}, {"k", c.k_retrieve}};
    j["rerank"] = {
        {"enabled", c.rerank_enabled},
        {"client", c.client},
        {"shots", c.prompt.shots},
        {"keywords_per_item", c.prompt.keywords_per_item},
        {"keyword_order",
         c.prompt.keyword_order == KeywordOrder::TfirfDesc ? "tfirf_desc" : "shuffled"},
        {"keyword_order_seed", c.prompt.keyword_order_seed},
        {"candidate_order", c.prompt.candidate_order == CandidateOrder::RetrievalOrder
                                ? "retrieval_order"
                                : "shuffled"},
        {"candidate_order_seed", c.prompt.candidate_order_seed},
        {"max_user_keywords", c.prompt.max_user_keywords},
        {"example_candidates", c.prompt.example_candidate_count},
        {"retries", c.retries},
        {"max_in_flight", c.max_in_flight},
        {"on_error", c.on_error},
    };
    j["eval"] = {{"ks", c.ks}, {"max_query_keywords", c.max_query_keywords}};
    j["output"] = {{"dir", c.output_dir.string()}};
    return j;
}

json report_to_json(const MetricsReport& report) {
    json per_k = json::object();
    for (const auto& [k, m] : report.per_k) {
        per_k[std::to_string(k)] = {
            {"precision", m.precision}, {"recall", m.recall}, {"ndcg", m.ndcg}};
    }
    return json{{"schema", kReportSchema},
                {"per_k", per_k},
                {"users_evaluated", report.users_evaluated},
                {"users_skipped", report.users_skipped}};
}

}  // namespace

std::vector<std::string> query_keywords_for(const UserProfile& profile, int max_keywords) {
    std::vector<std::pair<std::string, std::int64_t>> kws(profile.keyword_counts.begin(),
                                                          profile.keyword_counts.end());
    std::sort(kws.begin(), kws.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    out.reserve(kws.size());
    for (const auto& kv : kws) out.push_back(kv.first);
    if (max_keywords > 0 && out.size() > static_cast<std::size_t>(max_keywords)) {
        out.resize(static_cast<std::size_t>(max_keywords));
    }
    return out;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw std::runtime_error(path.string() + ": invalid JSON config");
    }

    ExperimentConfig c;
    const json data = j.value("data", json::object());
    c.reviews_path = data.value("reviews", "");
    c.tagged_path = data.value("tagged", "");
    c.embeddings_path = data.value("embeddings", "");
    c.embedding_dim = data.value("embedding_dim", c.embedding_dim);
    if (c.reviews_path.empty()) {
        throw std::runtime_error("config: data.reviews is required");
    }

    const json split = j.value("split", json::object());
    c.split.test_fraction = split.value("test_fraction", c.split.test_fraction);
    c.split.seed = split.value("seed", c.split.seed);

    const json retrieval = j.value("retrieval", json::object());
    c.method = retrieval.value("method", c.method);
    c.k_retrieve = retrieval.value("k", c.k_retrieve);
    if (c.method != "mpg" && c.method != "jaccard") {
        throw std::runtime_error("config: retrieval.method must be mpg or jaccard");
    }

    const json rerank = j.value("rerank", json::object());
    c.rerank_enabled = rerank.value("enabled", false);
    c.client = rerank.value("client", c.client);
    c.prompt.shots = rerank.value("shots", c.prompt.shots);
    c.prompt.keywords_per_item = rerank.value("keywords_per_item", c.prompt.keywords_per_item);
    c.prompt.keyword_order =
        parse_keyword_order(rerank.value("keyword_order", std::string("tfirf_desc")));
    c.prompt.keyword_order_seed = rerank.value("keyword_order_seed", c.prompt.keyword_order_seed);
    c.prompt.candidate_order =
        parse_candidate_order(rerank.value("candidate_order", std::string("retrieval_order")));
    c.prompt.candidate_order_seed =
        rerank.value("candidate_order_seed", c.prompt.candidate_order_seed);
    c.prompt.max_user_keywords = rerank.value("max_user_keywords", c.prompt.max_user_keywords);
    c.prompt.example_candidate_count =
        rerank.value("example_candidates", c.prompt.example_candidate_count);
    if (rerank.contains("template_path")) {
        c.prompt.template_text = read_text_file(rerank["template_path"].get<std::string>());
    }
    if (rerank.contains("task_preamble")) {
        c.prompt.task_preamble = rerank["task_preamble"].get<std::string>();
    }
    c.endpoint = rerank.value("endpoint", c.endpoint);
    c.model = rerank.value("model", c.model);
    c.retries = rerank.value("retries", c.retries);
    c.backoff_ms = rerank.value("backoff_ms", c.backoff_ms);
    c.max_in_flight = rerank.value("max_in_flight", c.max_in_flight);
    c.on_error = rerank.value("on_error", c.on_error);
    if (c.on_error != "fail" && c.on_error != "retrieval_order") {
        throw std::runtime_error("config: rerank.on_error must be fail or retrieval_order");
    }
    if (rerank.contains("transcript")) {
        for (const auto& entry : rerank["transcript"]) {
            if (entry.is_string()) {
                c.transcript.push_back({false, entry.get<std::string>()});
            } else {
                c.transcript.push_back({entry.value("fail", false), entry.value("text", "")});
            }
        }
    }

    const json eval = j.value("eval", json::object());
    if (eval.contains("ks")) c.ks = eval["ks"].get<std::vector<int>>();
    c.max_query_keywords = eval.value("max_query_keywords", c.max_query_keywords);

    const json output = j.value("output", json::object());
    c.output_dir = output.value("dir", c.output_dir.string());
    return c;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
    validate_prompt_config(config.prompt);

    // load
    Corpus corpus;
    EmbeddingStore store;
    store.dim = config.embedding_dim;
    try {
        corpus = load_reviews(config.reviews_path);
        if (!config.tagged_path.empty()) {
            PretaggedFile tagged = load_pretagged(config.tagged_path);
            std::map<std::pair<std::string, std::string>, int> review_index;
            for (auto& rec : corpus.reviews) {
                int idx = review_index[{rec.user_id, rec.item_id}]++;
                auto it = tagged.keywords.find({rec.user_id, rec.item_id, idx});
                if (it != tagged.keywords.end()) rec.keywords = it->second;
            }
        }
        std::filesystem::path embeddings = config.embeddings_path;
        if (embeddings.empty()) {
            if (const char* env = std::getenv("KWREC_EMBEDDINGS")) embeddings = env;
        }
        if (!embeddings.empty()) {
            store = load_embeddings(embeddings).store;
        }
    } catch (const std::exception& e) {
        stage_fail("load", e);
    }

    // split
    Corpus train, test;
    try {
        std::tie(train, test) = cold_start_split(corpus, config.split);
    } catch (const std::exception& e) {
        stage_fail("split", e);
    }

    // profiles + index
    Profiles train_profiles;
    KeywordItemIndex index;
    try {
        train_profiles = build_profiles(train);
        index = build_index(train_profiles.items, train.item_ids());
    } catch (const std::exception& e) {
        stage_fail("index", e);
    }

    // per-user queries and ground truth
    std::vector<std::string> test_users;
    std::vector<std::vector<std::string>> queries;
    std::map<std::string, std::set<std::string>> truths;
    try {
        Profiles test_profiles = build_profiles(test);
        for (const auto& [user_id, profile] : test_profiles.users) {
            test_users.push_back(user_id);
            queries.push_back(query_keywords_for(profile, config.max_query_keywords));
        }
        for (const auto& rec : test.reviews) {
            truths[rec.user_id].insert(rec.item_id);
        }
    } catch (const std::exception& e) {
        stage_fail("queries", e);
    }

    // retrieve
    std::vector<RetrievalResult> retrieved(test_users.size());
    try {
        if (config.method == "mpg") {
            retrieved = retrieve_batch(index, queries, config.k_retrieve, store, true);
        } else {
            const auto n = static_cast<std::int64_t>(test_users.size());
#pragma omp parallel for schedule(dynamic)
            for (std::int64_t i = 0; i < n; ++i) {
                auto ui = static_cast<std::size_t>(i);
                retrieved[ui].candidates =
                    jaccard_retrieve(train_profiles.items, queries[ui], config.k_retrieve);
                for (const auto& kw : queries[ui]) retrieved[ui].query.selected.insert(kw);
            }
        }
    } catch (const std::exception& e) {
        stage_fail("retrieve", e);
    }

    // rerank
    std::map<std::string, std::vector<std::string>> results;
    std::vector<std::string> audit_lines(test_users.size());
    if (config.rerank_enabled) {
        std::unique_ptr<LlmClient> inner;
        try {
            inner = make_client(config);
        } catch (const std::exception& e) {
            stage_fail("rerank", e);
        }
        RetryingClient client(*inner, std::max(config.retries, 1), config.backoff_ms);

        std::vector<std::vector<std::string>> ranked_ids(test_users.size());
        std::vector<std::string> errors(test_users.size());
        const bool parallel = inner->concurrent_safe() && config.max_in_flight > 1;
        const auto n = static_cast<std::int64_t>(test_users.size());
        const int threads = std::max(config.max_in_flight, 1);

#pragma omp parallel for schedule(dynamic) num_threads(threads) if (parallel)
        for (std::int64_t i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            try {
                if (retrieved[ui].candidates.entries.empty()) {
                    continue;  // nothing to rank; empty result stays empty
                }
                std::vector<FewShotExample> examples =
                    select_examples(train_profiles.users, queries[ui], config.prompt.shots, index,
                                    config.prompt.example_candidate_count);
                PromptBundle bundle = build_prompt(queries[ui], retrieved[ui].candidates, index,
                                                   examples, config.prompt);
                RerankOutcome outcome;
                try {
                    outcome = rerank_with_raw(client, bundle);
                } catch (const std::exception& e) {
                    if (config.on_error == "retrieval_order") {
                        outcome.raw_response = e.what();
                        outcome.ranked.item_ids = bundle.candidate_ids;
                        outcome.ranked.provenance.assign(bundle.candidate_ids.size(),
                                                         Provenance::Repaired);
                    } else {
                        throw;
                    }
                }
                audit_lines[ui] = audit_record(bundle, outcome.raw_response, outcome.ranked);
                ranked_ids[ui] = std::move(outcome.ranked.item_ids);
            } catch (const std::exception& e) {
                errors[ui] = e.what();
            }
        }
        for (std::size_t i = 0; i < test_users.size(); ++i) {
            if (!errors[i].empty()) {
                throw std::runtime_error("rerank: user " + test_users[i] + ": " + errors[i]);
            }
            results[test_users[i]] = std::move(ranked_ids[i]);
        }
    } else {
        for (std::size_t i = 0; i < test_users.size(); ++i) {
            std::vector<std::string> ids;
            ids.reserve(retrieved[i].candidates.entries.size());
            for (const auto& c : retrieved[i].candidates.entries) ids.push_back(c.item_id);
            results[test_users[i]] = std::move(ids);
        }
    }

    // evaluate
    ExperimentOutcome outcome;
    try {
        outcome.report = evaluate_run(results, truths, config.ks);
    } catch (const std::exception& e) {
        stage_fail("evaluate", e);
    }

    // artifacts
    try {
        std::filesystem::create_directories(config.output_dir);
        json report = report_to_json(outcome.report);
        outcome.report_json = report.dump(2) + "\n";
        outcome.report_path = config.output_dir / "report.json";
        std::ofstream(outcome.report_path) << outcome.report_json;

        json manifest;
        manifest["schema"] = kManifestSchema;
        manifest["config"] = config_manifest(config);
        manifest["counts"] = {{"train_users", train.user_ids().size()},
                              {"test_users", test_users.size()},
                              {"items", index.items.size()},
                              {"vocab", index.vocab.size()}};
        manifest["versions"] = {{"index", kIndexSchema}, {"report", kReportSchema}};
        outcome.manifest_path = config.output_dir / "manifest.json";
        std::ofstream(outcome.manifest_path) << manifest.dump(2) << "\n";

        if (config.rerank_enabled) {
            outcome.audit_path = config.output_dir / "audit.jsonl";
            std::ofstream audit(outcome.audit_path);
            for (const auto& line : audit_lines) {
                if (!line.empty()) audit << line << '\n';
            }
        }
    } catch (const std::exception& e) {
        stage_fail("write", e);
    }
    return outcome;
}

}  // namespace kwrec
