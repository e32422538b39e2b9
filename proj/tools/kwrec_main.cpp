#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kwrec/corpus.hpp"
#include "kwrec/embeddings.hpp"
#include "kwrec/eval.hpp"
#include "kwrec/experiment.hpp"
#include "kwrec/keywords.hpp"
#include "kwrec/llm_client.hpp"
#include "kwrec/rerank.hpp"
#include "kwrec/retrieval.hpp"

namespace {

using nlohmann::json;

std::vector<std::string> parse_keyword_list(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t comma = csv.find(',', start);
        if (comma == std::string::npos) comma = csv.size();
        std::string kw = kwrec::normalize_keyword(csv.substr(start, comma - start));
        if (!kw.empty()) out.push_back(std::move(kw));
        start = comma + 1;
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t comma = csv.find(',', start);
        if (comma == std::string::npos) comma = csv.size();
        std::string field = csv.substr(start, comma - start);
        if (!field.empty()) out.push_back(std::stoi(field));
        start = comma + 1;
    }
    return out;
}

// Options shared by retrieve/prompt/rerank.
struct QueryOptions {
    std::string index_path;
    std::string keywords_csv;
    int k = 20;
    std::string method = "mpg";
    std::string embeddings_path;
    std::size_t dim = 64;
};

void add_query_options(CLI::App* cmd, QueryOptions& opts) {
    cmd->add_option("--index", opts.index_path, "index file from build-index")->required();
    cmd->add_option("--keywords", opts.keywords_csv, "comma-separated query keywords")
        ->required();
    cmd->add_option("--k", opts.k, "number of candidates");
    cmd->add_option("--embeddings", opts.embeddings_path,
                    "keyword embeddings JSONL (default: $KWREC_EMBEDDINGS, else the built-in "
                    "fallback embedder)");
    cmd->add_option("--dim", opts.dim, "fallback embedder dimension");
}

kwrec::EmbeddingStore make_store(const QueryOptions& opts) {
    std::string path = opts.embeddings_path;
    if (path.empty()) {
        if (const char* env = std::getenv("KWREC_EMBEDDINGS")) path = env;
    }
    if (!path.empty()) {
        return kwrec::load_embeddings(path).store;
    }
    kwrec::EmbeddingStore store;
    store.dim = opts.dim;
    return store;
}

struct PromptOptions {
    std::string train_path;
    int shots = 0;
    int keywords_per_item = 10;
    std::string keyword_order = "tfirf_desc";
    std::uint64_t keyword_order_seed = 0;
    std::string candidate_order = "retrieval_order";
    std::uint64_t candidate_order_seed = 0;
    int max_user_keywords = 30;
    int example_candidates = 20;
    std::string template_path;
};

void add_prompt_options(CLI::App* cmd, PromptOptions& opts) {
    cmd->add_option("--train", opts.train_path, "train reviews JSONL (needed for --shots > 0)");
    cmd->add_option("--shots", opts.shots, "few-shot examples to include");
    cmd->add_option("--keywords-per-item", opts.keywords_per_item);
    cmd->add_option("--keyword-order", opts.keyword_order)
        ->check(CLI::IsMember({"tfirf_desc", "shuffled"}));
    cmd->add_option("--keyword-order-seed", opts.keyword_order_seed);
    cmd->add_option("--candidate-order", opts.candidate_order)
        ->check(CLI::IsMember({"retrieval_order", "shuffled"}));
    cmd->add_option("--candidate-order-seed", opts.candidate_order_seed);
    cmd->add_option("--max-user-keywords", opts.max_user_keywords);
    cmd->add_option("--example-candidates", opts.example_candidates);
    cmd->add_option("--template", opts.template_path, "prompt template file");
}

kwrec::PromptConfig make_prompt_config(const PromptOptions& opts) {
    kwrec::PromptConfig config;
    config.shots = opts.shots;
    config.keywords_per_item = opts.keywords_per_item;
    config.keyword_order = opts.keyword_order == "shuffled" ? kwrec::KeywordOrder::Shuffled
                                                            : kwrec::KeywordOrder::TfirfDesc;
    config.keyword_order_seed = opts.keyword_order_seed;
    config.candidate_order = opts.candidate_order == "shuffled"
                                 ? kwrec::CandidateOrder::Shuffled
                                 : kwrec::CandidateOrder::RetrievalOrder;
    config.candidate_order_seed = opts.candidate_order_seed;
    config.max_user_keywords = opts.max_user_keywords;
    config.example_candidate_count = opts.example_candidates;
    if (!opts.template_path.empty()) {
        std::ifstream in(opts.template_path);
        if (!in) throw std::runtime_error("cannot open " + opts.template_path);
        config.template_text.assign(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
    }
    return config;
}

json retrieval_to_json(const kwrec::RetrievalResult& result) {
    json candidates = json::array();
    for (const auto& c : result.candidates.entries) {
        candidates.push_back({{"item_id", c.item_id}, {"score", c.score}});
    }
    json substitutions = json::object();
    for (const auto& [from, to] : result.query.substitutions) substitutions[from] = to;
    return json{{"candidates", candidates}, {"substitutions", substitutions}};
}

kwrec::RetrievalResult run_retrieval(const QueryOptions& opts) {
    kwrec::KeywordItemIndex index = kwrec::load_index(opts.index_path);
    std::vector<std::string> keywords = parse_keyword_list(opts.keywords_csv);
    if (opts.method == "jaccard") {
        kwrec::RetrievalResult result;
        result.candidates =
            kwrec::jaccard_retrieve(kwrec::item_profiles_from_index(index), keywords, opts.k);
        return result;
    }
    return kwrec::retrieve(index, keywords, opts.k, make_store(opts));
}

// Builds the prompt bundle for prompt/rerank, loading train profiles when
// few-shot examples are requested.
kwrec::PromptBundle build_bundle(const QueryOptions& query_opts, const PromptOptions& prompt_opts,
                                 const kwrec::KeywordItemIndex& index,
                                 const kwrec::RetrievalResult& retrieved) {
    kwrec::PromptConfig config = make_prompt_config(prompt_opts);
    std::vector<kwrec::FewShotExample> examples;
    if (config.shots > 0) {
        if (prompt_opts.train_path.empty()) {
            throw std::runtime_error("--shots > 0 requires --train");
        }
        kwrec::Profiles profiles =
            kwrec::build_profiles(kwrec::load_reviews(prompt_opts.train_path));
        examples = kwrec::select_examples(profiles.users,
                                          parse_keyword_list(query_opts.keywords_csv),
                                          config.shots, index, config.example_candidate_count);
    }
    return kwrec::build_prompt(parse_keyword_list(query_opts.keywords_csv), retrieved.candidates,
                               index, examples, config);
}

int dispatch(int argc, char** argv) {
    CLI::App app{"keyword-driven cold-start recommender"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "merge pre-tagged keywords into a reviews file");
    struct {
        std::string reviews, tagged, out;
    } ingest_opts;
    ingest->add_option("--reviews", ingest_opts.reviews)->required();
    ingest->add_option("--tagged", ingest_opts.tagged, "pre-tagged tokens JSONL")->required();
    ingest->add_option("--out", ingest_opts.out)->required();
    ingest->callback([&] {
        kwrec::Corpus corpus = kwrec::load_reviews(ingest_opts.reviews);
        kwrec::PretaggedFile tagged = kwrec::load_pretagged(ingest_opts.tagged);
        std::map<std::pair<std::string, std::string>, int> seen;
        int merged = 0;
        for (auto& rec : corpus.reviews) {
            int idx = seen[{rec.user_id, rec.item_id}]++;
            auto it = tagged.keywords.find({rec.user_id, rec.item_id, idx});
            if (it != tagged.keywords.end()) {
                rec.keywords = it->second;
                ++merged;
            }
        }
        kwrec::save_reviews(corpus, ingest_opts.out);
        std::cout << json{{"reviews", corpus.reviews.size()},
                          {"users", corpus.user_ids().size()},
                          {"items", corpus.item_ids().size()},
                          {"merged", merged},
                          {"unknown_pos_warnings", tagged.unknown_pos_count}}
                         .dump(2)
                  << "\n";
    });

    // split
    auto* split = app.add_subcommand("split", "cold-start train/test split by user");
    struct {
        std::string reviews, out_train, out_test;
        double fraction = 0.2;
        std::uint64_t seed = 0;
    } split_opts;
    split->add_option("--reviews", split_opts.reviews)->required();
    split->add_option("--test-fraction", split_opts.fraction);
    split->add_option("--seed", split_opts.seed);
    split->add_option("--out-train", split_opts.out_train)->required();
    split->add_option("--out-test", split_opts.out_test)->required();
    split->callback([&] {
        kwrec::Corpus corpus = kwrec::load_reviews(split_opts.reviews);
        auto [train, test] =
            kwrec::cold_start_split(corpus, {split_opts.fraction, split_opts.seed});
        kwrec::save_reviews(train, split_opts.out_train);
        kwrec::save_reviews(test, split_opts.out_test);
        std::cout << json{{"train_users", train.user_ids().size()},
                          {"test_users", test.user_ids().size()},
                          {"train_reviews", train.reviews.size()},
                          {"test_reviews", test.reviews.size()}}
                         .dump(2)
                  << "\n";
    });

    // build-index
    auto* build = app.add_subcommand("build-index", "build the keyword-item weight index");
    struct {
        std::string reviews, out;
    } build_opts;
    build->add_option("--reviews", build_opts.reviews, "train reviews JSONL")->required();
    build->add_option("--out", build_opts.out)->required();
    build->callback([&] {
        kwrec::Corpus corpus = kwrec::load_reviews(build_opts.reviews);
        kwrec::Profiles profiles = kwrec::build_profiles(corpus);
        kwrec::KeywordItemIndex index =
            kwrec::build_index(profiles.items, corpus.item_ids());
        kwrec::save_index(index, build_opts.out);
        std::cout << json{{"items", index.items.size()},
                          {"vocab", index.vocab.size()},
                          {"entries", index.entry_item.size()}}
                         .dump(2)
                  << "\n";
    });

    // retrieve
    auto* retrieve = app.add_subcommand("retrieve", "top-k candidates for a keyword query");
    QueryOptions retrieve_opts;
    add_query_options(retrieve, retrieve_opts);
    retrieve->add_option("--method", retrieve_opts.method)
        ->check(CLI::IsMember({"mpg", "jaccard"}));
    retrieve->callback(
        [&] { std::cout << retrieval_to_json(run_retrieval(retrieve_opts)).dump(2) << "\n"; });

    // prompt
    auto* prompt = app.add_subcommand("prompt", "render the re-ranking prompt for a query");
    QueryOptions prompt_query;
    PromptOptions prompt_opts;
    add_query_options(prompt, prompt_query);
    add_prompt_options(prompt, prompt_opts);
    prompt->callback([&] {
        kwrec::KeywordItemIndex index = kwrec::load_index(prompt_query.index_path);
        kwrec::RetrievalResult retrieved = kwrec::retrieve(
            index, parse_keyword_list(prompt_query.keywords_csv), prompt_query.k,
            make_store(prompt_query));
        kwrec::PromptBundle bundle = build_bundle(prompt_query, prompt_opts, index, retrieved);
        std::cout << json{{"fingerprint", bundle.config_fingerprint},
                          {"candidate_ids", bundle.candidate_ids},
                          {"text", bundle.text}}
                         .dump(2)
                  << "\n";
    });

    // rerank
    auto* rerank_cmd = app.add_subcommand("rerank", "retrieve, prompt and re-rank via a client");
    QueryOptions rerank_query;
    PromptOptions rerank_prompt;
    struct {
        std::string client = "identity";
        std::string endpoint, model, audit;
        int retries = 3;
        int backoff_ms = 0;
    } rerank_opts;
    add_query_options(rerank_cmd, rerank_query);
    add_prompt_options(rerank_cmd, rerank_prompt);
    rerank_cmd->add_option("--client", rerank_opts.client)
        ->check(CLI::IsMember({"identity", "reverse", "http"}));
    rerank_cmd->add_option("--endpoint", rerank_opts.endpoint,
                           "LLM endpoint (default: $KWREC_LLM_ENDPOINT)");
    rerank_cmd->add_option("--model", rerank_opts.model);
    rerank_cmd->add_option("--audit", rerank_opts.audit, "append audit records to this JSONL");
    rerank_cmd->add_option("--retries", rerank_opts.retries);
    rerank_cmd->add_option("--backoff-ms", rerank_opts.backoff_ms);
    rerank_cmd->callback([&] {
        kwrec::KeywordItemIndex index = kwrec::load_index(rerank_query.index_path);
        kwrec::RetrievalResult retrieved = kwrec::retrieve(
            index, parse_keyword_list(rerank_query.keywords_csv), rerank_query.k,
            make_store(rerank_query));
        kwrec::PromptBundle bundle = build_bundle(rerank_query, rerank_prompt, index, retrieved);

        std::unique_ptr<kwrec::LlmClient> inner;
        if (rerank_opts.client == "identity") {
            inner = std::make_unique<kwrec::IdentityMockClient>();
        } else if (rerank_opts.client == "reverse") {
            inner = std::make_unique<kwrec::ReverseMockClient>();
        } else {
            kwrec::HttpLlmClient::Options http;
            http.endpoint = rerank_opts.endpoint;
            http.model = rerank_opts.model;
            inner = std::make_unique<kwrec::HttpLlmClient>(std::move(http));
        }
        kwrec::RetryingClient client(*inner, std::max(rerank_opts.retries, 1),
                                     rerank_opts.backoff_ms);

        std::unique_ptr<kwrec::AuditLog> audit;
        if (!rerank_opts.audit.empty()) {
            audit = std::make_unique<kwrec::AuditLog>(rerank_opts.audit);
        }
        kwrec::RankedList ranked = kwrec::rerank(client, bundle, audit.get());

        json provenance = json::array();
        for (kwrec::Provenance p : ranked.provenance) {
            provenance.push_back(p == kwrec::Provenance::Llm ? "llm" : "repaired");
        }
        std::cout << json{{"ranking", ranked.item_ids},
                          {"provenance", provenance},
                          {"fingerprint", bundle.config_fingerprint}}
                         .dump(2)
                  << "\n";
    });

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "ranking metrics from result/truth files");
    struct {
        std::string results, truths, ks = "1,3,20";
    } eval_opts;
    evaluate->add_option("--results", eval_opts.results, "JSON {user: [item ids...]}")->required();
    evaluate->add_option("--truths", eval_opts.truths, "JSON {user: [relevant ids...]}")
        ->required();
    evaluate->add_option("--ks", eval_opts.ks, "comma-separated cutoffs");
    evaluate->callback([&] {
        auto read_json = [](const std::string& path) {
            std::ifstream in(path);
            if (!in) throw std::runtime_error("cannot open " + path);
            json j = json::parse(in, nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                throw std::runtime_error(path + ": expected a JSON object");
            }
            return j;
        };
        const json results_json = read_json(eval_opts.results);
        const json truths_json = read_json(eval_opts.truths);
        std::map<std::string, std::vector<std::string>> results;
        for (const auto& [user, ids] : results_json.items()) {
            results[user] = ids.get<std::vector<std::string>>();
        }
        std::map<std::string, std::set<std::string>> truths;
        for (const auto& [user, ids] : truths_json.items()) {
            auto list = ids.get<std::vector<std::string>>();
            truths[user] = {list.begin(), list.end()};
        }
        kwrec::MetricsReport report =
            kwrec::evaluate_run(results, truths, parse_int_list(eval_opts.ks));
        json per_k = json::object();
        for (const auto& [k, m] : report.per_k) {
            per_k[std::to_string(k)] = {
                {"precision", m.precision}, {"recall", m.recall}, {"ndcg", m.ndcg}};
        }
        std::cout << json{{"schema", kwrec::kReportSchema},
                          {"per_k", per_k},
                          {"users_evaluated", report.users_evaluated},
                          {"users_skipped", report.users_skipped}}
                         .dump(2)
                  << "\n";
    });

    // run
    auto* run = app.add_subcommand("run", "full experiment from a config file");
    struct {
        std::string config;
        std::int64_t seed = -1;
    } run_opts;
    run->add_option("--config", run_opts.config)->required();
    run->add_option("--seed", run_opts.seed, "override split seed");
    run->callback([&] {
        kwrec::ExperimentConfig config = kwrec::load_experiment_config(run_opts.config);
        if (run_opts.seed >= 0) config.split.seed = static_cast<std::uint64_t>(run_opts.seed);
        kwrec::ExperimentOutcome outcome = kwrec::run_experiment(config);
        std::cout << outcome.report_json;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "kwrec: " << e.what() << "\n";
        return 1;
    }
}
