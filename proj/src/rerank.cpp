#include "kwrec/rerank.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "kwrec/util.hpp"

namespace kwrec {

namespace {

constexpr const char* kPlaceholders[] = {"{task_preamble}", "{examples}", "{user_keywords}",
                                         "{candidates_block}"};

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t count = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

void replace_once(std::string& text, const std::string& placeholder, const std::string& value) {
    std::size_t pos = text.find(placeholder);
    text.replace(pos, placeholder.size(), value);
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> truncated(const std::vector<std::string>& values, int limit) {
    if (limit <= 0 || values.size() <= static_cast<std::size_t>(limit)) return values;
    return {values.begin(), values.begin() + limit};
}

const std::string& resolved_template(const PromptConfig& config) {
    return config.template_text.empty() ? default_prompt_template() : config.template_text;
}

const std::string& resolved_preamble(const PromptConfig& config) {
    return config.task_preamble.empty() ? default_task_preamble() : config.task_preamble;
}

std::string config_json(const PromptConfig& config) {
    nlohmann::json j;
    j["template"] = resolved_template(config);
    j["task_preamble"] = resolved_preamble(config);
    j["shots"] = config.shots;
    j["keywords_per_item"] = config.keywords_per_item;
    j["keyword_order"] =
        config.keyword_order == KeywordOrder::TfirfDesc ? "tfirf_desc" : "shuffled";
    j["keyword_order_seed"] = config.keyword_order_seed;
    j["candidate_order"] =
        config.candidate_order == CandidateOrder::RetrievalOrder ? "retrieval_order" : "shuffled";
    j["candidate_order_seed"] = config.candidate_order_seed;
    j["max_user_keywords"] = config.max_user_keywords;
    j["example_candidate_count"] = config.example_candidate_count;
    return j.dump();
}

std::string fingerprint_of(const PromptConfig& config, const std::string& text) {
    std::string payload = config_json(config);
    payload.push_back('\x1f');
    payload += text;
    return to_hex64(fnv1a64(payload));
}

std::vector<std::string> ordered_candidate_ids(const CandidateList& candidates,
                                               const PromptConfig& config) {
    std::vector<std::string> ids;
    ids.reserve(candidates.entries.size());
    for (const auto& c : candidates.entries) ids.push_back(c.item_id);
    if (config.candidate_order == CandidateOrder::Shuffled) {
        seeded_shuffle(ids, config.candidate_order_seed);
    }
    return ids;
}

std::string render_examples(const std::vector<FewShotExample>& examples,
                            const PromptConfig& config) {
    std::string out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const FewShotExample& ex = examples[i];
        out += "Example " + std::to_string(i + 1) + ":\n";
        out += "Keywords: " + join(truncated(ex.example_keywords, config.max_user_keywords), ", ");
        out += "\nCandidates: " + join(ex.example_candidates, ", ");
        out += "\nRanking: " + join(ex.example_ranking, ", ");
        out += "\n\n";
    }
    return out;
}

std::string render_prompt(const PromptConfig& config, const std::string& examples_block,
                          const std::string& user_block, const std::string& candidates_block) {
    std::string text = resolved_template(config);
    replace_once(text, "{task_preamble}", resolved_preamble(config));
    replace_once(text, "{examples}", examples_block);
    replace_once(text, "{user_keywords}", user_block);
    replace_once(text, "{candidates_block}", candidates_block);
    return text;
}

std::string trim_copy(std::string_view s) {
    const char* ws = " \t\r\n";
    auto begin = s.find_first_not_of(ws);
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(ws);
    return std::string(s.substr(begin, end - begin + 1));
}

}  // namespace

const std::string& default_prompt_template() {
    static const std::string tmpl =
        "{task_preamble}\n"
        "\n"
        "{examples}"
        "User keywords: {user_keywords}\n"
        "\n"
        "Candidates, one per line as `- id: keywords`:\n"
        "{candidates_block}\n"
        "\n"
        "Rank every candidate id from most to least suitable for this user.\n"
        "Reply with a JSON array of candidate id strings and nothing else.\n";
    return tmpl;
}

const std::string& default_task_preamble() {
    static const std::string preamble =
        "You are a recommender system. Given what a new user says they want, "
        "order the candidate items so the best matches come first.";
    return preamble;
}

void validate_prompt_config(const PromptConfig& config) {
    const std::string& tmpl = resolved_template(config);
    for (const char* ph : kPlaceholders) {
        std::size_t n = count_occurrences(tmpl, ph);
        if (n != 1) {
            throw std::runtime_error(std::string("prompt template must contain ") + ph +
                                     " exactly once (found " + std::to_string(n) + ")");
        }
    }
    if (config.shots < 0) throw std::runtime_error("prompt config: shots must be >= 0");
    if (config.keywords_per_item < 1) {
        throw std::runtime_error("prompt config: keywords_per_item must be >= 1");
    }
    if (config.max_user_keywords < 1) {
        throw std::runtime_error("prompt config: max_user_keywords must be >= 1");
    }
}

std::vector<FewShotExample> select_examples(
    const std::map<std::string, UserProfile>& train_user_profiles,
    const std::vector<std::string>& query_keywords, int shots, const KeywordItemIndex& index,
    int example_candidate_count) {
    if (shots < 0) throw std::invalid_argument("select_examples: shots must be >= 0");
    if (shots == 0) return {};
    if (static_cast<std::size_t>(shots) > train_user_profiles.size()) {
        throw std::runtime_error("select_examples: shots exceeds the number of train users");
    }

    const std::set<std::string> query(query_keywords.begin(), query_keywords.end());
    struct Scored {
        double jaccard;
        const UserProfile* profile;
    };
    std::vector<Scored> scored;
    scored.reserve(train_user_profiles.size());
    for (const auto& [user_id, profile] : train_user_profiles) {
        std::size_t hits = 0;
        for (const auto& kw : query) {
            if (profile.keyword_counts.count(kw)) ++hits;
        }
        std::size_t uni = query.size() + profile.keyword_counts.size() - hits;
        scored.push_back(
            {uni == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(uni), &profile});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.jaccard != b.jaccard) return a.jaccard > b.jaccard;
        return a.profile->user_id < b.profile->user_id;
    });

    std::vector<FewShotExample> examples;
    examples.reserve(static_cast<std::size_t>(shots));
    for (int s = 0; s < shots; ++s) {
        const UserProfile& user = *scored[static_cast<std::size_t>(s)].profile;
        FewShotExample ex;

        // keywords ordered most-used first
        std::vector<std::pair<std::string, std::int64_t>> kws(user.keyword_counts.begin(),
                                                              user.keyword_counts.end());
        std::sort(kws.begin(), kws.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        for (const auto& kv : kws) ex.example_keywords.push_back(kv.first);

        // rated items first, then retrieval filler on the user's own keywords
        std::vector<std::string> candidates;
        std::unordered_set<std::string> seen;
        for (const auto& kv : user.rated_items) {
            candidates.push_back(kv.first);
            seen.insert(kv.first);
        }
        if (candidates.size() < static_cast<std::size_t>(example_candidate_count)) {
            CandidateList filler = retrieve_known(index, ex.example_keywords,
                                                  example_candidate_count);
            for (const auto& c : filler.entries) {
                if (candidates.size() >= static_cast<std::size_t>(example_candidate_count)) break;
                if (seen.insert(c.item_id).second) candidates.push_back(c.item_id);
            }
        }

        ex.example_ranking = candidates;
        std::sort(ex.example_ranking.begin(), ex.example_ranking.end(),
                  [&](const std::string& a, const std::string& b) {
                      auto ra = user.rated_items.find(a);
                      auto rb = user.rated_items.find(b);
                      const bool a_rated = ra != user.rated_items.end();
                      const bool b_rated = rb != user.rated_items.end();
                      if (a_rated != b_rated) return a_rated;  // unrated filler last
                      if (a_rated && ra->second != rb->second) return ra->second > rb->second;
                      return a < b;
                  });

        // presented candidates are sorted so the list does not leak the answer
        std::sort(candidates.begin(), candidates.end());
        ex.example_candidates = std::move(candidates);
        examples.push_back(std::move(ex));
    }
    return examples;
}

PromptBundle build_prompt(const std::vector<std::string>& query_keywords,
                          const CandidateList& candidates, const KeywordItemIndex& index,
                          const std::vector<FewShotExample>& examples,
                          const PromptConfig& config) {
    validate_prompt_config(config);
    if (candidates.entries.empty()) {
        throw std::invalid_argument("build_prompt: empty candidate list");
    }

    std::unordered_map<std::string, std::uint32_t> item_pos;
    item_pos.reserve(index.items.size());
    for (std::uint32_t i = 0; i < index.items.size(); ++i) item_pos[index.items[i]] = i;

    std::vector<std::string> ids = ordered_candidate_ids(candidates, config);

    std::string candidates_block;
    for (std::size_t n = 0; n < ids.size(); ++n) {
        auto pos = item_pos.find(ids[n]);
        if (pos == item_pos.end()) {
            throw std::invalid_argument("build_prompt: candidate not in index: " + ids[n]);
        }
        const std::uint32_t item = pos->second;

        struct Weighted {
            std::string_view keyword;
            double weight;
        };
        std::vector<Weighted> kws;
        for (std::size_t e = index.col_begin[item]; e < index.col_begin[item + 1]; ++e) {
            kws.push_back({index.vocab[index.col_keyword[e]], index.col_weight[e]});
        }
        std::vector<std::string> rendered;
        if (config.keyword_order == KeywordOrder::TfirfDesc) {
            std::sort(kws.begin(), kws.end(), [](const Weighted& a, const Weighted& b) {
                if (a.weight != b.weight) return a.weight > b.weight;
                return a.keyword < b.keyword;
            });
            for (const auto& w : kws) rendered.emplace_back(w.keyword);
        } else {
            for (const auto& w : kws) rendered.emplace_back(w.keyword);  // already lex-sorted
            seeded_shuffle(rendered, config.keyword_order_seed ^ fnv1a64(ids[n]));
        }
        rendered = truncated(rendered, config.keywords_per_item);

        candidates_block += "- " + ids[n];
        if (!rendered.empty()) candidates_block += ": " + join(rendered, ", ");
        if (n + 1 < ids.size()) candidates_block += "\n";
    }

    std::vector<std::string> user_kws = truncated(query_keywords, config.max_user_keywords);
    std::string user_block = user_kws.empty() ? "(none)" : join(user_kws, ", ");

    PromptBundle bundle;
    bundle.text = render_prompt(config, render_examples(examples, config), user_block,
                                candidates_block);
    bundle.candidate_ids = std::move(ids);
    bundle.config_fingerprint = fingerprint_of(config, bundle.text);
    return bundle;
}

PromptBundle build_review_prompt(const std::vector<std::string>& user_texts,
                                 const CandidateList& candidates,
                                 const std::map<std::string, std::vector<std::string>>& texts,
                                 const PromptConfig& config) {
    validate_prompt_config(config);
    if (candidates.entries.empty()) {
        throw std::invalid_argument("build_review_prompt: empty candidate list");
    }

    std::vector<std::string> ids = ordered_candidate_ids(candidates, config);

    std::string candidates_block;
    for (std::size_t n = 0; n < ids.size(); ++n) {
        candidates_block += "- " + ids[n];
        auto it = texts.find(ids[n]);
        if (it != texts.end() && !it->second.empty()) {
            candidates_block += ": " + join(it->second, " ");
        }
        if (n + 1 < ids.size()) candidates_block += "\n";
    }

    std::string user_block = user_texts.empty() ? "(none)" : join(user_texts, " ");

    PromptBundle bundle;
    bundle.text = render_prompt(config, "", user_block, candidates_block);
    bundle.candidate_ids = std::move(ids);
    bundle.config_fingerprint = fingerprint_of(config, bundle.text);
    return bundle;
}

RankedList parse_response(const std::string& text,
                          const std::vector<std::string>& candidate_ids) {
    std::vector<std::string> tokens;
    auto take_array = [&tokens](const std::string& s) -> bool {
        nlohmann::json j = nlohmann::json::parse(s, nullptr, false);
        if (j.is_discarded() || !j.is_array()) return false;
        for (const auto& el : j) {
            tokens.push_back(el.is_string() ? el.get<std::string>() : el.dump());
        }
        return true;
    };

    bool parsed = take_array(trim_copy(text));
    if (!parsed) {
        std::size_t first = text.find('[');
        std::size_t last = text.rfind(']');
        if (first != std::string::npos && last != std::string::npos && first < last) {
            parsed = take_array(text.substr(first, last - first + 1));
        }
    }
    if (!parsed) {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            std::string_view rest = line;
            // strip "1." / "2)" / "- " / "* " style prefixes
            std::size_t i = 0;
            while (i < rest.size() && (rest[i] == ' ' || rest[i] == '\t')) ++i;
            std::size_t d = i;
            while (d < rest.size() && std::isdigit(static_cast<unsigned char>(rest[d]))) ++d;
            if (d > i && d < rest.size() && (rest[d] == '.' || rest[d] == ')' || rest[d] == ':')) {
                rest = rest.substr(d + 1);
            } else if (i < rest.size() && (rest[i] == '-' || rest[i] == '*')) {
                rest = rest.substr(i + 1);
            } else {
                rest = rest.substr(i);
            }
            std::string piece;
            std::istringstream fields{std::string(rest)};
            while (std::getline(fields, piece, ',')) {
                std::string token = trim_copy(piece);
                while (!token.empty() &&
                       (token.front() == '"' || token.front() == '\'' || token.front() == '`')) {
                    token.erase(token.begin());
                }
                while (!token.empty() &&
                       (token.back() == '"' || token.back() == '\'' || token.back() == '`' ||
                        token.back() == '.')) {
                    token.pop_back();
                }
                if (!token.empty()) tokens.push_back(std::move(token));
            }
        }
    }

    const std::set<std::string> known(candidate_ids.begin(), candidate_ids.end());
    RankedList ranked;
    std::unordered_set<std::string> taken;
    for (auto& token : tokens) {
        if (known.count(token) && taken.insert(token).second) {
            ranked.item_ids.push_back(std::move(token));
            ranked.provenance.push_back(Provenance::Llm);
        }
    }
    for (const auto& id : candidate_ids) {
        if (!taken.count(id)) {
            ranked.item_ids.push_back(id);
            ranked.provenance.push_back(Provenance::Repaired);
        }
    }
    return ranked;
}

void AuditLog::append(const std::string& json_line) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    if (!out) {
        throw std::runtime_error("cannot open audit log " + path_.string());
    }
    out << json_line << '\n';
}

std::string audit_record(const PromptBundle& bundle, const std::string& raw_response,
                         const RankedList& ranked) {
    nlohmann::json j;
    j["fingerprint"] = bundle.config_fingerprint;
    j["prompt"] = bundle.text;
    j["raw_response"] = raw_response;
    j["parsed"] = ranked.item_ids;
    int repaired = 0;
    for (Provenance p : ranked.provenance) {
        if (p == Provenance::Repaired) ++repaired;
    }
    j["repaired_count"] = repaired;
    return j.dump();
}

RerankOutcome rerank_with_raw(LlmClient& client, const PromptBundle& bundle) {
    RerankOutcome outcome;
    try {
        outcome.raw_response = client.complete(bundle);
    } catch (const TransportError& e) {
        throw std::runtime_error("rerank: transport failure for prompt " +
                                 bundle.config_fingerprint + ": " + e.what());
    }
    outcome.ranked = parse_response(outcome.raw_response, bundle.candidate_ids);
    return outcome;
}

RankedList rerank(LlmClient& client, const PromptBundle& bundle, AuditLog* audit) {
    RerankOutcome outcome = rerank_with_raw(client, bundle);
    if (audit) audit->append(audit_record(bundle, outcome.raw_response, outcome.ranked));
    return outcome.ranked;
}

}  // namespace kwrec
