#include "kwrec/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "kwrec/keywords.hpp"
#include "kwrec/util.hpp"
#include "jsonl_util.hpp"

namespace kwrec {

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

}  // namespace

std::vector<std::string> Corpus::user_ids() const {
    std::vector<std::string> ids;
    ids.reserve(reviews.size());
    for (const auto& r : reviews) ids.push_back(r.user_id);
    return sorted_unique(std::move(ids));
}

std::vector<std::string> Corpus::item_ids() const {
    std::vector<std::string> ids;
    ids.reserve(reviews.size());
    for (const auto& r : reviews) ids.push_back(r.item_id);
    return sorted_unique(std::move(ids));
}

Corpus load_reviews(const std::filesystem::path& path) {
    Corpus corpus;
    detail::for_each_jsonl(path, [&](int line_no, const nlohmann::json& j) {
        ReviewRecord rec;
        rec.user_id = detail::require_string(j, "user_id", line_no);
        rec.item_id = detail::require_string(j, "item_id", line_no);
        if (rec.user_id.empty()) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": empty field user_id");
        }
        if (rec.item_id.empty()) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": empty field item_id");
        }
        if (auto it = j.find("rating"); it != j.end() && !it->is_null()) {
            if (!it->is_number()) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": field rating must be a number");
            }
            double r = it->get<double>();
            if (r < 1.0 || r > 5.0) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": rating out of range [1,5]");
            }
            rec.rating = r;
        }
        if (auto it = j.find("text"); it != j.end() && !it->is_null()) {
            if (!it->is_string()) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": field text must be a string");
            }
            rec.text = it->get<std::string>();
        }
        if (auto it = j.find("keywords"); it != j.end() && !it->is_null()) {
            if (!it->is_array()) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": field keywords must be an array of strings");
            }
            for (const auto& k : *it) {
                if (!k.is_string()) {
                    throw std::runtime_error("line " + std::to_string(line_no) +
                                             ": field keywords must be an array of strings");
                }
                std::string kw = normalize_keyword(k.get<std::string>());
                if (!kw.empty()) rec.keywords.push_back(std::move(kw));
            }
        }
        corpus.reviews.push_back(std::move(rec));
    });
    return corpus;
}

void save_reviews(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    for (const auto& rec : corpus.reviews) {
        nlohmann::json j;
        j["user_id"] = rec.user_id;
        j["item_id"] = rec.item_id;
        if (rec.rating) j["rating"] = *rec.rating;
        if (!rec.text.empty()) j["text"] = rec.text;
        j["keywords"] = rec.keywords;
        out << j.dump() << '\n';
    }
}

std::pair<Corpus, Corpus> cold_start_split(const Corpus& corpus, const SplitSpec& spec) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
        throw std::runtime_error("cold_start_split: test_fraction must be in (0,1)");
    }
    std::vector<std::string> users = corpus.user_ids();
    if (users.size() < 2) {
        throw std::runtime_error("cold_start_split: corpus has fewer than 2 users");
    }
    auto n_test = static_cast<std::size_t>(
        std::llround(spec.test_fraction * static_cast<double>(users.size())));
    n_test = std::max<std::size_t>(n_test, 1);
    if (n_test >= users.size()) {
        throw std::runtime_error("cold_start_split: test_fraction leaves no train users");
    }

    seeded_shuffle(users, spec.seed);
    std::unordered_set<std::string> test_users(users.begin(), users.begin() + n_test);

    Corpus train, test;
    for (const auto& rec : corpus.reviews) {
        (test_users.count(rec.user_id) ? test : train).reviews.push_back(rec);
    }
    return {std::move(train), std::move(test)};
}

Profiles build_profiles(const Corpus& train) {
    Profiles profiles;
    for (const auto& rec : train.reviews) {
        UserProfile& up = profiles.users[rec.user_id];
        up.user_id = rec.user_id;
        ItemProfile& ip = profiles.items[rec.item_id];
        ip.item_id = rec.item_id;
        ip.review_count += 1;
        for (const auto& kw : rec.keywords) {
            up.keyword_counts[kw] += 1;
            ip.keyword_counts[kw] += 1;
        }
        // last review of the same item wins; absent rating counts as 0
        up.rated_items[rec.item_id] = rec.rating.value_or(0.0);
    }
    return profiles;
}

std::map<std::string, std::vector<std::string>> item_texts(const Corpus& corpus) {
    std::map<std::string, std::vector<std::string>> texts;
    for (const auto& rec : corpus.reviews) {
        if (!rec.text.empty()) texts[rec.item_id].push_back(rec.text);
    }
    return texts;
}

}  // namespace kwrec
