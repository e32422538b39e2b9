#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace kwrec {

struct ReviewRecord {
    std::string user_id;
    std::string item_id;
    std::optional<double> rating;  // [1,5] when present
    std::string text;
    std::vector<std::string> keywords;  // normalized, multiset semantics

    bool operator==(const ReviewRecord&) const = default;
};

struct Corpus {
    std::vector<ReviewRecord> reviews;

    std::vector<std::string> user_ids() const;  // sorted unique
    std::vector<std::string> item_ids() const;
};

struct ItemProfile {
    std::string item_id;
    std::map<std::string, std::int64_t> keyword_counts;  // f_r^w
    std::int64_t review_count = 0;
};

struct UserProfile {
    std::string user_id;
    std::map<std::string, std::int64_t> keyword_counts;
    std::map<std::string, double> rated_items;  // absent rating stored as 0
};

struct Profiles {
    std::map<std::string, UserProfile> users;
    std::map<std::string, ItemProfile> items;
};

struct SplitSpec {
    double test_fraction = 0.2;  // in (0,1)
    std::uint64_t seed = 0;
};

// JSONL, one object per line: user_id, item_id, rating?, text?, keywords?.
// Keywords are normalized on load. Malformed lines abort with "line N: ...".
Corpus load_reviews(const std::filesystem::path& path);

void save_reviews(const Corpus& corpus, const std::filesystem::path& path);

// Splits by user so test users have no train reviews. Selection is a seeded
// permutation of the sorted user ids; |test| = round(fraction * |users|),
// at least 1, and at least 1 user must remain in train.
std::pair<Corpus, Corpus> cold_start_split(const Corpus& corpus, const SplitSpec& spec);

Profiles build_profiles(const Corpus& train);

// Review texts grouped per item, in review order.
std::map<std::string, std::vector<std::string>> item_texts(const Corpus& corpus);

}  // namespace kwrec
