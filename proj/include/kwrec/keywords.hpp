#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kwrec {

// Part-of-speech alphabet used by the span rule. Anything else is Other.
enum class Pos { Adj, Noun, Propn, Verb, Other };

Pos parse_pos(std::string_view tag);
bool is_kept_pos(Pos pos);

struct TaggedToken {
    std::string surface;
    Pos pos = Pos::Other;
};

// Lowercase, trim, collapse internal whitespace runs to a single space.
// Every keyword stored anywhere in the pipeline goes through this.
std::string normalize_keyword(std::string_view raw);

// One keyword per maximal run of consecutive ADJ/NOUN/PROPN/VERB tokens,
// surfaces joined by single spaces and normalized. Empty results are dropped.
std::vector<std::string> extract_keywords(std::span<const TaggedToken> tokens);

// Identifies one review: index counts reviews with the same (user, item)
// pair in file order, starting at 0.
struct ReviewKey {
    std::string user_id;
    std::string item_id;
    int review_index = 0;

    auto operator<=>(const ReviewKey&) const = default;
};

struct PretaggedFile {
    std::map<ReviewKey, std::vector<std::string>> keywords;
    int unknown_pos_count = 0;  // tokens whose tag was not in the alphabet
};

// JSONL of {user_id, item_id, review_index, tokens:[{surface,pos}]}.
// Unknown pos strings are treated as Other and counted, not rejected.
PretaggedFile load_pretagged(const std::filesystem::path& path);

}  // namespace kwrec
