#include <doctest.h>

#include <algorithm>
#include <random>

#include "kwrec/keywords.hpp"
#include "temp_files.hpp"

using namespace kwrec;
using kwrec::testsupport::TempDir;

namespace {

std::vector<TaggedToken> tokens(std::initializer_list<std::pair<const char*, const char*>> list) {
    std::vector<TaggedToken> out;
    for (const auto& [surface, pos] : list) out.push_back({surface, parse_pos(pos)});
    return out;
}

}  // namespace

TEST_CASE("normalize_keyword lowercases, trims and collapses whitespace") {
    CHECK(normalize_keyword("  Great   Pizza ") == "great pizza");
    CHECK(normalize_keyword("PIZZA") == "pizza");
    CHECK(normalize_keyword(" \t ") == "");
    CHECK(normalize_keyword("a\tb\nc") == "a b c");
}

TEST_CASE("extract_keywords groups maximal kept-POS runs") {
    auto got = extract_keywords(
        tokens({{"great", "ADJ"}, {"pizza", "NOUN"}, {"was", "OTHER"}, {"served", "VERB"}}));
    CHECK(got == std::vector<std::string>{"great pizza", "served"});

    CHECK(extract_keywords(tokens({{"the", "OTHER"}, {"of", "OTHER"}})).empty());
    CHECK(extract_keywords(tokens({{"pizza", "NOUN"}})) == std::vector<std::string>{"pizza"});
    CHECK(extract_keywords({}).empty());
}

TEST_CASE("extract_keywords keeps PROPN runs and normalizes surfaces") {
    auto got = extract_keywords(tokens({{"Joe's", "PROPN"}, {"Diner", "PROPN"}, {".", "OTHER"}}));
    CHECK(got == std::vector<std::string>{"joe's diner"});
}

TEST_CASE("splitting a token list at an OTHER token changes nothing") {
    std::mt19937_64 gen(123);
    const char* tags[] = {"ADJ", "NOUN", "PROPN", "VERB", "OTHER"};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TaggedToken> all;
        const int n = 2 + static_cast<int>(gen() % 12);
        for (int i = 0; i < n; ++i) {
            all.push_back({"w" + std::to_string(gen() % 9), parse_pos(tags[gen() % 5])});
        }
        // find an OTHER to split at; if none, splitting is not applicable
        auto cut = std::find_if(all.begin(), all.end(),
                                [](const TaggedToken& t) { return !is_kept_pos(t.pos); });
        if (cut == all.end()) continue;

        auto whole = extract_keywords(all);
        std::vector<TaggedToken> left(all.begin(), cut), right(cut, all.end());
        auto first = extract_keywords(left);
        auto second = extract_keywords(right);
        first.insert(first.end(), second.begin(), second.end());

        std::sort(whole.begin(), whole.end());
        std::sort(first.begin(), first.end());
        CHECK(whole == first);
    }
}

TEST_CASE("every keyword is a contiguous subsequence of the input surfaces") {
    std::mt19937_64 gen(7);
    const char* tags[] = {"ADJ", "NOUN", "VERB", "OTHER"};
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<TaggedToken> all;
        std::string joined;
        const int n = 1 + static_cast<int>(gen() % 10);
        for (int i = 0; i < n; ++i) {
            all.push_back({"tok" + std::to_string(gen() % 7), parse_pos(tags[gen() % 4])});
            if (!joined.empty()) joined += ' ';
            joined += all.back().surface;
        }
        for (const auto& kw : extract_keywords(all)) {
            CHECK(joined.find(kw) != std::string::npos);
        }
    }
}

TEST_CASE("load_pretagged applies the extraction rule per record") {
    TempDir dir;
    auto path = dir.write(
        "tagged.jsonl",
        R"({"user_id":"u1","item_id":"r1","review_index":0,"tokens":[)"
        R"({"surface":"great","pos":"ADJ"},{"surface":"pizza","pos":"NOUN"},)"
        R"({"surface":"was","pos":"OTHER"},{"surface":"served","pos":"VERB"}]})"
        "\n");
    PretaggedFile result = load_pretagged(path);
    REQUIRE(result.keywords.size() == 1);
    ReviewKey key{"u1", "r1", 0};
    CHECK(result.keywords.at(key) == std::vector<std::string>{"great pizza", "served"});
    CHECK(result.unknown_pos_count == 0);
}

TEST_CASE("load_pretagged maps unknown pos to OTHER with a warning count") {
    TempDir dir;
    auto path = dir.write("tagged.jsonl",
                          R"({"user_id":"u1","item_id":"r1","review_index":0,"tokens":[)"
                          R"({"surface":"nice","pos":"ADJ"},{"surface":"zzz","pos":"XYZ"},)"
                          R"({"surface":"view","pos":"NOUN"}]})"
                          "\n");
    PretaggedFile result = load_pretagged(path);
    CHECK(result.unknown_pos_count == 1);
    // the XYZ token behaves as OTHER and breaks the run
    CHECK(result.keywords.at({"u1", "r1", 0}) == std::vector<std::string>{"nice", "view"});
}

TEST_CASE("load_pretagged empty file") {
    TempDir dir;
    PretaggedFile result = load_pretagged(dir.write("empty.jsonl", ""));
    CHECK(result.keywords.empty());
    CHECK(result.unknown_pos_count == 0);
}
