#include "kwrec/keywords.hpp"

#include <cctype>

#include "jsonl_util.hpp"

namespace kwrec {

Pos parse_pos(std::string_view tag) {
    if (tag == "ADJ") return Pos::Adj;
    if (tag == "NOUN") return Pos::Noun;
    if (tag == "PROPN") return Pos::Propn;
    if (tag == "VERB") return Pos::Verb;
    return Pos::Other;
}

bool is_kept_pos(Pos pos) {
    return pos != Pos::Other;
}

std::string normalize_keyword(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (unsigned char c : raw) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<std::string> extract_keywords(std::span<const TaggedToken> tokens) {
    std::vector<std::string> keywords;
    std::string run;
    auto flush = [&] {
        if (run.empty()) return;
        std::string kw = normalize_keyword(run);
        if (!kw.empty()) keywords.push_back(std::move(kw));
        run.clear();
    };
    for (const TaggedToken& tok : tokens) {
        if (is_kept_pos(tok.pos)) {
            if (!run.empty()) run.push_back(' ');
            run += tok.surface;
        } else {
            flush();
        }
    }
    flush();
    return keywords;
}

PretaggedFile load_pretagged(const std::filesystem::path& path) {
    PretaggedFile result;
    detail::for_each_jsonl(path, [&](int line_no, const nlohmann::json& j) {
        ReviewKey key;
        key.user_id = detail::require_string(j, "user_id", line_no);
        key.item_id = detail::require_string(j, "item_id", line_no);
        auto idx = j.find("review_index");
        if (idx == j.end() || !idx->is_number_integer()) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": missing field review_index");
        }
        key.review_index = idx->get<int>();

        auto toks = j.find("tokens");
        if (toks == j.end() || !toks->is_array()) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": missing field tokens");
        }
        std::vector<TaggedToken> tokens;
        tokens.reserve(toks->size());
        for (const auto& t : *toks) {
            if (!t.is_object() || !t.contains("surface") || !t["surface"].is_string() ||
                !t.contains("pos") || !t["pos"].is_string()) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": token needs surface and pos strings");
            }
            if (t["surface"].get<std::string>().empty()) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": empty token surface");
            }
            std::string tag = t["pos"].get<std::string>();
            Pos pos = parse_pos(tag);
            if (pos == Pos::Other && tag != "OTHER") {
                ++result.unknown_pos_count;
            }
            tokens.push_back({t["surface"].get<std::string>(), pos});
        }
        result.keywords[key] = extract_keywords(tokens);
    });
    return result;
}

}  // namespace kwrec
