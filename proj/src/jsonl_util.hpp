#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace kwrec::detail {

// Streams a JSON Lines file. Blank lines are skipped; anything else must be
// a JSON object. Errors are reported as "line N: ..." so callers can pass
// them through unchanged.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(int, const nlohmann::json&)>& fn) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": invalid JSON");
        }
        if (!j.is_object()) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": expected a JSON object");
        }
        fn(line_no, j);
    }
}

inline std::string require_string(const nlohmann::json& j, const char* field, int line_no) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string()) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": missing field " + field);
    }
    return it->get<std::string>();
}

}  // namespace kwrec::detail
