#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "evtc/errors.hpp"

namespace evtc::jsonio {

using json = nlohmann::json;

inline json load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("invalid json in " + path.string() + ": " + e.what());
    }
}

inline void save(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

inline const json& require(const json& j, const std::string& key, const std::string& context) {
    auto it = j.find(key);
    if (it == j.end()) throw DataError("missing field '" + key + "' in " + context);
    return *it;
}

} // namespace evtc::jsonio
