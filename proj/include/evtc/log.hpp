#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace evtc::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3 };

// Level comes from EVTCOSIM_LOG (debug|info|warn|error), default warn.
inline Level threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("EVTCOSIM_LOG");
        if (!env) return Level::Warn;
        std::string_view v(env);
        if (v == "debug") return Level::Debug;
        if (v == "info") return Level::Info;
        if (v == "error") return Level::Error;
        return Level::Warn;
    }();
    return lvl;
}

inline void write(Level lvl, std::string_view tag, const std::string& msg) {
    if (lvl < threshold()) return;
    std::cerr << "[" << tag << "] " << msg << "\n";
}

inline void debug(const std::string& msg) { write(Level::Debug, "debug", msg); }
inline void info(const std::string& msg) { write(Level::Info, "info", msg); }
inline void warn(const std::string& msg) { write(Level::Warn, "warn", msg); }
inline void error(const std::string& msg) { write(Level::Error, "error", msg); }

} // namespace evtc::log
