#include "ppap/common/log.h"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace ppap::log {

namespace {

Level parse_env() {
    const char * env = std::getenv("PPAP_VERBOSITY");
    if (!env) return Level::warn;
    const std::string v(env);
    if (v == "quiet" || v == "0") return Level::quiet;
    if (v == "info" || v == "2") return Level::info;
    if (v == "debug" || v == "3") return Level::debug;
    return Level::warn;
}

std::atomic<int> & current() {
    static std::atomic<int> lvl{static_cast<int>(parse_env())};
    return lvl;
}

void emit(Level lvl, const char * tag, std::string_view msg) {
    if (static_cast<int>(lvl) > current().load()) return;
    std::fprintf(stderr, "[%s] %.*s\n", tag, static_cast<int>(msg.size()), msg.data());
}

} // namespace

Level level() { return static_cast<Level>(current().load()); }
void set_level(Level lvl) { current().store(static_cast<int>(lvl)); }

void warn(std::string_view msg) { emit(Level::warn, "warn", msg); }
void info(std::string_view msg) { emit(Level::info, "info", msg); }
void debug(std::string_view msg) { emit(Level::debug, "debug", msg); }

} // namespace ppap::log
