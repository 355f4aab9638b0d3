#pragma once

#include <string_view>

namespace ppap::log {

enum class Level : int { quiet = 0, warn = 1, info = 2, debug = 3 };

// Read once from PPAP_VERBOSITY (quiet|warn|info|debug or 0..3). Defaults to warn.
Level level();
void set_level(Level lvl);

void warn(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

} // namespace ppap::log
