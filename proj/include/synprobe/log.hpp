#pragma once

#include <string_view>

namespace synprobe {

// Warnings go to stderr unless silenced (tests silence them).
void log_warning(std::string_view msg);
void set_warnings_enabled(bool enabled);

}  // namespace synprobe
