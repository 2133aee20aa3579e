#pragma once

#include <string_view>

namespace betaips {

// Warnings go to stderr unless silenced (tests and the Python module silence
// them; the CLI leaves them on).
void set_warnings_enabled(bool enabled);
bool warnings_enabled();
void warn(std::string_view message);

}  // namespace betaips
