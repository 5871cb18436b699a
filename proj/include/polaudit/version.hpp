#pragma once

namespace polaudit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace polaudit
