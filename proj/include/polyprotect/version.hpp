#pragma once

namespace polyprotect {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace polyprotect
