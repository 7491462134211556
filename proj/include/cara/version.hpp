#pragma once

namespace cara {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cara
