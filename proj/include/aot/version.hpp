#pragma once

namespace aot {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace aot
