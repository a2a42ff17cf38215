#pragma once

namespace samtwostep {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace samtwostep
