#pragma once

namespace horizons {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace horizons
