#pragma once

namespace gradroute {
inline constexpr const char* kToolVersion = "gradroute 0.1.0";
inline constexpr int kFormatVersion = 1;
}  // namespace gradroute
