#pragma once

namespace wviab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace wviab
