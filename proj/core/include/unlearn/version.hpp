#pragma once

namespace unlearn {

inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace unlearn
