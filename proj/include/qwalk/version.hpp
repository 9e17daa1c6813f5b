#pragma once

namespace qwalk {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

}  // namespace qwalk
