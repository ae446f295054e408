#pragma once

namespace fedq {

// Embedded in config echoes and summaries so output directories are
// self-describing.
inline constexpr const char* kVersion = "fedq 0.1.0";

}  // namespace fedq
