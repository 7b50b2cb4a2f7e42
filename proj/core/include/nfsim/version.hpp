#pragma once

namespace nfsim {

inline constexpr const char* kVersion = "0.3.0";

}  // namespace nfsim
