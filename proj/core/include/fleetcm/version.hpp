#pragma once

namespace fleetcm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fleetcm
