#pragma once

namespace rcp {

inline constexpr const char* version = "0.3.0";

} // namespace rcp
