#pragma once

namespace survivalkit {
inline constexpr const char* version = "0.1.0";
}
