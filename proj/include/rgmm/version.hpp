#pragma once

namespace rgmm {
inline constexpr const char* kVersion = "0.1.0";
}
