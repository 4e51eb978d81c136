#pragma once

namespace layerlens {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace layerlens
