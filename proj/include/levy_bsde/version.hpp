#pragma once

namespace levy_bsde {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace levy_bsde
