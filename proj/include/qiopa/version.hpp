#pragma once

namespace qiopa {

inline constexpr const char* kVersion = "0.1.0";

} // namespace qiopa
