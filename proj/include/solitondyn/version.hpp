#pragma once

namespace solitondyn {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace solitondyn
