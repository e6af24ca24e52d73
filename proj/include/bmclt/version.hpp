#pragma once

namespace bmclt {

inline constexpr const char* version_string = "bmclt 0.1.0";

}  // namespace bmclt
