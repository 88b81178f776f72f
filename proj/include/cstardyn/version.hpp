#pragma once

namespace cstar {

inline constexpr const char* version_string = "cstardyn 0.1.0";

}
