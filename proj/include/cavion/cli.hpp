#pragma once

#include <ostream>

namespace cavion {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 ok, 1 numeric failure, 2 input error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace cavion
