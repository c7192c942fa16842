#pragma once

#include <ostream>

namespace mbgw::cli {

enum Exit { ok = 0, usage = 1, validation = 2, numeric = 3, statistical = 4 };

// Entry point of the mbgw binary; writes progress to `out` and diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mbgw::cli
