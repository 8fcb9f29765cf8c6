#pragma once

namespace wmerge::cli {

// Full command-line entry point. Exit codes: 0 success, 2 usage/config,
// 3 I/O, 4 numeric failure.
int run(int argc, const char* const* argv);

}  // namespace wmerge::cli
