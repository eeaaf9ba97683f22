#pragma once

namespace echoseg {

/// Entry point for the `echoseg` command-line tool.
/// Exit codes: 0 success, 1 runtime or data failure, 2 argument error.
int run_cli(int argc, const char* const* argv);

}  // namespace echoseg
