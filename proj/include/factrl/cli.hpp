#pragma once

namespace factrl::cli {

// Dispatches the prepare/score/train/eval/judge-agg subcommands.
// Returns 0 on success, 2 on config/validation errors (with a single-line
// message on stderr).
int run(int argc, const char* const* argv);

}  // namespace factrl::cli
