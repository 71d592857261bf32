#pragma once

#include <iosfwd>

namespace edcnn {

/// Subcommands factorize, compile, eval, gradcheck, approx-rate, learn-rate and report, each
/// driven by `--config <file.json>`. Returns 0 on success, 1 on usage or validation errors and
/// 2 on numerical failures.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace edcnn
