#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace goldie::cli {

/// One row of the operation coverage table: every public library operation
/// is reachable from exactly one CLI verb.
struct OpCoverage {
  const char* op;
  const char* verb;
};

const std::vector<OpCoverage>& op_coverage();

/// Parses and executes one command line. Writes the JSON run report to
/// `out` and diagnostics to `err`. Returns the process exit code:
/// 0 pass (or inapplicable), 1 verification failure, 2 usage, parse or
/// domain error.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace goldie::cli
