#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nfsim::cli {

enum ExitCode : int { kOk = 0, kUnexpected = 1, kConfigError = 2, kNumericalError = 3, kPropertyFailure = 4 };

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nfsim::cli
