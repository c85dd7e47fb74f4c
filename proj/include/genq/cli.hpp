#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace genq {

/// Entry point behind the `genq` binary. Returns the process exit code:
/// 0 success, 1 usage error, 2 data error.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace genq
