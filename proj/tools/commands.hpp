#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jointcr::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kNumericFailure = 1;
inline constexpr int kUsageFailure = 2;

// Entry point shared by the executable and the tests; args exclude argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jointcr::cli
