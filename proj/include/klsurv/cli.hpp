#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace klsurv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNonConvergence = 3;
inline constexpr int kExitStudyFailure = 4;

inline constexpr const char* kToolVersion = "0.1.0";

// Entry point shared by the executable and the tests. args excludes the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);
int run(int argc, char** argv);

}  // namespace klsurv::cli
