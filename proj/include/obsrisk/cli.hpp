#ifndef OBSRISK_CLI_HPP
#define OBSRISK_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace obsrisk::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Runs one CLI invocation. `args` excludes the program name. Results go to
/// `out` (or the --out file), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

/// CSV header of `sweep`, frozen.
inline constexpr const char* kSweepHeader =
    "theta,delta,delta_err,mean_outcome_t1,treated_mass";

/// Fixed 12-significant-digit rendering used in every output.
std::string format_number(double v);

}  // namespace obsrisk::cli

#endif  // OBSRISK_CLI_HPP
