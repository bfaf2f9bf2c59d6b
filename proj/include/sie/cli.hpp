#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace sie::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,          ///< bad arguments or configuration
  kGuard = 2,          ///< a runtime guard (Zeno / beating) ended the simulation
  kSolver = 3,         ///< integrator, event or Newton failure
  kCertification = 4,  ///< a certificate or verdict failed
};

struct Options {
  std::string command;  ///< simulate | orbit | certify-prop1 | iss-sweep | validate
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// Runs one subcommand. Diagnostics go to `err`, the one-line summary to `out`.
int run(const Options& opts, std::ostream& out, std::ostream& err);

/// Fixed 17-significant-digit rendering used in every CSV ("inf", "-inf", "nan" for
/// non-finite values).
std::string format_number(double x);

}  // namespace sie::cli
