#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace jasdm::cli {

enum ExitCode : int {
  kSuccess = 0,
  kValidationFailure = 1,
  kPositivityViolation = 2,
  kIoOrConfigError = 3,
};

inline constexpr const char* kToolVersion = "0.1.0";

/// Fully resolved request for one subcommand; also the payload of the run
/// manifest, so a manifest can be replayed.
struct StudyRequest {
  std::string subcommand;
  std::string config_path;
  /// Resolved config in file syntax. Overrides config_path when non-empty.
  std::string config_text;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::size_t paths = 100;
  int batches = 50;
  int per_batch = 100;
  std::vector<int> delta_exponents;
  int ref_exponent = 12;
  unsigned threads = 0;  ///< 0 means hardware concurrency
  std::optional<double> theta;
  std::optional<int> delta_exponent;
  bool sup_error = false;
  double floor_factor = 10.0;
  double t_multiplier = 1.0;
  std::vector<double> moment_orders{1.0, 2.0, 4.0};
  std::string scheme = "jasdm";
};

/// Parses "5,6,7", "5..9", or a mix such as "5..7,9".
std::vector<int> parse_exponent_list(const std::string& text);

int run_request(const StudyRequest& request, std::ostream& out, std::ostream& err);

/// Entry point shared by the binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace jasdm::cli
