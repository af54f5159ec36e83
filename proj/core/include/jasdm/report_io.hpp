#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "jasdm/analysis.hpp"

namespace jasdm {

// All writers emit a header row and 17-significant-digit floats, so values
// read back with strtod are bit-identical to what was written.

/// delta_exponent,epsilon_hat,epsilon_hat_stderr,n_batches,n_paths
void write_convergence_csv(std::ostream& out, const ConvergenceReport& report);

/// log2_delta,log2_error for rungs with a positive error.
void write_convergence_points_csv(std::ostream& out, const ConvergenceReport& report);

/// t,mc_mean,stderr,closed_form
void write_mean_reversion_csv(std::ostream& out, const MeanReversionReport& report);

/// p,sup_moment,sup_moment_stderr,argmax_t,mean_sup,mean_sup_stderr,n_paths
void write_moments_csv(std::ostream& out, const MomentReport& report);

/// Rows of comma-separated fields; no quoting (none of the writers quote).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(std::istream& in);

std::string format_double(double v);

}  // namespace jasdm
