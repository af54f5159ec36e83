#include "jasdm/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace jasdm {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_convergence_csv(std::ostream& out, const ConvergenceReport& report) {
  out << "delta_exponent,epsilon_hat,epsilon_hat_stderr,n_batches,n_paths\n";
  for (std::size_t r = 0; r < report.deltas.size(); ++r) {
    out << format_double(std::log2(report.tau / report.deltas[r])) << ','
        << format_double(report.errors[r]) << ',' << format_double(report.error_stderr[r]) << ','
        << report.batches << ',' << report.batches * report.paths_per_batch << '\n';
  }
}

void write_convergence_points_csv(std::ostream& out, const ConvergenceReport& report) {
  out << "log2_delta,log2_error\n";
  for (std::size_t r = 0; r < report.deltas.size(); ++r) {
    if (!(report.errors[r] > 0.0)) continue;
    out << format_double(std::log2(report.deltas[r])) << ','
        << format_double(std::log2(report.errors[r])) << '\n';
  }
}

void write_mean_reversion_csv(std::ostream& out, const MeanReversionReport& report) {
  out << "t,mc_mean,stderr,closed_form\n";
  for (std::size_t i = 0; i < report.times.size(); ++i) {
    out << format_double(report.times[i]) << ',' << format_double(report.estimated_means[i])
        << ',' << format_double(report.standard_errors[i]) << ','
        << format_double(report.closed_form_means[i]) << '\n';
  }
}

void write_moments_csv(std::ostream& out, const MomentReport& report) {
  out << "p,sup_moment,sup_moment_stderr,argmax_t,mean_sup,mean_sup_stderr,n_paths\n";
  for (const MomentRow& row : report.rows) {
    out << format_double(row.p) << ',' << format_double(row.sup_moment) << ','
        << format_double(row.sup_moment_stderr) << ',' << format_double(row.argmax_time) << ','
        << format_double(row.mean_sup) << ',' << format_double(row.mean_sup_stderr) << ','
        << report.paths << '\n';
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::out_of_range("no CSV column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const std::string& field = rows.at(row).at(column(name));
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0')
    throw std::invalid_argument("CSV field '" + field + "' is not a number");
  return v;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  auto split = [](const std::string& text) {
    std::vector<std::string> fields;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
  };
  if (!std::getline(in, line)) return table;
  table.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    table.rows.push_back(split(line));
    if (table.rows.back().size() != table.header.size())
      throw std::invalid_argument("CSV row width differs from header");
  }
  return table;
}

}  // namespace jasdm
