#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jasdm/analysis.hpp"
#include "jasdm/config.hpp"
#include "jasdm/model.hpp"
#include "jasdm/noise.hpp"
#include "jasdm/report_io.hpp"
#include "jasdm/scheme.hpp"

namespace jasdm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Four decimals with trailing zeros trimmed, keeping one: 1.0000 -> 1.0.
std::string short_fixed(double v) {
  std::string s = fixed(v);
  if (s.find('.') == std::string::npos) return s;
  while (s.size() > 2 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

LoadedConfig resolve_config(const StudyRequest& req) {
  LoadedConfig config = req.config_text.empty() ? load_config(req.config_path)
                                                : load_config_from_string(req.config_text);
  if (req.theta) config.scheme.theta = *req.theta;
  if (req.delta_exponent) {
    config.delta_exponent = *req.delta_exponent;
    config.scheme.steps_per_delay = steps_for_exponent(*req.delta_exponent);
  }
  try {
    config.scheme.validate();
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
  return config;
}

unsigned thread_count(const StudyRequest& req) {
  return req.threads == 0 ? default_thread_count() : req.threads;
}

fs::path prepare_out_dir(const StudyRequest& req) {
  const fs::path dir(req.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::ios_base::failure("cannot create output directory '" + dir.string() + "'");
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
  return out;
}

json request_to_json(const StudyRequest& req, const LoadedConfig& config) {
  json j;
  j["subcommand"] = req.subcommand;
  j["config"] = dump_config(config);
  j["seed"] = req.seed;
  j["out_dir"] = req.out_dir;
  j["paths"] = req.paths;
  j["batches"] = req.batches;
  j["per_batch"] = req.per_batch;
  j["delta_exponents"] = req.delta_exponents;
  j["ref_exponent"] = req.ref_exponent;
  j["threads"] = req.threads;
  j["sup_error"] = req.sup_error;
  j["floor_factor"] = req.floor_factor;
  j["t_multiplier"] = req.t_multiplier;
  j["moment_orders"] = req.moment_orders;
  j["scheme"] = req.scheme;
  return j;
}

StudyRequest request_from_json(const json& j) {
  StudyRequest req;
  req.subcommand = j.at("subcommand").get<std::string>();
  req.config_text = j.at("request").at("config").get<std::string>();
  const json& r = j.at("request");
  req.seed = r.at("seed").get<std::uint64_t>();
  req.out_dir = r.at("out_dir").get<std::string>();
  req.paths = r.at("paths").get<std::size_t>();
  req.batches = r.at("batches").get<int>();
  req.per_batch = r.at("per_batch").get<int>();
  req.delta_exponents = r.at("delta_exponents").get<std::vector<int>>();
  req.ref_exponent = r.at("ref_exponent").get<int>();
  req.threads = r.at("threads").get<unsigned>();
  req.sup_error = r.at("sup_error").get<bool>();
  req.floor_factor = r.at("floor_factor").get<double>();
  req.t_multiplier = r.at("t_multiplier").get<double>();
  req.moment_orders = r.at("moment_orders").get<std::vector<double>>();
  req.scheme = r.at("scheme").get<std::string>();
  return req;
}

void write_manifest(const fs::path& dir, const StudyRequest& req, const LoadedConfig& config,
                    double seconds, const std::vector<std::string>& outputs) {
  const ModelSpec& m = config.model;
  json j;
  j["tool"] = "jasdm";
  j["tool_version"] = kToolVersion;
  j["subcommand"] = req.subcommand;
  j["master_seed"] = req.seed;
  j["output_directory"] = req.out_dir;
  j["wall_clock_seconds"] = seconds;
  j["outputs"] = outputs;
  j["model"] = {{"k1", m.k1},
                {"k2", m.k2},
                {"k3", m.k3},
                {"alpha", m.alpha},
                {"lambda", m.lambda},
                {"tau", m.tau},
                {"horizon", m.horizon},
                {"delay_coeff", to_string(m.delay_coeff.kind())},
                {"holder_gamma", m.holder_gamma()},
                {"jump_coeff", to_string(m.jump_coeff.kind())},
                {"lipschitz_L", m.lipschitz_L()},
                {"jump_positive", m.jump_positive()}};
  j["scheme"] = {{"theta", config.scheme.theta},
                 {"m", config.scheme.m},
                 {"steps_per_delay", config.scheme.steps_per_delay},
                 {"delta", config.scheme.delta(m.tau)}};
  j["request"] = request_to_json(req, config);
  auto out = open_out(dir / "manifest.json");
  out << j.dump(2) << '\n';
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

int cmd_validate(const StudyRequest& req, std::ostream& out, std::ostream& err) {
  const LoadedConfig config = resolve_config(req);
  print_warnings(err, config.warnings);
  const ModelSpec& model = config.model;
  const auto b = validate_assumption_b(model, config.scheme);
  const auto jump = validate_jump_step(model, config.scheme);

  out << "model: k1=" << model.k1 << " k2=" << model.k2 << " k3=" << model.k3
      << " alpha=" << model.alpha << " lambda=" << model.lambda << " tau=" << model.tau
      << " T=" << model.horizon << " b=" << to_string(model.delay_coeff.kind())
      << " gamma=" << model.holder_gamma() << " g=" << to_string(model.jump_coeff.kind())
      << " L=" << model.lipschitz_L() << '\n';
  out << "scheme: theta=" << config.scheme.theta << " m=" << config.scheme.m << " delta=2^-"
      << config.delta_exponent << "*tau=" << format_double(b.delta) << '\n';
  out << "Assumption B components: " << fixed(b.components[0]) << " ^ "
      << fixed(b.components[1]) << " ^ " << fixed(b.components[2]) << " = " << fixed(b.bound)
      << '\n';
  if (b.components[2] <= 0.0)
    out << "Assumption B cannot hold: 4 - k3^2 <= 0 with theta < 1\n";
  out << "Assumption B bound " << fixed(b.bound) << ": " << verdict(b.satisfied)
      << "; jump bound " << short_fixed(jump.bound) << ": " << verdict(jump.satisfied) << '\n';
  return b.satisfied && jump.satisfied ? kSuccess : kValidationFailure;
}

int cmd_simulate(const StudyRequest& req, const LoadedConfig& config, const fs::path& dir,
                 std::ostream& out, std::vector<std::string>& outputs) {
  if (req.paths == 0) throw UsageError("--paths must be >= 1");
  const ModelSpec& model = config.model;
  const bool em = req.scheme == "em";
  const int width = std::max<int>(4, static_cast<int>(std::to_string(req.paths - 1).size()));
  double min_value = std::numeric_limits<double>::infinity();
  std::size_t clamps = 0;
  std::size_t jumps = 0;
  for (std::size_t p = 0; p < req.paths; ++p) {
    const NoiseBundle noise =
        make_noise_bundle(model, config.scheme.steps_per_delay, req.seed, p);
    const Trajectory traj =
        em ? euler_maruyama_path(model, noise.fine_grid, noise.wiener_fine)
           : simulate_path(model, config.scheme, noise.fine_grid, noise.wiener_fine);
    char name[64];
    std::snprintf(name, sizeof name, "path_%0*zu.csv", width, p);
    auto file = open_out(dir / name);
    write_trajectory_csv(file, traj);
    outputs.emplace_back(name);
    min_value = std::min(min_value, traj.min_value());
    clamps += traj.clamp_count;
    jumps += noise.jump_times.size();
  }
  out << "simulated " << req.paths << " path(s) with " << (em ? "euler-maruyama" : "jasdm")
      << ", delta=" << format_double(config.scheme.delta(model.tau)) << "; jumps=" << jumps
      << " min value=" << format_double(min_value) << " clamps=" << clamps << '\n';
  return em && min_value < 0.0 ? kPositivityViolation : kSuccess;
}

int cmd_convergence(const StudyRequest& req, const LoadedConfig& config, const fs::path& dir,
                    std::ostream& out, std::ostream& err, std::vector<std::string>& outputs) {
  if (req.delta_exponents.empty()) throw UsageError("--delta-exponents is required");
  std::vector<int> ladder;
  for (int e : req.delta_exponents) {
    if (e > req.ref_exponent)
      throw UsageError("delta exponent " + std::to_string(e) + " exceeds --ref-exponent");
    ladder.push_back(steps_for_exponent(e));
  }
  ConvergenceOptions options;
  options.batches = req.batches;
  options.paths_per_batch = req.per_batch;
  options.ref_steps_per_delay = steps_for_exponent(req.ref_exponent);
  options.master_seed = req.seed;
  options.threads = thread_count(req);
  options.sup_error = req.sup_error;
  options.floor_factor = req.floor_factor;

  const ConvergenceReport report = strong_error_study(config.model, config.scheme, ladder, options);
  {
    auto file = open_out(dir / "convergence.csv");
    write_convergence_csv(file, report);
    outputs.emplace_back("convergence.csv");
  }
  {
    auto file = open_out(dir / "convergence_points.csv");
    write_convergence_points_csv(file, report);
    outputs.emplace_back("convergence_points.csv");
  }
  print_warnings(err, report.warnings);

  out << "delta        epsilon_hat   stderr        rate\n";
  for (std::size_t r = 0; r < report.deltas.size(); ++r) {
    char line[160];
    std::snprintf(line, sizeof line, "2^-%-9d %-13.6g %-13.6g %s%s\n", req.delta_exponents[r],
                  report.errors[r], report.error_stderr[r],
                  r == 0 ? "-" : fixed(report.rung_rates[r - 1]).c_str(),
                  report.used_in_fit[r] ? "" : "  (not fitted)");
    out << line;
  }
  out << "reference delta 2^-" << req.ref_exponent << ", " << report.batches << " x "
      << report.paths_per_batch << " paths"
      << (report.sup_error ? ", sup-over-time error" : ", endpoint error") << '\n';
  if (report.fit) {
    out << "fitted slope " << fixed(report.fit->slope) << " (theoretical lower bound "
        << fixed(report.theoretical_slope_lower_bound) << ")\n";
  } else {
    out << "no slope: fewer than two usable rungs\n";
  }
  if (report.fit_all && report.fit && report.fit_all->points_used != report.fit->points_used)
    out << "slope over all rungs " << fixed(report.fit_all->slope) << '\n';
  return kSuccess;
}

int cmd_mean_reversion(const StudyRequest& req, const LoadedConfig& config, const fs::path& dir,
                       std::ostream& out, std::ostream& err, std::vector<std::string>& outputs) {
  if (req.paths == 0) throw UsageError("--paths must be >= 1");
  if (!(req.t_multiplier > 0.0)) throw UsageError("--t-multiplier must be > 0");
  const double horizon = config.model.horizon * req.t_multiplier;
  const MeanReversionReport report = mean_reversion_study(
      config.model, config.scheme, horizon, req.paths, req.seed, thread_count(req));
  auto file = open_out(dir / "mean_reversion.csv");
  write_mean_reversion_csv(file, report);
  outputs.emplace_back("mean_reversion.csv");
  print_warnings(err, report.warnings);

  const std::size_t last = report.times.size() - 1;
  const double gap = report.estimated_means[last] - report.closed_form_means[last];
  out << "T=" << format_double(report.times[last]) << " mean=" << format_double(report.estimated_means[last])
      << " stderr=" << format_double(report.standard_errors[last])
      << " closed form=" << format_double(report.closed_form_means[last]) << " ("
      << fixed(report.standard_errors[last] > 0 ? gap / report.standard_errors[last] : 0.0, 2)
      << " SE)\n";
  out << "long-run level k1/k2=" << format_double(config.model.k1 / config.model.k2)
      << ", scheme bound k1/(k2 theta)=" << format_double(report.theta_bound) << '\n';
  return kSuccess;
}

int cmd_moments(const StudyRequest& req, const LoadedConfig& config, const fs::path& dir,
                std::ostream& out, std::vector<std::string>& outputs) {
  if (req.paths == 0) throw UsageError("--paths must be >= 1");
  const MomentReport report = moment_study(config.model, config.scheme, req.moment_orders,
                                           req.paths, req.seed, thread_count(req));
  auto file = open_out(dir / "moments.csv");
  write_moments_csv(file, report);
  outputs.emplace_back("moments.csv");
  for (const auto& row : report.rows) {
    out << "p=" << format_double(row.p) << " sup_t E[y^p]=" << format_double(row.sup_moment)
        << " (SE " << format_double(row.sup_moment_stderr) << ", t=" << format_double(row.argmax_time)
        << ")  E[sup_t y^p]=" << format_double(row.mean_sup) << " (SE "
        << format_double(row.mean_sup_stderr) << ")\n";
  }
  return kSuccess;
}

int cmd_audit(const StudyRequest& req, const LoadedConfig& config, const fs::path& dir,
              std::ostream& out, std::vector<std::string>& outputs) {
  if (req.paths == 0) throw UsageError("--paths must be >= 1");
  const SchemeKind kind = req.scheme == "em" ? SchemeKind::euler_maruyama : SchemeKind::jasdm;
  const PositivityReport r =
      positivity_audit(config.model, config.scheme, req.paths, req.seed, kind, thread_count(req));
  auto file = open_out(dir / "positivity.csv");
  file << "scheme,paths,min_value,negative_count,paths_with_negative,jump_violations,clamp_total,"
          "guaranteed_regime\n"
       << to_string(r.scheme) << ',' << r.paths << ',' << format_double(r.min_value) << ','
       << r.negative_count << ',' << r.paths_with_negative << ',' << r.jump_violations << ','
       << r.clamp_total << ',' << (r.guaranteed_regime ? 1 : 0) << '\n';
  outputs.emplace_back("positivity.csv");
  out << to_string(r.scheme) << ": " << r.paths << " paths, min value " << format_double(r.min_value)
      << ", negative values " << r.negative_count << " on " << r.paths_with_negative
      << " path(s), jump violations " << r.jump_violations << ", clamps " << r.clamp_total
      << (r.guaranteed_regime ? " [guaranteed regime]" : "") << '\n';
  return r.negative_count > 0 || r.jump_violations > 0 ? kPositivityViolation : kSuccess;
}

int dispatch(const StudyRequest& req, std::ostream& out, std::ostream& err) {
  if (req.subcommand == "validate") return cmd_validate(req, out, err);

  const LoadedConfig config = resolve_config(req);
  print_warnings(err, config.warnings);
  if (!in_positivity_regime(config.model, config.scheme))
    err << "warning: step size outside the guaranteed positivity regime (see 'validate')\n";

  const fs::path dir = prepare_out_dir(req);
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> outputs;
  int code = kSuccess;
  if (req.subcommand == "simulate") {
    code = cmd_simulate(req, config, dir, out, outputs);
  } else if (req.subcommand == "convergence") {
    code = cmd_convergence(req, config, dir, out, err, outputs);
  } else if (req.subcommand == "mean-reversion") {
    code = cmd_mean_reversion(req, config, dir, out, err, outputs);
  } else if (req.subcommand == "moments") {
    code = cmd_moments(req, config, dir, out, outputs);
  } else if (req.subcommand == "audit") {
    code = cmd_audit(req, config, dir, out, outputs);
  } else {
    throw UsageError("unknown subcommand '" + req.subcommand + "'");
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(dir, req, config, seconds, outputs);
  return code;
}

}  // namespace

std::vector<int> parse_exponent_list(const std::string& text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string item;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw UsageError("bad exponent '" + s + "' in '" + text + "'");
    return v;
  };
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      values.push_back(to_int(item));
      continue;
    }
    const int lo = to_int(item.substr(0, dots));
    const int hi = to_int(item.substr(dots + 2));
    if (hi < lo) throw UsageError("empty exponent range '" + item + "'");
    for (int e = lo; e <= hi; ++e) values.push_back(e);
  }
  return values;
}

int run_request(const StudyRequest& req, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(req, out, err);
  } catch (const PositivityViolation& e) {
    err << "positivity violation: " << e.what() << '\n';
    return kPositivityViolation;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kIoOrConfigError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kIoOrConfigError;
  } catch (const std::ios_base::failure& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoOrConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoOrConfigError;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Jump-adapted semi-discrete simulation of CIR/CEV delay models with jumps", "jasdm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  StudyRequest req;
  std::string exponents;
  std::string orders;
  std::string manifest_path;
  std::optional<std::string> out_override;
  std::optional<unsigned> threads_override;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", req.config_path, "Model config file")->required();
    sub->add_option("--theta", req.theta, "Override the implicitness level theta");
    sub->add_option("--delta-exponent", req.delta_exponent, "Override delta = tau * 2^-E");
  };
  auto add_run = [&](CLI::App* sub) {
    sub->add_option("--seed", req.seed, "Master seed");
    sub->add_option("--out", req.out_dir, "Output directory");
    sub->add_option("--threads", req.threads, "Worker threads (0 = hardware)");
  };

  auto* validate = app.add_subcommand("validate", "Check the step-size conditions");
  add_common(validate);

  auto* simulate = app.add_subcommand("simulate", "Write single-path trajectories as CSV");
  add_common(simulate);
  add_run(simulate);
  simulate->add_option("--paths", req.paths, "Number of paths")->default_val(1);
  simulate->add_option("--scheme", req.scheme, "jasdm or em")
      ->check(CLI::IsMember({"jasdm", "em"}));

  auto* convergence = app.add_subcommand("convergence", "Strong L2 error against a fine reference");
  add_common(convergence);
  add_run(convergence);
  convergence->add_option("--delta-exponents", exponents, "e.g. 5..9 or 5,6,7")->required();
  convergence->add_option("--ref-exponent", req.ref_exponent, "Reference delta = tau * 2^-E")
      ->default_val(12);
  convergence->add_option("--batches", req.batches, "Batches M")->default_val(50);
  convergence->add_option("--per-batch", req.per_batch, "Paths per batch L")->default_val(100);
  convergence->add_flag("--sup-error", req.sup_error, "Sup-over-time error instead of endpoint");
  convergence->add_option("--floor-factor", req.floor_factor,
                          "Exclude rungs with error below this multiple of the reference floor "
                          "(0 disables)")
      ->default_val(10.0);

  auto* mean = app.add_subcommand("mean-reversion", "Monte Carlo mean against the closed form");
  add_common(mean);
  add_run(mean);
  mean->add_option("--paths", req.paths, "Number of paths")->default_val(10000);
  mean->add_option("--t-multiplier", req.t_multiplier, "Run to T = multiplier * horizon")
      ->default_val(1.0);

  auto* moments = app.add_subcommand("moments", "Sup-over-time moment estimates");
  add_common(moments);
  add_run(moments);
  moments->add_option("--paths", req.paths, "Number of paths")->default_val(10000);
  moments->add_option("--p", orders, "Moment orders, comma separated")->default_val("1,2,4");

  auto* audit = app.add_subcommand("audit", "Count negative values and clamps over many paths");
  add_common(audit);
  add_run(audit);
  audit->add_option("--paths", req.paths, "Number of paths")->default_val(10000);
  audit->add_option("--scheme", req.scheme, "jasdm or em")->check(CLI::IsMember({"jasdm", "em"}));

  auto* rerun = app.add_subcommand("rerun", "Replay a run from its manifest.json");
  rerun->add_option("--manifest", manifest_path, "Path to manifest.json")->required();
  rerun->add_option("--out", out_override, "Output directory (default: the recorded one)");
  rerun->add_option("--threads", threads_override, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kIoOrConfigError;
  }

  try {
    if (rerun->parsed()) {
      std::ifstream in(manifest_path);
      if (!in) throw std::ios_base::failure("cannot read manifest '" + manifest_path + "'");
      StudyRequest replay = request_from_json(json::parse(in));
      if (out_override) replay.out_dir = *out_override;
      if (threads_override) replay.threads = *threads_override;
      return run_request(replay, out, err);
    }
    for (auto* sub : app.get_subcommands()) req.subcommand = sub->get_name();
    if (!exponents.empty()) req.delta_exponents = parse_exponent_list(exponents);
    if (!orders.empty()) {
      req.moment_orders.clear();
      std::stringstream ss(orders);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) req.moment_orders.push_back(std::stod(item));
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoOrConfigError;
  }
  return run_request(req, out, err);
}

}  // namespace jasdm::cli
