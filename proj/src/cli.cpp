#include "vlp/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vlp/calibration.hpp"
#include "vlp/errors.hpp"
#include "vlp/gp.hpp"
#include "vlp/io.hpp"
#include "vlp/localization.hpp"
#include "vlp/simulation.hpp"
#include "vlp/verify.hpp"

namespace vlp {

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open output file '" + path + "'");
  f << text;
  if (!f) throw ValidationError("failed writing output file '" + path + "'");
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
  } else {
    write_file(out_path, text);
  }
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> methods;
  for (const auto& n : names) {
    const Method m = parse_method(n);
    for (Method seen : methods) {
      if (seen == m) throw ValidationError("method '" + n + "' listed twice");
    }
    methods.push_back(m);
  }
  if (methods.empty()) throw ValidationError("no methods given");
  return methods;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ValidationError("--grid expects LO:HI:STEP, got '" + spec + "'");
    }
    if (used != item.size()) throw ValidationError("--grid expects LO:HI:STEP, got '" + spec + "'");
    parts.push_back(v);
  }
  if (parts.size() != 3) throw ValidationError("--grid expects LO:HI:STEP, got '" + spec + "'");
  const double lo = parts[0], hi = parts[1], step = parts[2];
  if (!(lo > 0.0) || !(hi >= lo) || !(step > 0.0) || !std::isfinite(hi)) {
    throw ValidationError("--grid needs 0 < LO <= HI and STEP > 0");
  }
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  if (count > 10000000) throw ValidationError("--grid has too many points");
  std::vector<double> radii;
  radii.reserve(count);
  for (std::size_t k = 0; k < count; ++k) radii.push_back(lo + static_cast<double>(k) * step);
  return radii;
}

std::vector<LedCalibration> load_calibrations(const std::vector<std::string>& paths) {
  std::vector<LedCalibration> cals;
  cals.reserve(paths.size());
  for (const auto& p : paths) cals.push_back(io::parse_calibration(p));
  return cals;
}

struct SubsetArgs {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> size;

  /// Row indices selected from a table of n rows; all rows when no subset was requested.
  std::vector<std::size_t> select(std::size_t n) const {
    if (seed.has_value() != size.has_value()) {
      throw ValidationError("--subset-seed and --subset-size must be given together");
    }
    if (!size) {
      std::vector<std::size_t> all(n);
      for (std::size_t i = 0; i < n; ++i) all[i] = i;
      return all;
    }
    if (*size == 0 || *size > n) {
      throw ValidationError("--subset-size must be in [1, " + std::to_string(n) + "]");
    }
    return seeded_subset(n, *size, *seed);
  }
};

io::MeasurementTable take_rows(const io::MeasurementTable& table, const std::vector<std::size_t>& rows) {
  io::MeasurementTable sub;
  sub.led_count = table.led_count;
  for (std::size_t r : rows) sub.records.push_back(table.records[r]);
  return sub;
}

struct PlanArgs {
  double height = 0.0;
  int count = 0;
  double phase = 0.0;
  std::string out;
};

struct CalibrateArgs {
  std::string data;
  std::size_t led_index = 0;
  double led_x = 0.0, led_y = 0.0, led_z = 0.0;
  SubsetArgs subset;
  std::string out;
};

struct LocalizeArgs {
  std::vector<std::string> calib;
  std::vector<double> rss;
  std::string method;
  std::string data;
  SubsetArgs subset;
  bool freeze_weights = false;
  int max_iters = SolverOptions{}.max_iters;
  bool strict = false;
  std::string out;
};

struct CrlbArgs {
  std::vector<std::string> calib;
  std::vector<double> at;
  bool no_variance_term = false;
  std::string out;
};

struct SweepArgs {
  double height = 0.0;
  int count = 0;
  double sigma2 = 0.0;
  std::string grid;
  std::string out;
};

struct SimulateArgs {
  std::string scenario;
  std::vector<std::string> methods{"wls", "gp", "multilateration"};
  std::optional<std::size_t> training_size;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string data;
  std::size_t draws = 50;
  bool no_crlb = false;
  std::string out;
};

struct VerifyArgs {
  std::string suite;
  std::uint64_t seed = 1;
  double scale = 1.0;
  std::string out;
};

int do_plan(const PlanArgs& a, std::ostream& out) {
  const auto plan = plan_optimal_points(a.height, a.count, a.phase);
  std::ostringstream s;
  io::write_plan_csv(s, plan);
  emit(s.str(), a.out, out);
  return 0;
}

int do_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const auto table = io::parse_measurements(a.data);
  if (a.led_index >= table.led_count) {
    throw ValidationError("--led-index " + std::to_string(a.led_index) + " out of range; file has " +
                          std::to_string(table.led_count) + " LED columns");
  }
  const auto sub = take_rows(table, a.subset.select(table.records.size()));
  const auto set = io::calibration_set_from(sub, a.led_index, Vec3{a.led_x, a.led_y, a.led_z});
  const auto cal = calibrate(set);
  emit(io::serialize_calibration(cal, static_cast<int>(a.led_index)) + "\n", a.out, out);
  return 0;
}

int do_localize(const LocalizeArgs& a, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(a.method);
  LocalizationProblem problem;
  problem.calibrations = load_calibrations(a.calib);
  problem.rss = Eigen::Map<const Eigen::VectorXd>(a.rss.data(), static_cast<Eigen::Index>(a.rss.size()));
  if (problem.rss.size() != static_cast<Eigen::Index>(problem.calibrations.size())) {
    throw ValidationError("--rss has " + std::to_string(problem.rss.size()) + " values but " +
                          std::to_string(problem.calibrations.size()) + " calibration files were given");
  }
  problem.validate();
  if (method != Method::gp && !a.data.empty()) throw ValidationError("--data is only used with --method gp");

  PositionEstimate est;
  if (method == Method::weighted_ls) {
    SolverOptions opt;
    opt.freeze_weights = a.freeze_weights;
    if (a.max_iters < 0) throw ValidationError("--max-iters must be non-negative");
    opt.max_iters = a.max_iters;
    est = solve_weighted_ls(problem, opt);
  } else if (method == Method::multilateration) {
    est = multilaterate(problem);
  } else {
    if (a.data.empty()) throw ValidationError("--method gp needs training data via --data");
    const auto table = io::parse_measurements(a.data);
    if (table.led_count != problem.led_count()) {
      throw ValidationError("training data has " + std::to_string(table.led_count) + " RSS columns, expected " +
                            std::to_string(problem.led_count()));
    }
    const auto rows = a.subset.select(table.records.size());
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.led_count));
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& rec = table.records[rows[i]];
      inputs.row(static_cast<Eigen::Index>(i)) = rec.rss.transpose();
      targets(static_cast<Eigen::Index>(i), 0) = rec.x;
      targets(static_cast<Eigen::Index>(i), 1) = rec.y;
    }
    const auto model = gp_fit(inputs, targets);
    est.xy = gp_predict(model, problem.rss);
    est.method = Method::gp;
    est.converged = true;
  }
  if (!est.converged) {
    err << "warning: solver did not converge after " << est.iterations << " iterations\n";
    if (a.strict) return 2;
  }
  std::ostringstream s;
  io::write_estimate_csv(s, est);
  emit(s.str(), a.out, out);
  return 0;
}

int do_crlb(const CrlbArgs& a, std::ostream& out) {
  if (a.at.size() != 2) throw ValidationError("--at expects X,Y");
  LocalizationProblem problem;
  problem.calibrations = load_calibrations(a.calib);
  problem.rss = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.calibrations.size()));
  FimOptions opt;
  opt.include_variance_term = !a.no_variance_term;
  const Vec3 pos{a.at[0], a.at[1], 0.0};
  const auto report = crlb_xy(problem, pos, opt);
  emit(io::serialize_crlb(report, pos) + "\n", a.out, out);
  return 0;
}

int do_sweep(const SweepArgs& a, std::ostream& out) {
  const auto radii = a.grid.empty() ? default_sweep_grid(a.height) : parse_grid(a.grid);
  const auto curve = radius_sweep(a.height, a.count, a.sigma2, radii);
  std::ostringstream s;
  io::write_sweep_csv(s, curve);
  emit(s.str(), a.out, out);
  return 0;
}

int do_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.threads < 1) throw ValidationError("--threads must be at least 1");
  const Scenario scenario = a.scenario.empty() ? default_scenario() : io::parse_scenario(a.scenario);
  const auto methods = parse_methods(a.methods);

  if (!a.data.empty()) {
    const auto table = io::parse_measurements(a.data);
    if (table.led_count != scenario.leds.size()) {
      throw ValidationError("dataset has " + std::to_string(table.led_count) + " RSS columns but the scenario has " +
                            std::to_string(scenario.leds.size()) + " LEDs");
    }
    std::vector<Vec3> positions;
    for (const auto& led : scenario.leds) positions.push_back(led.position);
    ReplayConfig cfg;
    cfg.methods = methods;
    cfg.training_size = a.training_size.value_or(9);
    cfg.draws = a.draws;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    const auto report = run_dataset_replay(table.records, positions, cfg);
    std::ostringstream stats, draws;
    io::write_replay_stats_csv(stats, report);
    io::write_replay_draws_csv(draws, report);
    if (a.out.empty()) {
      out << stats.str() << '\n' << draws.str();
    } else {
      write_file(a.out + "_stats.csv", stats.str());
      write_file(a.out + "_draws.csv", draws.str());
    }
    return 0;
  }

  ExperimentConfig cfg;
  cfg.methods = methods;
  cfg.training_size = a.training_size.value_or(0);
  cfg.trials = a.trials;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  cfg.compute_crlb = !a.no_crlb;
  const auto report = run_localization_experiment(scenario, cfg);
  std::ostringstream stats, cdf;
  io::write_experiment_stats_csv(stats, report);
  io::write_experiment_cdf_csv(cdf, report);
  if (a.out.empty()) {
    out << stats.str() << '\n' << cdf.str();
  } else {
    std::ostringstream points;
    io::write_experiment_points_csv(points, report);
    write_file(a.out + "_stats.csv", stats.str());
    write_file(a.out + "_cdf.csv", cdf.str());
    write_file(a.out + "_points.csv", points.str());
  }
  return 0;
}

int do_verify(const VerifyArgs& a, std::ostream& out) {
  if (!(a.scale > 0.0) || a.scale > 1.0) throw ValidationError("--scale must be in (0, 1]");
  const auto report = run_verify_suite(a.suite, a.seed, a.scale);
  std::ostringstream s;
  s << "suite,check,measured,expected,tolerance,result\n";
  for (const auto& c : report.checks) {
    s << report.suite << ',' << c.name << ',' << io::format_double(c.measured) << ','
      << io::format_double(c.expected) << ',' << io::format_double(c.tolerance) << ','
      << (c.passed ? "PASS" : "FAIL") << '\n';
  }
  s << report.suite << ",overall,,,," << (report.passed() ? "PASS" : "FAIL") << '\n';
  emit(s.str(), a.out, out);
  return report.passed() ? 0 : 2;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal LED tilt and gain calibration and RSS localization"};
  app.name("vlpcal");
  app.require_subcommand(1);

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "Optimal calibration points on a circle under the LED");
  plan_cmd->add_option("--height", plan.height, "LED height above the ground plane [m]")->required();
  plan_cmd->add_option("--count", plan.count, "Number of calibration points")->required();
  plan_cmd->add_option("--phase", plan.phase, "Angular offset of the first point [rad]");
  plan_cmd->add_option("--out", plan.out, "Write CSV here instead of stdout");

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Estimate one LED's tilt and gain from a measurement file");
  cal_cmd->add_option("--data", cal.data, "Measurement CSV")->required();
  cal_cmd->add_option("--led-index", cal.led_index, "0-based RSS column")->required();
  cal_cmd->add_option("--led-x", cal.led_x, "LED x [m]")->required();
  cal_cmd->add_option("--led-y", cal.led_y, "LED y [m]")->required();
  cal_cmd->add_option("--led-z", cal.led_z, "LED z [m]")->required();
  cal_cmd->add_option("--subset-seed", cal.subset.seed, "Seed for a random row subset");
  cal_cmd->add_option("--subset-size", cal.subset.size, "Number of rows in the subset");
  cal_cmd->add_option("--out", cal.out, "Write JSON here instead of stdout");

  LocalizeArgs loc;
  auto* loc_cmd = app.add_subcommand("localize", "Estimate a ground position from one RSS vector");
  loc_cmd->add_option("--calib", loc.calib, "Calibration JSON files, one per LED")->required()->expected(1, -1);
  loc_cmd->add_option("--rss", loc.rss, "Comma-separated RSS values in LED order")->required()->delimiter(',');
  loc_cmd->add_option("--method", loc.method, "wls, multilateration or gp")
      ->required()
      ->check(CLI::IsMember({"wls", "weighted_ls", "multilateration", "gp"}));
  loc_cmd->add_option("--data", loc.data, "Training measurements for --method gp");
  loc_cmd->add_option("--subset-seed", loc.subset.seed, "Seed for a random training subset");
  loc_cmd->add_option("--subset-size", loc.subset.size, "Number of training rows");
  loc_cmd->add_flag("--freeze-weights", loc.freeze_weights, "Evaluate noise weights once at the start point");
  loc_cmd->add_option("--max-iters", loc.max_iters, "Iteration cap for the weighted LS solver");
  loc_cmd->add_flag("--strict", loc.strict, "Exit 2 when the solver does not converge");
  loc_cmd->add_option("--out", loc.out, "Write CSV here instead of stdout");

  CrlbArgs crlb;
  auto* crlb_cmd = app.add_subcommand("crlb", "Cramer-Rao bound on the ground-position error");
  crlb_cmd->add_option("--calib", crlb.calib, "Calibration JSON files, one per LED")->required()->expected(1, -1);
  crlb_cmd->add_option("--at", crlb.at, "Ground position X,Y")->required()->delimiter(',');
  crlb_cmd->add_flag("--no-variance-term", crlb.no_variance_term, "Drop the noise-variance information term");
  crlb_cmd->add_option("--out", crlb.out, "Write JSON here instead of stdout");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-radius", "Calibration sum MSE against circle radius");
  sweep_cmd->add_option("--height", sweep.height, "LED height [m]")->required();
  sweep_cmd->add_option("--count", sweep.count, "Number of calibration points")->required();
  sweep_cmd->add_option("--sigma2", sweep.sigma2, "Noise variance")->required();
  sweep_cmd->add_option("--grid", sweep.grid, "Radii LO:HI:STEP in meters (default 0.05h to 1.5h by 0.01h)");
  sweep_cmd->add_option("--out", sweep.out, "Write CSV here instead of stdout");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo localization experiment or dataset replay");
  sim_cmd->add_option("--scenario", sim.scenario, "Scenario JSON (default: built-in 4-LED room)");
  sim_cmd->add_option("--methods", sim.methods, "Comma-separated methods")->delimiter(',');
  sim_cmd->add_option("--training-size", sim.training_size, "Training points used (default: all, or 9 with --data)");
  sim_cmd->add_option("--trials", sim.trials, "Noise realizations per trajectory point");
  sim_cmd->add_option("--seed", sim.seed, "Master seed");
  sim_cmd->add_option("--threads", sim.threads, "Worker threads");
  sim_cmd->add_option("--data", sim.data, "Replay this measurement file instead of simulating");
  sim_cmd->add_option("--draws", sim.draws, "Random training subsets for --data");
  sim_cmd->add_flag("--no-crlb", sim.no_crlb, "Skip the per-point bound");
  sim_cmd->add_option("--out", sim.out, "Output prefix; writes PREFIX_stats.csv and companions");

  VerifyArgs ver;
  auto* ver_cmd = app.add_subcommand("verify", "Monte Carlo checks of the calibration estimator");
  ver_cmd->add_option("--suite", ver.suite, "prop1, prop2, prop3 or theorem1")
      ->required()
      ->check(CLI::IsMember({"prop1", "prop2", "prop3", "theorem1"}));
  ver_cmd->add_option("--seed", ver.seed, "Seed");
  ver_cmd->add_option("--scale", ver.scale, "Fraction of the full trial count, in (0, 1]");
  ver_cmd->add_option("--out", ver.out, "Write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (plan_cmd->parsed()) return do_plan(plan, out);
    if (cal_cmd->parsed()) return do_calibrate(cal, out);
    if (loc_cmd->parsed()) return do_localize(loc, out, err);
    if (crlb_cmd->parsed()) return do_crlb(crlb, out);
    if (sweep_cmd->parsed()) return do_sweep(sweep, out);
    if (sim_cmd->parsed()) return do_simulate(sim, out);
    if (ver_cmd->parsed()) return do_verify(ver, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace vlp
