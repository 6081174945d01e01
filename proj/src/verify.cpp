#include "vlp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vlp/calibration.hpp"
#include "vlp/errors.hpp"
#include "vlp/rng.hpp"
#include "vlp/simulation.hpp"

namespace vlp {

namespace {

constexpr double kHeight = 4.0;
constexpr int kCount = 5;

LedGroundTruth reference_led() { return LedGroundTruth::from_tilt(Vec3{0.0, 0.0, kHeight}, 1.6, 30.0); }

std::size_t scaled(double base, double scale) {
  return std::max<std::size_t>(1000, static_cast<std::size_t>(std::llround(base * scale)));
}

VerifyCheck within(std::string name, double measured, double expected, double tol) {
  return {std::move(name), measured, expected, tol, std::abs(measured - expected) <= tol};
}

VerifyCheck at_most(std::string name, double measured, double bound) {
  return {std::move(name), measured, bound, 0.0, measured <= bound};
}

void prop1(VerifyReport& rep, std::uint64_t seed, double scale) {
  const auto plan = plan_optimal_points(kHeight, kCount);
  CalibrationMcOptions opt;
  opt.trials = scaled(1e5, scale);
  opt.sigmas = {1e-4};
  opt.seed = seed;
  const auto row = run_calibration_mc(reference_led(), plan, opt).rows.front();
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double scale_ij = std::sqrt(row.theoretical_cov(i, i) * row.theoretical_cov(j, j));
      worst = std::max(worst, std::abs(row.empirical_cov(i, j) - row.theoretical_cov(i, j)) / scale_ij);
    }
  }
  rep.checks.push_back(at_most("covariance_max_rel_dev", worst, 0.05));
  const double root_t = std::sqrt(static_cast<double>(row.trials));
  for (int i = 0; i < 3; ++i) {
    const double bias = std::abs(row.mean_c_vec[i] - row.true_c_vec[i]);
    rep.checks.push_back(at_most("bias_c" + std::to_string(i), bias, 4.0 * row.c_vec_std[i] / root_t));
  }
  rep.checks.push_back(within("sum_mse_ratio", row.empirical_sum_mse / row.theoretical_sum_mse, 1.0, 0.05));
}

void bias_slope(VerifyReport& rep, std::uint64_t seed, double scale, bool normal) {
  const auto plan = plan_optimal_points(kHeight, kCount);
  CalibrationMcOptions opt;
  opt.trials = scaled(1e4, scale);
  opt.sigmas = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
  opt.seed = seed;
  opt.antithetic = true;
  const auto report = run_calibration_mc(reference_led(), plan, opt);
  std::vector<double> bias;
  for (const auto& row : report.rows) bias.push_back(normal ? row.normal_bias.norm() : std::abs(row.gain_bias));
  rep.checks.push_back(within(normal ? "normal_bias_slope" : "gain_bias_slope", loglog_slope(opt.sigmas, bias), 2.0, 0.3));
}

void theorem1(VerifyReport& rep, std::uint64_t seed, double scale) {
  const double sigma = 1e-3;
  const double s2 = sigma * sigma;
  const auto grid = default_sweep_grid(kHeight);
  const auto curve = radius_sweep(kHeight, kCount, s2, grid);
  const auto best = *std::min_element(curve.begin(), curve.end(),
                                      [](const SweepPoint& a, const SweepPoint& b) { return a.sum_mse < b.sum_mse; });
  const double rstar = optimal_radius(kHeight);
  rep.checks.push_back(within("argmin_radius_over_rstar", best.radius / rstar, 1.0, 0.02));
  const double reported = 40.94 * s2 * std::pow(kHeight, 4) / kCount;
  rep.checks.push_back(within("min_sum_mse_over_40.94", best.sum_mse / reported, 1.0, 0.005));

  for (double frac : {0.2, 0.4, 0.55, 0.9, 1.3}) {
    const auto plan = plan_circle_points(kHeight, kCount, 0.0, frac * kHeight);
    CalibrationMcOptions opt;
    opt.trials = scaled(2e4, scale);
    opt.sigmas = {sigma};
    opt.seed = seed;
    const auto row = run_calibration_mc(reference_led(), plan, opt).rows.front();
    rep.checks.push_back(within("mc_over_analytic_r=" + std::to_string(frac).substr(0, 4) + "h",
                                row.empirical_sum_mse / row.theoretical_sum_mse, 1.0, 0.05));
  }

  const Vec3 led{0.0, 0.0, kHeight};
  const auto planned = build_gram(led, plan_optimal_points(kHeight, kCount).points);
  const double tr = planned.ggt.trace();
  double off = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != j) off = std::max(off, std::abs(planned.ggt(i, j)));
    }
  }
  rep.checks.push_back(at_most("offdiag_over_trace", off / tr, 1e-12));
  rep.checks.push_back(at_most("diag01_rel_diff",
                               std::abs(planned.ggt(0, 0) - planned.ggt(1, 1)) / planned.ggt(0, 0), 1e-12));

  const double planned_mse = calibration_sum_mse(planned, s2);
  double best_random = std::numeric_limits<double>::infinity();
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    std::vector<Vec3> pts;
    for (int n = 0; n < kCount; ++n) {
      const auto k = rng::stream_index({seed, trial, static_cast<std::uint64_t>(n)});
      const double r = 3.0 * kHeight * std::sqrt(rng::uniform(seed, k, 0));
      const double a = 2.0 * std::numbers::pi * rng::uniform(seed, k, 1);
      pts.emplace_back(r * std::cos(a), r * std::sin(a), 0.0);
    }
    try {
      best_random = std::min(best_random, calibration_sum_mse(build_gram(led, pts), s2));
    } catch (const SingularGeometryError&) {
    }
  }
  rep.checks.push_back({"random_min_over_planned", best_random / planned_mse, 1.0, 1e-9,
                        best_random >= planned_mse * (1.0 - 1e-9)});
}

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
}

VerifyReport run_verify_suite(const std::string& suite, std::uint64_t seed, double scale) {
  VerifyReport rep{suite, {}};
  if (suite == "prop1") {
    prop1(rep, seed, scale);
  } else if (suite == "prop2") {
    bias_slope(rep, seed, scale, true);
  } else if (suite == "prop3") {
    bias_slope(rep, seed, scale, false);
  } else if (suite == "theorem1") {
    theorem1(rep, seed, scale);
  } else {
    throw ValidationError("unknown verification suite '" + suite + "'");
  }
  return rep;
}

}  // namespace vlp
