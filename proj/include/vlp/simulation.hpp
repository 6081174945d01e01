#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlp/calibration.hpp"
#include "vlp/channel.hpp"
#include "vlp/gp.hpp"
#include "vlp/localization.hpp"
#include "vlp/records.hpp"

namespace vlp {

/// Axis-aligned floor area.
struct RoomBounds {
  double x_min = -4.0;
  double y_min = 0.0;
  double width = 8.0;
  double depth = 8.0;

  bool contains(const Vec2& p, double tol = 1e-9) const;
  bool operator==(const RoomBounds&) const = default;
};

struct Scenario {
  RoomBounds room;
  std::vector<LedGroundTruth> leds;
  /// One entry per LED.
  std::vector<NoiseSpec> noise;
  std::vector<Vec2> trajectory;
  std::vector<Vec2> training_points;
  std::uint64_t master_seed = 0;

  /// Throws ValidationError.
  void validate() const;
};

inline constexpr std::uint64_t kDefaultScenarioSeed = 20240417;

/// Four LEDs 4 m up in an 8 m x 8 m room, tilts 1.6/2.1/3.7/3.3 deg with seeded
/// random azimuths, unit gains, sigma 1e-4.
Scenario default_scenario(std::uint64_t seed = kDefaultScenarioSeed);

/// Closed rectangular path inset from the walls, one point every `spacing` meters.
std::vector<Vec2> rectangle_loop(const RoomBounds& room, double inset, double spacing);
/// nx x ny grid spanning [lo, hi] inclusive, row-major in y.
std::vector<Vec2> uniform_grid(const Vec2& lo, const Vec2& hi, int nx, int ny);

double euclidean_error(const Vec2& estimate, const Vec2& truth);

struct ErrorStats {
  std::vector<double> per_point_errors;
  double p50 = 0.0;
  double p99 = 0.0;
  /// (error, fraction of errors <= error), one entry per sorted error.
  std::vector<std::pair<double, double>> cdf;
  std::optional<double> improvement_rate_vs;
};

/// Percentile by linear interpolation between order statistics; q in [0, 1].
double percentile_sorted(std::span<const double> sorted, double q);
ErrorStats percentiles_and_cdf(std::span<const double> errors);

/// (reference - candidate) / reference as a fraction.
double improvement_rate(double reference_ep, double candidate_ep);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Calibration Monte Carlo

struct CalibrationMcOptions {
  std::size_t trials = 100000;
  std::vector<double> sigmas{1e-4};
  std::uint64_t seed = 1;
  /// Pair each noise draw with its negation. All sigmas share the same underlying draws.
  bool antithetic = false;
};

struct CalibrationMcRow {
  double sigma = 0.0;
  std::size_t trials = 0;
  Vec3 true_c_vec = Vec3::Zero();
  Vec3 mean_c_vec = Vec3::Zero();
  Vec3 c_vec_std = Vec3::Zero();
  Mat3 empirical_cov = Mat3::Zero();
  Mat3 theoretical_cov = Mat3::Zero();
  Vec3 normal_bias = Vec3::Zero();   // E[n_hat - n]
  double gain_bias = 0.0;            // E[c_hat - c]
  double empirical_sum_mse = 0.0;    // mean ||c_hat - c||^2
  double theoretical_sum_mse = 0.0;
  double mean_sigma2_hat = 0.0;
};

struct CalibrationMcReport {
  LedGroundTruth led;
  CalibrationPlan plan;
  std::vector<CalibrationMcRow> rows;
};

/// Repeated noisy calibration of one LED from the plan's points (placed under the LED).
CalibrationMcReport run_calibration_mc(const LedGroundTruth& led, const CalibrationPlan& plan,
                                       const CalibrationMcOptions& options);
CalibrationMcReport run_calibration_mc(const Scenario& scenario, std::size_t led_index,
                                       const CalibrationPlan& plan, const CalibrationMcOptions& options);

// ---------------------------------------------------------------------------
// Localization experiments

struct ExperimentConfig {
  std::vector<Method> methods{Method::weighted_ls, Method::gp, Method::multilateration};
  /// Number of training points used; 0 means all of scenario.training_points.
  std::size_t training_size = 0;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  SolverOptions solver;
  GpHyperGrid gp_grid = GpHyperGrid::standard();
  bool compute_crlb = true;
};

struct MethodReport {
  Method method = Method::weighted_ls;
  ErrorStats stats;
  std::size_t failures = 0;
  /// Against the GP baseline, when it was run.
  std::optional<double> improvement_p50;
  std::optional<double> improvement_p99;
};

struct PointReport {
  Vec2 truth = Vec2::Zero();
  std::optional<double> crlb_xy;
  std::optional<double> crlb_xy_ground;
  /// Aligned with ExperimentReport::methods; NaN when every trial failed.
  std::vector<double> rmse;
  std::vector<double> mean_error;
};

struct ExperimentReport {
  std::vector<Method> methods;
  std::vector<MethodReport> per_method;
  std::vector<PointReport> points;
  std::vector<Vec2> training_used;
  std::size_t trials = 0;

  const MethodReport* find(Method m) const;
};

/// Calibrates from noisy training readings, then localizes every trajectory
/// point with each method, once per trial. Errors are pooled over trials and points.
ExperimentReport run_localization_experiment(const Scenario& scenario, const ExperimentConfig& config);

struct ReplayConfig {
  std::vector<Method> methods{Method::weighted_ls, Method::gp, Method::multilateration};
  std::size_t training_size = 9;
  std::size_t draws = 50;
  std::uint64_t seed = 1;
  int threads = 1;
  SolverOptions solver;
  GpHyperGrid gp_grid = GpHyperGrid::standard();
};

struct ReplayMethodSummary {
  Method method = Method::weighted_ls;
  std::vector<double> draw_p50;
  std::vector<double> draw_p99;
  double median_p50 = 0.0;
  double median_p99 = 0.0;
  std::size_t failures = 0;
  std::optional<double> improvement_p50;
  std::optional<double> improvement_p99;
};

struct ReplayReport {
  std::vector<Method> methods;
  std::vector<ReplayMethodSummary> per_method;
  /// Median over test points of the CRLB from the estimated calibration, per draw.
  std::vector<double> draw_median_crlb;
  std::size_t training_size = 0;
  std::size_t draws = 0;

  const ReplayMethodSummary* find(Method m) const;
};

/// Seeded random split of a measurement dataset: `training_size` rows calibrate
/// (and train the GP), the remaining rows are localized.
ReplayReport run_dataset_replay(std::span<const MeasurementRecord> records, std::span<const Vec3> led_positions,
                                const ReplayConfig& config);

/// Seeded subset of size k from n items without replacement (Fisher-Yates on a keyed stream).
std::vector<std::size_t> seeded_subset(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace vlp
