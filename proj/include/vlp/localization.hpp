#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "vlp/calibration.hpp"
#include "vlp/channel.hpp"

namespace vlp {

enum class Method { weighted_ls, multilateration, gp };

std::string_view method_name(Method m) noexcept;
/// Accepts "wls", "weighted_ls", "multilateration", "gp".
Method parse_method(std::string_view name);

/// One RSS reading per calibrated LED, PD on the ground (z = 0).
struct LocalizationProblem {
  std::vector<LedCalibration> calibrations;
  Eigen::VectorXd rss;

  std::size_t led_count() const noexcept { return calibrations.size(); }
  void validate() const;
};

struct PositionEstimate {
  Vec2 xy = Vec2::Zero();
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;
  Method method = Method::weighted_ls;
};

struct SearchRegion {
  Vec2 lo;
  Vec2 hi;
};

struct SolverOptions {
  double grad_tol = 1e-10;
  int max_iters = 200;
  /// Evaluate the noise weights once at the starting point instead of at every iterate.
  bool freeze_weights = false;
  /// Iterates may not enter this radius around an LED's ground projection.
  double proximity_guard = 0.01;
  std::optional<Vec2> initial_guess;
  /// Region for the fallback grid scan; defaults to the LED footprint padded by the max height.
  std::optional<SearchRegion> region;
  double scan_step = 0.25;
};

struct FimOptions {
  /// Include the information carried by the position dependence of the noise variance.
  bool include_variance_term = true;
};

struct CrlbReport {
  Mat3 fim = Mat3::Zero();
  Mat3 covariance_bound = Mat3::Zero();
  double crlb_xy = 0.0;
  /// Bound when z = 0 is known: inverse of the x-y block of the information matrix.
  double crlb_xy_ground = 0.0;
};

/// Calibrated mean RSS c_hat*h/d^4 * n_hat.d at a PD position.
double model_rss(const LedCalibration& cal, const Vec3& position);
/// d(model_rss)/d(position), h held fixed.
Vec3 model_rss_gradient(const LedCalibration& cal, const Vec3& position);

/// Variance of the localization residual caused by calibration noise.
double residual_error_variance(const LedCalibration& cal, const Vec3& candidate);
/// Residual calibration variance plus measurement variance.
double total_noise_variance(const LedCalibration& cal, const Vec3& candidate);
Vec3 total_noise_variance_gradient(const LedCalibration& cal, const Vec3& candidate);

double weighted_ls_objective(const LocalizationProblem& problem, const Vec2& xy);

/// Iteratively reweighted Levenberg-Marquardt on (x, y) with z pinned to 0.
/// Starts from multilateration, falling back to a coarse grid scan.
PositionEstimate solve_weighted_ls(const LocalizationProblem& problem, const SolverOptions& options = {});

/// Zero-tilt range inversion followed by the linearised circle equations.
PositionEstimate multilaterate(const LocalizationProblem& problem, std::span<const double> no_tilt_gains);
/// Overload using each calibration's `no_tilt_gain`.
PositionEstimate multilaterate(const LocalizationProblem& problem);

/// Best grid node of the weighted objective over `region`.
Vec2 grid_scan(const LocalizationProblem& problem, const SearchRegion& region, double step);

Mat3 fim(const LocalizationProblem& problem, const Vec3& position, const FimOptions& options = {});
CrlbReport crlb_xy(const LocalizationProblem& problem, const Vec3& position, const FimOptions& options = {});

}  // namespace vlp
