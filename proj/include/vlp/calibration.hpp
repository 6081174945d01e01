#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vlp/channel.hpp"

namespace vlp {

/// One PD reading taken on the ground plane during calibration.
struct CalibrationSample {
  Vec3 pd_position = Vec3::Zero();
  double rss = 0.0;
};

/// Ground-plane readings for a single LED.
struct CalibrationSet {
  Vec3 led_position = Vec3::Zero();
  std::vector<CalibrationSample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  Eigen::VectorXd rss() const;
  /// Throws ContractViolation when the set cannot be used for calibration.
  void validate() const;
};

/// Geometry matrix G (3 x N, column n = h/d_n^4 * d_n) and its Gram matrix G*G^T.
struct GramSystem {
  Eigen::Matrix<double, 3, Eigen::Dynamic> g;
  Mat3 ggt = Mat3::Zero();
};

/// Per-LED calibration result; `ggt_inverse` weights the localization residuals.
struct LedCalibration {
  Vec3 led_position = Vec3::Zero();
  Vec3 c_vec = Vec3::Zero();
  Vec3 normal_hat{0.0, 0.0, -1.0};
  double gain_hat = 0.0;
  double sigma2_hat = 0.0;
  Mat3 ggt = Mat3::Identity();
  Mat3 ggt_inverse = Mat3::Identity();
  std::size_t sample_count = 0;
  /// Gain refit under the zero-tilt model s = c*h^2/d^4; used only by multilateration.
  double no_tilt_gain = 0.0;

  double height() const noexcept { return led_position.z(); }
};

struct CalibrationPlan {
  double led_height = 0.0;
  int count = 0;
  double phase = 0.0;
  double radius = 0.0;
  /// LED-centred ground coordinates (LED projection at the origin).
  std::vector<Vec3> points;

  /// Plan points translated under an LED at `led_xy`.
  std::vector<Vec3> world_points(const Vec2& led_xy) const;
};

/// Condition number of G*G^T above which a geometry counts as singular.
inline constexpr double kSingularConditionLimit = 1e12;

/// Column g_n for one PD position.
Vec3 gram_column(const Vec3& led_position, const Vec3& pd_position);

GramSystem build_gram(const CalibrationSet& set);
GramSystem build_gram(const Vec3& led_position, std::span<const Vec3> pd_positions);

/// Least-squares c-vector (G G^T)^{-1} G s.
Vec3 estimate_c_vector(const GramSystem& gram, const Eigen::Ref<const Eigen::VectorXd>& rss);

struct TiltGain {
  Vec3 normal;
  double gain;
};

/// Splits the c-vector into its direction (LED normal) and norm (gain).
TiltGain decompose(const Vec3& c_vec);

/// Maximum-likelihood noise variance (1/N)*||s - G^T c||^2. No small-sample correction.
double estimate_noise_variance(const GramSystem& gram, const Eigen::Ref<const Eigen::VectorXd>& rss,
                               const Vec3& c_vec);

Mat3 calibration_covariance(const GramSystem& gram, double sigma2);
double calibration_sum_mse(const GramSystem& gram, double sigma2);

/// sqrt((sqrt(13) - 3) / 2) * h, the radius minimizing the calibration sum MSE.
double optimal_radius(double h);

/// Closed-form minimum sum MSE: sigma2 * (h^2+r*^2)^4 / (N h^2) * (4/r*^2 + 1/h^2).
double optimal_sum_mse(double h, int count, double sigma2);

/// N points evenly spaced on a ground circle of the given radius, starting at `phase`.
CalibrationPlan plan_circle_points(double h, int count, double phase, double radius);

/// The optimal plan: plan_circle_points at optimal_radius(h).
CalibrationPlan plan_optimal_points(double h, int count, double phase = 0.0);

struct SweepPoint {
  double radius;
  double sum_mse;
};

std::vector<SweepPoint> radius_sweep(double h, int count, double sigma2, std::span<const double> radii);

/// Default sweep grid 0.05h .. 1.5h in steps of 0.01h (146 radii).
std::vector<double> default_sweep_grid(double h);

/// Full per-LED pipeline: Gram system, c-vector, tilt/gain split, noise variance.
LedCalibration calibrate(const CalibrationSet& set);

/// LS fit of c in s = c*h^2/d^4 (zero-tilt model).
double fit_no_tilt_gain(const CalibrationSet& set);

}  // namespace vlp
