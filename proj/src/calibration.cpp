#include "vlp/calibration.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "vlp/errors.hpp"

namespace vlp {

namespace {

constexpr double kGroundTol = 1e-12;

void check_invertible(const Mat3& ggt) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(ggt, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  if (!(top > 0.0) || !ggt.allFinite()) {
    throw SingularGeometryError("calibration Gram matrix is zero or non-finite");
  }
  int rank = 0;
  for (int i = 0; i < 3; ++i) {
    if (lambda[i] > top / kSingularConditionLimit) ++rank;
  }
  if (rank < 3) {
    throw SingularGeometryError("calibration geometry has rank " + std::to_string(rank) +
                                " < 3 (condition number above 1e12; are the points collinear?)");
  }
}

}  // namespace

Eigen::VectorXd CalibrationSet::rss() const {
  Eigen::VectorXd s(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) s[static_cast<Eigen::Index>(i)] = samples[i].rss;
  return s;
}

void CalibrationSet::validate() const {
  if (samples.size() < 3) {
    throw ContractViolation("calibration needs at least 3 samples, got " + std::to_string(samples.size()));
  }
  if (!led_position.allFinite() || !(led_position.z() > 0.0)) {
    throw ContractViolation("LED must sit above the ground plane");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.pd_position.allFinite() || !std::isfinite(s.rss)) {
      throw ContractViolation("calibration sample " + std::to_string(i) + " is not finite");
    }
    if (std::abs(s.pd_position.z()) > kGroundTol) {
      throw ContractViolation("calibration sample " + std::to_string(i) + " is off the ground plane");
    }
  }
}

std::vector<Vec3> CalibrationPlan::world_points(const Vec2& led_xy) const {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.emplace_back(p.x() + led_xy.x(), p.y() + led_xy.y(), 0.0);
  return out;
}

Vec3 gram_column(const Vec3& led_position, const Vec3& pd_position) {
  // LED-centred frame: d = r_R - r_S is translation invariant, h is the LED height above the PD.
  const Vec3 d = pd_position - led_position;
  const double h = -d.z();
  const double d2 = d.squaredNorm();
  if (!(d2 > 0.0)) throw DomainError("PD coincides with LED");
  return (h / (d2 * d2)) * d;
}

GramSystem build_gram(const Vec3& led_position, std::span<const Vec3> pd_positions) {
  if (pd_positions.size() < 3) {
    throw ContractViolation("calibration needs at least 3 samples, got " +
                            std::to_string(pd_positions.size()));
  }
  if (!(led_position.z() > 0.0)) throw ContractViolation("LED must sit above the ground plane");
  GramSystem gram;
  gram.g.resize(3, static_cast<Eigen::Index>(pd_positions.size()));
  for (std::size_t n = 0; n < pd_positions.size(); ++n) {
    if (std::abs(pd_positions[n].z()) > kGroundTol) {
      throw ContractViolation("calibration point " + std::to_string(n) + " is off the ground plane");
    }
    gram.g.col(static_cast<Eigen::Index>(n)) = gram_column(led_position, pd_positions[n]);
  }
  gram.ggt = gram.g * gram.g.transpose();
  check_invertible(gram.ggt);
  return gram;
}

GramSystem build_gram(const CalibrationSet& set) {
  set.validate();
  std::vector<Vec3> positions;
  positions.reserve(set.size());
  for (const auto& s : set.samples) positions.push_back(s.pd_position);
  return build_gram(set.led_position, positions);
}

Vec3 estimate_c_vector(const GramSystem& gram, const Eigen::Ref<const Eigen::VectorXd>& rss) {
  if (rss.size() != gram.g.cols()) throw ContractViolation("RSS vector length does not match G");
  check_invertible(gram.ggt);
  return gram.ggt.ldlt().solve(gram.g * rss);
}

TiltGain decompose(const Vec3& c_vec) {
  const double norm = c_vec.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw DegenerateEstimateError("c-vector is zero; calibration failed");
  }
  return {c_vec / norm, norm};
}

double estimate_noise_variance(const GramSystem& gram, const Eigen::Ref<const Eigen::VectorXd>& rss,
                               const Vec3& c_vec) {
  if (rss.size() != gram.g.cols()) throw ContractViolation("RSS vector length does not match G");
  const Eigen::VectorXd residual = rss - gram.g.transpose() * c_vec;
  return residual.squaredNorm() / static_cast<double>(rss.size());
}

Mat3 calibration_covariance(const GramSystem& gram, double sigma2) {
  check_invertible(gram.ggt);
  return sigma2 * gram.ggt.inverse();
}

double calibration_sum_mse(const GramSystem& gram, double sigma2) {
  return calibration_covariance(gram, sigma2).trace();
}

double optimal_radius(double h) {
  if (!(h > 0.0)) throw DomainError("LED height must be positive");
  return std::sqrt((std::sqrt(13.0) - 3.0) / 2.0) * h;
}

double optimal_sum_mse(double h, int count, double sigma2) {
  const double r = optimal_radius(h);
  const double q = h * h + r * r;
  return sigma2 * std::pow(q, 4) / (count * h * h) * (4.0 / (r * r) + 1.0 / (h * h));
}

CalibrationPlan plan_circle_points(double h, int count, double phase, double radius) {
  if (!(h > 0.0)) throw DomainError("LED height must be positive");
  if (count < 3) throw ContractViolation("an evenly spaced plan needs N >= 3");
  if (!(radius > 0.0)) throw DomainError("plan radius must be positive");
  CalibrationPlan plan{h, count, phase, radius, {}};
  plan.points.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    const double a = 2.0 * std::numbers::pi * n / count + phase;
    plan.points.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  return plan;
}

CalibrationPlan plan_optimal_points(double h, int count, double phase) {
  if (count < 3) throw ContractViolation("an evenly spaced plan needs N >= 3");
  return plan_circle_points(h, count, phase, optimal_radius(h));
}

std::vector<SweepPoint> radius_sweep(double h, int count, double sigma2, std::span<const double> radii) {
  std::vector<SweepPoint> curve;
  curve.reserve(radii.size());
  const Vec3 led{0.0, 0.0, h};
  for (double r : radii) {
    if (!(r > 0.0)) throw DomainError("sweep radii must be positive");
    const auto plan = plan_circle_points(h, count, 0.0, r);
    curve.push_back({r, calibration_sum_mse(build_gram(led, plan.points), sigma2)});
  }
  return curve;
}

std::vector<double> default_sweep_grid(double h) {
  std::vector<double> grid;
  for (int k = 5; k <= 150; ++k) grid.push_back(k * 0.01 * h);
  return grid;
}

double fit_no_tilt_gain(const CalibrationSet& set) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& s : set.samples) {
    const Vec3 d = s.pd_position - set.led_position;
    const double h = -d.z();
    const double d2 = d.squaredNorm();
    const double a = h * h / (d2 * d2);
    num += a * s.rss;
    den += a * a;
  }
  return den > 0.0 ? num / den : 0.0;
}

LedCalibration calibrate(const CalibrationSet& set) {
  const GramSystem gram = build_gram(set);
  const Eigen::VectorXd s = set.rss();
  LedCalibration cal;
  cal.led_position = set.led_position;
  cal.c_vec = estimate_c_vector(gram, s);
  const auto [normal, gain] = decompose(cal.c_vec);
  cal.normal_hat = normal;
  cal.gain_hat = gain;
  cal.sigma2_hat = estimate_noise_variance(gram, s, cal.c_vec);
  cal.ggt = gram.ggt;
  cal.ggt_inverse = gram.ggt.inverse();
  cal.sample_count = set.size();
  cal.no_tilt_gain = fit_no_tilt_gain(set);
  return cal;
}

}  // namespace vlp
