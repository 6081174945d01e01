#include "vlp/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "vlp/errors.hpp"
#include "vlp/rng.hpp"

namespace vlp {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kUnitTol = 1e-12;

bool is_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

Vec3 tilt_to_normal(double polar_rad, double azimuth_rad) {
  const double s = std::sin(polar_rad);
  return {s * std::cos(azimuth_rad), s * std::sin(azimuth_rad), -std::cos(polar_rad)};
}

std::pair<double, double> normal_to_tilt(const Vec3& normal) {
  const Vec3 n = normal.normalized();
  const double polar = std::acos(std::clamp(-n.z(), -1.0, 1.0));
  double azimuth = std::atan2(n.y(), n.x());
  if (azimuth < 0.0) azimuth += 2.0 * std::numbers::pi;
  return {polar, azimuth};
}

LedGroundTruth LedGroundTruth::from_tilt(const Vec3& position, double polar_deg, double azimuth_deg,
                                         double gain, double lambertian_order) {
  LedGroundTruth led;
  led.position = position;
  led.normal = tilt_to_normal(polar_deg * kDeg, azimuth_deg * kDeg);
  led.gain = gain;
  led.lambertian_order = lambertian_order;
  led.tilt_polar_deg = polar_deg;
  led.tilt_azimuth_deg = azimuth_deg;
  return led;
}

void LedGroundTruth::validate() const {
  if (!is_finite(position) || !is_finite(normal)) throw ContractViolation("LED fields must be finite");
  if (std::abs(normal.norm() - 1.0) > kUnitTol) throw ContractViolation("LED normal must be a unit vector");
  if (!(normal.z() < 0.0)) throw ContractViolation("LED normal must point toward the floor (z < 0)");
  if (!(gain > 0.0)) throw ContractViolation("LED gain must be positive");
  if (!(lambertian_order >= 1.0)) throw ContractViolation("Lambertian order must be >= 1");
  const Vec3 expected = tilt_to_normal(tilt_polar_deg * kDeg, tilt_azimuth_deg * kDeg);
  if ((expected - normal).norm() > 1e-9) {
    throw ContractViolation("LED normal disagrees with its tilt angles");
  }
}

AngleCosines cos_angles(const LedGroundTruth& led, const PdPose& pd) {
  const Vec3 d = pd.position - led.position;
  const double dist = d.norm();
  if (!(dist > 0.0)) throw DomainError("PD and LED positions coincide");
  const double cs = std::clamp(led.normal.dot(d) / dist, -1.0, 1.0);
  const double cr = std::clamp(-pd.normal.dot(d) / dist, -1.0, 1.0);
  return {cs, cr};
}

double rss_general(const LedGroundTruth& led, const PdPose& pd) {
  const auto [cs, cr] = cos_angles(led, pd);
  if (cs < 0.0 || cr < 0.0) return 0.0;
  const double d2 = (pd.position - led.position).squaredNorm();
  return led.gain / d2 * std::pow(cs, led.lambertian_order) * cr;
}

double rss_simplified(const LedGroundTruth& led, const PdPose& pd) {
  if (pd.position.z() != 0.0) throw ContractViolation("simplified model requires the PD on the ground plane");
  if ((pd.normal - Vec3::UnitZ()).norm() > kUnitTol) {
    throw ContractViolation("simplified model requires a horizontal PD (normal [0,0,1])");
  }
  const double h = led.position.z();
  if (!(h > 0.0)) throw DomainError("LED height must be positive");
  const Vec3 d = pd.position - led.position;
  const double d2 = d.squaredNorm();
  return led.gain * h / (d2 * d2) * led.normal.dot(d);
}

double add_noise(double signal, const NoiseSpec& noise, std::uint64_t stream_index) {
  if (noise.sigma == 0.0) return signal;
  return signal + noise.sigma * rng::standard_normal(noise.seed, stream_index);
}

}  // namespace vlp
