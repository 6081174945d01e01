#pragma once

#include <cstdint>
#include <utility>

#include <Eigen/Core>

namespace vlp {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

/// Unit normal of an LED tilted by a polar angle from straight down and
/// rotated by an azimuth about the vertical axis (both in radians).
Vec3 tilt_to_normal(double polar_rad, double azimuth_rad);

/// Inverse of tilt_to_normal: (polar, azimuth) in radians, azimuth in [0, 2pi).
std::pair<double, double> normal_to_tilt(const Vec3& normal);

/// Ground truth for one ceiling-mounted LED.
///
/// `gain` aggregates responsivity, optical power, Lambertian order and
/// detector area into a single scalar, so RSS is in dimensionless model units.
struct LedGroundTruth {
  Vec3 position = Vec3::Zero();
  Vec3 normal{0.0, 0.0, -1.0};
  double gain = 1.0;
  double lambertian_order = 1.0;
  double tilt_polar_deg = 0.0;
  double tilt_azimuth_deg = 0.0;

  static LedGroundTruth from_tilt(const Vec3& position, double polar_deg, double azimuth_deg,
                                  double gain = 1.0, double lambertian_order = 1.0);

  /// Throws ContractViolation when an invariant does not hold.
  void validate() const;
};

struct PdPose {
  Vec3 position = Vec3::Zero();
  Vec3 normal{0.0, 0.0, 1.0};

  static PdPose on_ground(double x, double y) { return {Vec3{x, y, 0.0}, Vec3{0.0, 0.0, 1.0}}; }
};

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct AngleCosines {
  double cos_phi_s;
  double cos_phi_r;
};

/// Emission and incidence cosines for the LED-to-PD ray.
AngleCosines cos_angles(const LedGroundTruth& led, const PdPose& pd);

/// Full Lambertian line-of-sight model; zero when the PD is outside either hemisphere.
double rss_general(const LedGroundTruth& led, const PdPose& pd);

/// Reduced model c*h/d^4 * n_S.d for m = 1 and a horizontal PD on the ground.
/// Not clamped: callers keep n_S.d > 0.
double rss_simplified(const LedGroundTruth& led, const PdPose& pd);

/// signal + sigma * N(0,1), the draw keyed by (noise.seed, stream_index).
double add_noise(double signal, const NoiseSpec& noise, std::uint64_t stream_index);

}  // namespace vlp
