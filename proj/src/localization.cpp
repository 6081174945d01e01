#include "vlp/localization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "vlp/errors.hpp"

namespace vlp {

namespace {

Vec3 ground(const Vec2& xy) { return {xy.x(), xy.y(), 0.0}; }

// Noise variances used for weighting. Zero estimates take the smallest positive
// variance among the LEDs, or 1 when every estimate is zero.
std::vector<double> effective_sigma2(const LocalizationProblem& problem) {
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& c : problem.calibrations) {
    if (c.sigma2_hat > 0.0) smallest = std::min(smallest, c.sigma2_hat);
  }
  if (!std::isfinite(smallest)) smallest = 1.0;
  std::vector<double> out;
  out.reserve(problem.calibrations.size());
  for (const auto& c : problem.calibrations) out.push_back(c.sigma2_hat > 0.0 ? c.sigma2_hat : smallest);
  return out;
}

double quad_term(const LedCalibration& cal, const Vec3& d) {
  const double h = cal.height();
  const double d2 = d.squaredNorm();
  const double d8 = d2 * d2 * d2 * d2;
  return h * h / d8 * d.dot(cal.ggt_inverse * d);
}

double total_variance_with(const LedCalibration& cal, const Vec3& candidate, double sigma2) {
  return sigma2 * (quad_term(cal, candidate - cal.led_position) + 1.0);
}

Vec3 total_variance_gradient_with(const LedCalibration& cal, const Vec3& candidate, double sigma2) {
  const Vec3 d = candidate - cal.led_position;
  const double h = cal.height();
  const double d2 = d.squaredNorm();
  const double d8 = d2 * d2 * d2 * d2;
  const Vec3 od = cal.ggt_inverse * d;
  return sigma2 * (-8.0 * h * h / (d8 * d2) * d.dot(od) * d + 2.0 * h * h / d8 * od);
}

struct Residuals {
  Eigen::VectorXd r;
  Eigen::MatrixXd j;  // L x 2
  double value() const { return r.squaredNorm(); }
};

class WeightedProblem {
 public:
  WeightedProblem(const LocalizationProblem& p, bool freeze, const Vec2& start)
      : p_(p), sigma2_(effective_sigma2(p)), freeze_(freeze) {
    if (freeze_) {
      frozen_.resize(static_cast<Eigen::Index>(p_.led_count()));
      for (std::size_t l = 0; l < p_.led_count(); ++l) {
        frozen_[static_cast<Eigen::Index>(l)] = total_variance_with(p_.calibrations[l], ground(start), sigma2_[l]);
      }
    }
  }

  double objective(const Vec2& xy) const {
    double f = 0.0;
    const Vec3 pos = ground(xy);
    for (std::size_t l = 0; l < p_.led_count(); ++l) {
      const auto& cal = p_.calibrations[l];
      const double e = variance(l, pos);
      const double res = p_.rss[static_cast<Eigen::Index>(l)] - model_rss(cal, pos);
      f += res * res / e;
    }
    return f;
  }

  Residuals residuals(const Vec2& xy) const {
    const auto L = static_cast<Eigen::Index>(p_.led_count());
    Residuals out{Eigen::VectorXd(L), Eigen::MatrixXd(L, 2)};
    const Vec3 pos = ground(xy);
    for (Eigen::Index l = 0; l < L; ++l) {
      const auto& cal = p_.calibrations[static_cast<std::size_t>(l)];
      const double e = variance(static_cast<std::size_t>(l), pos);
      const double sqrt_e = std::sqrt(e);
      const double res = p_.rss[l] - model_rss(cal, pos);
      out.r[l] = res / sqrt_e;
      Vec3 grad = -model_rss_gradient(cal, pos) / sqrt_e;
      if (!freeze_) {
        grad -= 0.5 * res / (e * sqrt_e) *
                total_variance_gradient_with(cal, pos, sigma2_[static_cast<std::size_t>(l)]);
      }
      out.j(l, 0) = grad.x();
      out.j(l, 1) = grad.y();
    }
    return out;
  }

 private:
  double variance(std::size_t l, const Vec3& pos) const {
    if (freeze_) return frozen_[static_cast<Eigen::Index>(l)];
    return total_variance_with(p_.calibrations[l], pos, sigma2_[l]);
  }

  const LocalizationProblem& p_;
  std::vector<double> sigma2_;
  bool freeze_;
  Eigen::VectorXd frozen_;
};

SearchRegion default_region(const LocalizationProblem& problem) {
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  double pad = 0.0;
  for (const auto& c : problem.calibrations) {
    lo = lo.cwiseMin(c.led_position.head<2>());
    hi = hi.cwiseMax(c.led_position.head<2>());
    pad = std::max(pad, c.height());
  }
  return {lo.array() - pad, hi.array() + pad};
}

bool inside_guard(const LocalizationProblem& problem, const Vec2& xy, double guard) {
  for (const auto& c : problem.calibrations) {
    if ((xy - c.led_position.head<2>()).norm() < guard) return true;
  }
  return false;
}

}  // namespace

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::weighted_ls: return "weighted_ls";
    case Method::multilateration: return "multilateration";
    case Method::gp: return "gp";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "wls" || name == "weighted_ls") return Method::weighted_ls;
  if (name == "multilateration") return Method::multilateration;
  if (name == "gp") return Method::gp;
  throw ValidationError("unknown localization method '" + std::string(name) + "'");
}

void LocalizationProblem::validate() const {
  if (calibrations.size() < 3) {
    throw ContractViolation("2D localization needs at least 3 LEDs, got " + std::to_string(calibrations.size()));
  }
  if (static_cast<std::size_t>(rss.size()) != calibrations.size()) {
    throw ContractViolation("RSS vector length does not match the number of calibrations");
  }
  for (const auto& c : calibrations) {
    if (!(c.height() > 0.0)) throw ContractViolation("LED height must be positive");
    if (!(c.sigma2_hat >= 0.0)) throw ContractViolation("noise variance estimate must be non-negative");
  }
  if (!rss.allFinite()) throw ContractViolation("RSS readings must be finite");
}

double model_rss(const LedCalibration& cal, const Vec3& position) {
  const Vec3 d = position - cal.led_position;
  const double d2 = d.squaredNorm();
  return cal.gain_hat * cal.height() / (d2 * d2) * cal.normal_hat.dot(d);
}

Vec3 model_rss_gradient(const LedCalibration& cal, const Vec3& position) {
  const Vec3 d = position - cal.led_position;
  const double d2 = d.squaredNorm();
  const double k = cal.gain_hat * cal.height();
  return -4.0 * k / (d2 * d2 * d2) * cal.normal_hat.dot(d) * d + k / (d2 * d2) * cal.normal_hat;
}

double residual_error_variance(const LedCalibration& cal, const Vec3& candidate) {
  const Vec3 d = candidate - cal.led_position;
  if (!(d.squaredNorm() > 0.0)) throw DomainError("candidate coincides with LED");
  return cal.sigma2_hat * quad_term(cal, d);
}

double total_noise_variance(const LedCalibration& cal, const Vec3& candidate) {
  return residual_error_variance(cal, candidate) + cal.sigma2_hat;
}

Vec3 total_noise_variance_gradient(const LedCalibration& cal, const Vec3& candidate) {
  return total_variance_gradient_with(cal, candidate, cal.sigma2_hat);
}

double weighted_ls_objective(const LocalizationProblem& problem, const Vec2& xy) {
  problem.validate();
  return WeightedProblem(problem, false, xy).objective(xy);
}

Vec2 grid_scan(const LocalizationProblem& problem, const SearchRegion& region, double step) {
  if (!(step > 0.0)) throw DomainError("grid step must be positive");
  const WeightedProblem wp(problem, false, region.lo);
  Vec2 best = region.lo;
  double best_f = std::numeric_limits<double>::infinity();
  const auto nx = static_cast<int>(std::floor((region.hi.x() - region.lo.x()) / step + 1e-9));
  const auto ny = static_cast<int>(std::floor((region.hi.y() - region.lo.y()) / step + 1e-9));
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      const Vec2 xy{region.lo.x() + i * step, region.lo.y() + j * step};
      const double f = wp.objective(xy);
      if (f < best_f) {
        best_f = f;
        best = xy;
      }
    }
  }
  return best;
}

PositionEstimate solve_weighted_ls(const LocalizationProblem& problem, const SolverOptions& options) {
  problem.validate();
  if ((problem.rss.array() <= 0.0).all()) throw UnlocatableError("all RSS readings are non-positive");

  Vec2 x;
  if (options.initial_guess) {
    x = *options.initial_guess;
  } else {
    bool have_start = false;
    try {
      const auto ml = multilaterate(problem);
      if (ml.xy.allFinite()) {
        x = ml.xy;
        have_start = true;
      }
    } catch (const Error&) {
    }
    if (!have_start) x = grid_scan(problem, options.region.value_or(default_region(problem)), options.scan_step);
  }

  const WeightedProblem wp(problem, options.freeze_weights, x);
  Residuals cur = wp.residuals(x);
  double f = cur.value();
  double lambda = 1e-3;
  int it = 0;
  auto grad_norm = [](const Residuals& r) { return (2.0 * r.j.transpose() * r.r).norm(); };

  while (it < options.max_iters && grad_norm(cur) > options.grad_tol) {
    ++it;
    const Eigen::Matrix2d jtj = cur.j.transpose() * cur.j;
    const Vec2 g = cur.j.transpose() * cur.r;
    bool accepted = false;
    while (lambda < 1e20) {
      Eigen::Matrix2d a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
      const Vec2 step = a.ldlt().solve(-g);
      const Vec2 trial = x + step;
      const bool blocked = options.proximity_guard > 0.0 &&
                           inside_guard(problem, trial, options.proximity_guard) &&
                           !inside_guard(problem, x, options.proximity_guard);
      const double f_trial = blocked || !trial.allFinite() ? std::numeric_limits<double>::infinity()
                                                            : wp.objective(trial);
      if (f_trial <= f) {
        const bool moved = trial != x;
        x = trial;
        f = f_trial;
        cur = wp.residuals(x);
        lambda = std::max(lambda * 0.1, 1e-15);
        accepted = moved;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;  // no representable descent step remains
  }

  PositionEstimate est;
  est.xy = x;
  est.objective_value = f;
  est.iterations = it;
  est.converged = grad_norm(cur) <= options.grad_tol;
  est.method = Method::weighted_ls;
  return est;
}

PositionEstimate multilaterate(const LocalizationProblem& problem, std::span<const double> no_tilt_gains) {
  problem.validate();
  const std::size_t L = problem.led_count();
  if (no_tilt_gains.size() != L) throw ContractViolation("one no-tilt gain per LED is required");
  std::vector<double> rho2(L);
  for (std::size_t l = 0; l < L; ++l) {
    const double s = problem.rss[static_cast<Eigen::Index>(l)];
    if (!(s > 0.0)) throw UnlocatableError("multilateration needs positive RSS from every LED");
    if (!(no_tilt_gains[l] > 0.0)) throw UnlocatableError("multilateration needs positive gains");
    const double h = problem.calibrations[l].height();
    const double d2 = std::sqrt(no_tilt_gains[l] * h * h / s);  // d^2 from d^4 = c h^2 / s
    rho2[l] = d2 - h * h;
  }
  const auto rows = static_cast<Eigen::Index>(L - 1);
  Eigen::MatrixXd a(rows, 2);
  Eigen::VectorXd b(rows);
  const Vec2 p0 = problem.calibrations[0].led_position.head<2>();
  for (std::size_t l = 1; l < L; ++l) {
    const Vec2 pl = problem.calibrations[l].led_position.head<2>();
    const auto r = static_cast<Eigen::Index>(l - 1);
    a.row(r) = 2.0 * (pl - p0).transpose();
    b[r] = rho2[0] - rho2[l] + pl.squaredNorm() - p0.squaredNorm();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2) throw SingularGeometryError("LED ground projections are collinear");
  PositionEstimate est;
  est.xy = qr.solve(b);
  est.objective_value = (a * est.xy - b).squaredNorm();
  est.iterations = 0;
  est.converged = true;
  est.method = Method::multilateration;
  return est;
}

PositionEstimate multilaterate(const LocalizationProblem& problem) {
  std::vector<double> gains;
  gains.reserve(problem.led_count());
  for (const auto& c : problem.calibrations) gains.push_back(c.no_tilt_gain);
  return multilaterate(problem, gains);
}

Mat3 fim(const LocalizationProblem& problem, const Vec3& position, const FimOptions& options) {
  Mat3 info = Mat3::Zero();
  for (const auto& cal : problem.calibrations) {
    if (!(cal.sigma2_hat > 0.0)) throw DomainError("Fisher information needs a positive noise variance");
    if (!((position - cal.led_position).squaredNorm() > 0.0)) throw DomainError("position coincides with LED");
    const double e = total_noise_variance(cal, position);
    const Vec3 dmu = model_rss_gradient(cal, position);
    info += dmu * dmu.transpose() / e;
    if (options.include_variance_term) {
      const Vec3 de = total_noise_variance_gradient(cal, position);
      info += 0.5 * de * de.transpose() / (e * e);
    }
  }
  return info;
}

CrlbReport crlb_xy(const LocalizationProblem& problem, const Vec3& position, const FimOptions& options) {
  CrlbReport rep;
  rep.fim = fim(problem, position, options);
  Eigen::SelfAdjointEigenSolver<Mat3> eig(rep.fim, Eigen::EigenvaluesOnly);
  const auto lambda = eig.eigenvalues();
  if (!(lambda.maxCoeff() > 0.0) || lambda.minCoeff() <= lambda.maxCoeff() * 1e-12) {
    throw UnobservableError("Fisher information is singular; position is not observable");
  }
  rep.covariance_bound = rep.fim.inverse();
  rep.crlb_xy = std::sqrt(rep.covariance_bound(0, 0) + rep.covariance_bound(1, 1));
  rep.crlb_xy_ground = std::sqrt(rep.fim.topLeftCorner<2, 2>().inverse().trace());
  return rep;
}

}  // namespace vlp
