#include "vlp/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

#include <Eigen/Dense>

#include "vlp/errors.hpp"
#include "vlp/rng.hpp"

namespace vlp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags keep calibration, localization and bookkeeping draws disjoint.
enum StreamTag : std::uint64_t { kAzimuth = 1, kCalibration = 2, kLocalization = 3, kSubset = 4, kMcNoise = 5 };

// Runs fn(i) for i in [0, n) over contiguous blocks. fn must only write to slots owned by i.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const auto k = static_cast<std::size_t>(std::max(1, threads));
  if (k == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(k, n);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = n * w / workers;
    const std::size_t hi = n * (w + 1) / workers;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  return percentile_sorted(v, 0.5);
}

std::uint64_t led_seed(std::uint64_t master, const NoiseSpec& noise, std::size_t l) {
  return rng::stream_index({master, noise.seed, static_cast<std::uint64_t>(l)});
}

double true_rss(const LedGroundTruth& led, const Vec2& xy) {
  return rss_general(led, PdPose::on_ground(xy.x(), xy.y()));
}

// Calibration built from ground truth: exact tilt/gain, true sigma^2, Gram matrix of the training geometry.
LedCalibration oracle_calibration(const LedGroundTruth& led, double sigma, std::span<const Vec3> training) {
  const GramSystem gram = build_gram(led.position, training);
  LedCalibration cal;
  cal.led_position = led.position;
  cal.c_vec = led.gain * led.normal;
  cal.normal_hat = led.normal;
  cal.gain_hat = led.gain;
  cal.sigma2_hat = sigma * sigma;
  cal.ggt = gram.ggt;
  cal.ggt_inverse = gram.ggt.inverse();
  cal.sample_count = training.size();
  cal.no_tilt_gain = led.gain;
  return cal;
}

std::vector<double> finite_only(std::span<const double> v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (double e : v) {
    if (std::isfinite(e)) out.push_back(e);
  }
  return out;
}

// Per-method localization of one RSS vector, NaN on failure.
struct Localizers {
  const std::vector<LedCalibration>* calibrations = nullptr;
  const GpModel* gp = nullptr;
  const SolverOptions* solver = nullptr;

  double error(Method m, const Eigen::VectorXd& rss, const Vec2& truth) const {
    if (calibrations == nullptr && m != Method::gp) return kNaN;
    try {
      switch (m) {
        case Method::weighted_ls: {
          const LocalizationProblem problem{*calibrations, rss};
          const auto est = solve_weighted_ls(problem, *solver);
          return est.xy.allFinite() ? euclidean_error(est.xy, truth) : kNaN;
        }
        case Method::multilateration: {
          const LocalizationProblem problem{*calibrations, rss};
          return euclidean_error(multilaterate(problem).xy, truth);
        }
        case Method::gp:
          if (gp == nullptr) return kNaN;
          return euclidean_error(gp_predict(*gp, rss), truth);
      }
    } catch (const Error&) {
    }
    return kNaN;
  }
};

bool wants(const std::vector<Method>& methods, Method m) {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

template <typename Report>
void fill_improvements(std::vector<Report>& reports, auto&& p50_of, auto&& p99_of) {
  const Report* gp = nullptr;
  for (const auto& r : reports) {
    if (r.method == Method::gp) gp = &r;
  }
  if (gp == nullptr) return;
  const double gp50 = p50_of(*gp);
  const double gp99 = p99_of(*gp);
  for (auto& r : reports) {
    if (r.method == Method::gp) continue;
    if (gp50 > 0.0 && std::isfinite(p50_of(r))) r.improvement_p50 = improvement_rate(gp50, p50_of(r));
    if (gp99 > 0.0 && std::isfinite(p99_of(r))) r.improvement_p99 = improvement_rate(gp99, p99_of(r));
  }
}

}  // namespace

bool RoomBounds::contains(const Vec2& p, double tol) const {
  return p.x() >= x_min - tol && p.x() <= x_min + width + tol && p.y() >= y_min - tol &&
         p.y() <= y_min + depth + tol;
}

void Scenario::validate() const {
  if (!(room.width > 0.0 && room.depth > 0.0)) throw ValidationError("room dimensions must be positive");
  if (leds.empty()) throw ValidationError("scenario has no LEDs");
  if (noise.size() != leds.size()) throw ValidationError("scenario needs one noise spec per LED");
  for (std::size_t l = 0; l < leds.size(); ++l) {
    if (!(leds[l].position.z() > 0.0)) {
      throw ValidationError("LED " + std::to_string(l) + " is not above the ground");
    }
    try {
      leds[l].validate();
    } catch (const ContractViolation& e) {
      throw ValidationError("LED " + std::to_string(l) + ": " + e.what());
    }
    if (!(noise[l].sigma >= 0.0)) throw ValidationError("noise sigma must be non-negative");
  }
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    if (!room.contains(trajectory[i])) {
      throw ValidationError("trajectory point " + std::to_string(i) + " lies outside the room");
    }
  }
  for (std::size_t i = 0; i < training_points.size(); ++i) {
    if (!room.contains(training_points[i])) {
      throw ValidationError("training point " + std::to_string(i) + " lies outside the room");
    }
  }
}

std::vector<Vec2> rectangle_loop(const RoomBounds& room, double inset, double spacing) {
  if (!(spacing > 0.0)) throw DomainError("trajectory spacing must be positive");
  const double x0 = room.x_min + inset;
  const double y0 = room.y_min + inset;
  const double w = room.width - 2.0 * inset;
  const double d = room.depth - 2.0 * inset;
  if (!(w > 0.0 && d > 0.0)) throw DomainError("trajectory inset leaves no room");
  const double perimeter = 2.0 * (w + d);
  const auto count = static_cast<int>(std::llround(perimeter / spacing));
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double s = perimeter * i / count;
    // counter-clockwise from the bottom-left corner
    if (s < w) {
      out.emplace_back(x0 + s, y0);
    } else if (s < w + d) {
      out.emplace_back(x0 + w, y0 + (s - w));
    } else if (s < 2.0 * w + d) {
      out.emplace_back(x0 + w - (s - w - d), y0 + d);
    } else {
      out.emplace_back(x0, y0 + d - (s - 2.0 * w - d));
    }
  }
  return out;
}

std::vector<Vec2> uniform_grid(const Vec2& lo, const Vec2& hi, int nx, int ny) {
  if (nx < 1 || ny < 1) throw DomainError("grid needs at least one node per axis");
  std::vector<Vec2> out;
  for (int j = 0; j < ny; ++j) {
    const double y = ny == 1 ? 0.5 * (lo.y() + hi.y()) : lo.y() + (hi.y() - lo.y()) * j / (ny - 1);
    for (int i = 0; i < nx; ++i) {
      const double x = nx == 1 ? 0.5 * (lo.x() + hi.x()) : lo.x() + (hi.x() - lo.x()) * i / (nx - 1);
      out.emplace_back(x, y);
    }
  }
  return out;
}

Scenario default_scenario(std::uint64_t seed) {
  Scenario s;
  s.room = RoomBounds{-4.0, 0.0, 8.0, 8.0};
  s.master_seed = seed;
  const std::vector<Vec2> xy{{-2.0, 6.0}, {2.0, 6.0}, {-2.0, 2.0}, {2.0, 2.0}};
  const std::vector<double> polar{1.6, 2.1, 3.7, 3.3};
  for (std::size_t l = 0; l < xy.size(); ++l) {
    const double u = 1.0 - rng::uniform(seed, rng::stream_index({kAzimuth, l}));
    s.leds.push_back(LedGroundTruth::from_tilt(Vec3{xy[l].x(), xy[l].y(), 4.0}, polar[l], 360.0 * u));
    s.noise.push_back(NoiseSpec{1e-4, 1000 + l});
  }
  s.trajectory = rectangle_loop(s.room, 1.0, 0.1);
  s.training_points = uniform_grid(Vec2{-3.0, 2.0}, Vec2{3.0, 7.0}, 7, 6);
  return s;
}

double euclidean_error(const Vec2& estimate, const Vec2& truth) { return (estimate - truth).norm(); }

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DomainError("percentile of an empty list");
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ErrorStats percentiles_and_cdf(std::span<const double> errors) {
  if (errors.empty()) throw DomainError("error statistics need at least one error");
  ErrorStats st;
  st.per_point_errors.assign(errors.begin(), errors.end());
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  st.p50 = percentile_sorted(sorted, 0.50);
  st.p99 = percentile_sorted(sorted, 0.99);
  st.cdf.reserve(sorted.size());
  const auto n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) st.cdf.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
  return st;
}

double improvement_rate(double reference_ep, double candidate_ep) {
  if (!(reference_ep > 0.0)) throw DomainError("improvement rate needs a positive reference error");
  return (reference_ep - candidate_ep) / reference_ep;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope needs at least two matching points");
  double mx = 0.0, my = 0.0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw DomainError("log-log slope needs positive data");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::vector<std::size_t> seeded_subset(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) throw ValidationError("subset size exceeds the number of available points");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const double u = 1.0 - rng::uniform(seed, rng::stream_index({kSubset, i}));  // [0, 1)
    const auto j = std::min(static_cast<std::size_t>(u * static_cast<double>(i)), i - 1);
    std::swap(idx[i - 1], idx[j]);
  }
  idx.resize(k);
  return idx;
}

// ---------------------------------------------------------------------------

CalibrationMcReport run_calibration_mc(const LedGroundTruth& led, const CalibrationPlan& plan,
                                       const CalibrationMcOptions& options) {
  if (options.trials < 1000) throw ContractViolation("calibration Monte Carlo needs at least 1000 trials");
  if (std::abs(plan.led_height - led.position.z()) > 1e-9) {
    throw ContractViolation("plan height does not match the LED height");
  }
  const std::vector<Vec3> points = plan.world_points(led.position.head<2>());
  const GramSystem gram = build_gram(led.position, points);
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd clean(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    clean[i] = rss_general(led, PdPose{points[static_cast<std::size_t>(i)], Vec3::UnitZ()});
  }
  const Vec3 truth = led.gain * led.normal;

  // Every sigma reuses the same standard-normal draws.
  const std::uint64_t seed = rng::stream_index({options.seed, kMcNoise});
  CalibrationMcReport report{led, plan, {}};
  for (std::size_t si = 0; si < options.sigmas.size(); ++si) {
    const double sigma = options.sigmas[si];
    CalibrationMcRow row;
    row.sigma = sigma;
    row.trials = options.trials;
    row.true_c_vec = truth;
    row.theoretical_cov = calibration_covariance(gram, sigma * sigma);
    row.theoretical_sum_mse = row.theoretical_cov.trace();

    Vec3 sum_c = Vec3::Zero();
    Mat3 sum_cc = Mat3::Zero();
    Vec3 sum_n = Vec3::Zero();
    double sum_gain = 0.0, sum_sq_err = 0.0, sum_s2 = 0.0;
    Eigen::VectorXd s(n);
    for (std::size_t t = 0; t < options.trials; ++t) {
      const std::uint64_t draw = options.antithetic ? t / 2 : t;
      const double sign = options.antithetic && (t % 2 == 1) ? -1.0 : 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        s[i] = clean[i] + sign * sigma * rng::standard_normal(seed, rng::stream_index({draw, static_cast<std::uint64_t>(i)}));
      }
      const Vec3 c = estimate_c_vector(gram, s);
      const auto tg = decompose(c);
      const Vec3 dc = c - truth;
      sum_c += dc;
      sum_cc += dc * dc.transpose();
      sum_n += tg.normal - led.normal;
      sum_gain += tg.gain - led.gain;
      sum_sq_err += dc.squaredNorm();
      sum_s2 += estimate_noise_variance(gram, s, c);
    }
    const auto m = static_cast<double>(options.trials);
    const Vec3 mean_dc = sum_c / m;
    row.mean_c_vec = truth + mean_dc;
    row.empirical_cov = (sum_cc - m * mean_dc * mean_dc.transpose()) / (m - 1.0);
    row.c_vec_std = row.empirical_cov.diagonal().cwiseSqrt();
    row.normal_bias = sum_n / m;
    row.gain_bias = sum_gain / m;
    row.empirical_sum_mse = sum_sq_err / m;
    row.mean_sigma2_hat = sum_s2 / m;
    report.rows.push_back(row);
  }
  return report;
}

CalibrationMcReport run_calibration_mc(const Scenario& scenario, std::size_t led_index,
                                       const CalibrationPlan& plan, const CalibrationMcOptions& options) {
  if (led_index >= scenario.leds.size()) throw ValidationError("LED index out of range");
  return run_calibration_mc(scenario.leds[led_index], plan, options);
}

// ---------------------------------------------------------------------------

const MethodReport* ExperimentReport::find(Method m) const {
  for (const auto& r : per_method) {
    if (r.method == m) return &r;
  }
  return nullptr;
}

const ReplayMethodSummary* ReplayReport::find(Method m) const {
  for (const auto& r : per_method) {
    if (r.method == m) return &r;
  }
  return nullptr;
}

ExperimentReport run_localization_experiment(const Scenario& scenario, const ExperimentConfig& config) {
  scenario.validate();
  if (config.methods.empty()) throw ValidationError("no localization methods requested");
  if (config.trials < 1) throw ValidationError("at least one trial is required");
  if (scenario.trajectory.empty()) throw ValidationError("scenario has an empty trajectory");

  const std::size_t available = scenario.training_points.size();
  const std::size_t k = config.training_size == 0 ? available : config.training_size;
  if (k < 3) throw ValidationError("training needs at least 3 points");
  std::vector<Vec2> training;
  if (k == available) {
    training = scenario.training_points;
  } else {
    for (std::size_t i : seeded_subset(available, k, rng::stream_index({config.seed, kSubset}))) {
      training.push_back(scenario.training_points[i]);
    }
  }
  std::vector<Vec3> training3;
  for (const auto& p : training) training3.emplace_back(p.x(), p.y(), 0.0);

  const std::size_t L = scenario.leds.size();
  const std::size_t P = scenario.trajectory.size();
  const std::size_t T = config.trials;
  const std::size_t M = config.methods.size();
  std::vector<std::uint64_t> seeds(L);
  for (std::size_t l = 0; l < L; ++l) seeds[l] = led_seed(config.seed ^ scenario.master_seed, scenario.noise[l], l);

  // Noiseless readings, shared by every trial.
  Eigen::MatrixXd clean_train(static_cast<Eigen::Index>(training.size()), static_cast<Eigen::Index>(L));
  Eigen::MatrixXd clean_traj(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(L));
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t i = 0; i < training.size(); ++i) {
      clean_train(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = true_rss(scenario.leds[l], training[i]);
    }
    for (std::size_t p = 0; p < P; ++p) {
      clean_traj(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(l)) =
          true_rss(scenario.leds[l], scenario.trajectory[p]);
    }
  }
  Eigen::MatrixXd train_xy(static_cast<Eigen::Index>(training.size()), 2);
  for (std::size_t i = 0; i < training.size(); ++i) train_xy.row(static_cast<Eigen::Index>(i)) = training[i].transpose();

  // errors[m][t * P + p]
  std::vector<std::vector<double>> errors(M, std::vector<double>(T * P, kNaN));
  const bool need_model = wants(config.methods, Method::weighted_ls) || wants(config.methods, Method::multilateration);
  const bool need_gp = wants(config.methods, Method::gp);

  parallel_for(T, config.threads, [&](std::size_t t) {
    Eigen::MatrixXd train_rss = clean_train;
    for (std::size_t l = 0; l < L; ++l) {
      const NoiseSpec spec{scenario.noise[l].sigma, seeds[l]};
      for (std::size_t i = 0; i < training.size(); ++i) {
        auto& v = train_rss(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
        v = add_noise(v, spec, rng::stream_index({kCalibration, t, i}));
      }
    }
    std::vector<LedCalibration> cals;
    bool cal_ok = need_model;
    if (need_model) {
      try {
        for (std::size_t l = 0; l < L; ++l) {
          CalibrationSet set{scenario.leds[l].position, {}};
          for (std::size_t i = 0; i < training.size(); ++i) {
            set.samples.push_back({training3[i], train_rss(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l))});
          }
          cals.push_back(calibrate(set));
        }
      } catch (const Error&) {
        cal_ok = false;
      }
    }
    std::optional<GpModel> gp;
    if (need_gp) {
      try {
        gp = gp_fit(train_rss, train_xy, config.gp_grid);
      } catch (const Error&) {
      }
    }
    const Localizers loc{cal_ok ? &cals : nullptr, gp ? &*gp : nullptr, &config.solver};
    Eigen::VectorXd rss(static_cast<Eigen::Index>(L));
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t l = 0; l < L; ++l) {
        const NoiseSpec spec{scenario.noise[l].sigma, seeds[l]};
        rss[static_cast<Eigen::Index>(l)] = add_noise(clean_traj(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(l)),
                                                      spec, rng::stream_index({kLocalization, t, p}));
      }
      for (std::size_t m = 0; m < M; ++m) errors[m][t * P + p] = loc.error(config.methods[m], rss, scenario.trajectory[p]);
    }
  });

  ExperimentReport report;
  report.methods = config.methods;
  report.training_used = training;
  report.trials = T;
  for (std::size_t m = 0; m < M; ++m) {
    MethodReport mr;
    mr.method = config.methods[m];
    const auto ok = finite_only(errors[m]);
    mr.failures = errors[m].size() - ok.size();
    if (!ok.empty()) {
      mr.stats = percentiles_and_cdf(ok);
    } else {
      mr.stats.p50 = mr.stats.p99 = kNaN;
    }
    report.per_method.push_back(std::move(mr));
  }
  fill_improvements(report.per_method, [](const MethodReport& r) { return r.stats.p50; },
                    [](const MethodReport& r) { return r.stats.p99; });

  std::vector<LedCalibration> oracle;
  bool crlb_possible = config.compute_crlb;
  if (crlb_possible) {
    try {
      for (std::size_t l = 0; l < L; ++l) {
        if (!(scenario.noise[l].sigma > 0.0)) throw DomainError("zero noise");
        oracle.push_back(oracle_calibration(scenario.leds[l], scenario.noise[l].sigma, training3));
      }
    } catch (const Error&) {
      crlb_possible = false;
    }
  }
  for (std::size_t p = 0; p < P; ++p) {
    PointReport pr;
    pr.truth = scenario.trajectory[p];
    if (crlb_possible) {
      try {
        const LocalizationProblem problem{oracle, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L))};
        const auto bound = crlb_xy(problem, Vec3{pr.truth.x(), pr.truth.y(), 0.0});
        pr.crlb_xy = bound.crlb_xy;
        pr.crlb_xy_ground = bound.crlb_xy_ground;
      } catch (const Error&) {
      }
    }
    for (std::size_t m = 0; m < M; ++m) {
      double sq = 0.0, sum = 0.0;
      std::size_t cnt = 0;
      for (std::size_t t = 0; t < T; ++t) {
        const double e = errors[m][t * P + p];
        if (!std::isfinite(e)) continue;
        sq += e * e;
        sum += e;
        ++cnt;
      }
      pr.rmse.push_back(cnt ? std::sqrt(sq / static_cast<double>(cnt)) : kNaN);
      pr.mean_error.push_back(cnt ? sum / static_cast<double>(cnt) : kNaN);
    }
    report.points.push_back(std::move(pr));
  }
  return report;
}

ReplayReport run_dataset_replay(std::span<const MeasurementRecord> records, std::span<const Vec3> led_positions,
                                const ReplayConfig& config) {
  if (config.methods.empty()) throw ValidationError("no localization methods requested");
  if (records.empty()) throw ValidationError("dataset is empty");
  const std::size_t L = led_positions.size();
  for (const auto& r : records) {
    if (static_cast<std::size_t>(r.rss.size()) != L) throw ValidationError("dataset LED count does not match the scenario");
  }
  if (config.training_size < 3 || config.training_size >= records.size()) {
    throw ValidationError("training size must be at least 3 and leave test points");
  }
  if (config.draws < 1) throw ValidationError("at least one draw is required");
  const std::size_t D = config.draws;
  const std::size_t M = config.methods.size();
  const bool need_model = wants(config.methods, Method::weighted_ls) || wants(config.methods, Method::multilateration);
  const bool need_gp = wants(config.methods, Method::gp);

  std::vector<std::vector<double>> p50(M, std::vector<double>(D, kNaN)), p99 = p50;
  std::vector<std::vector<std::size_t>> fails(M, std::vector<std::size_t>(D, 0));
  std::vector<double> crlb_median(D, kNaN);

  parallel_for(D, config.threads, [&](std::size_t draw) {
    const auto train_idx = seeded_subset(records.size(), config.training_size,
                                         rng::stream_index({config.seed, kSubset, draw}));
    std::vector<bool> is_train(records.size(), false);
    for (std::size_t i : train_idx) is_train[i] = true;

    const auto K = static_cast<Eigen::Index>(train_idx.size());
    Eigen::MatrixXd train_rss(K, static_cast<Eigen::Index>(L));
    Eigen::MatrixXd train_xy(K, 2);
    for (Eigen::Index i = 0; i < K; ++i) {
      const auto& r = records[train_idx[static_cast<std::size_t>(i)]];
      train_rss.row(i) = r.rss.transpose();
      train_xy(i, 0) = r.x;
      train_xy(i, 1) = r.y;
    }
    std::vector<LedCalibration> cals;
    bool cal_ok = need_model;
    if (need_model) {
      try {
        for (std::size_t l = 0; l < L; ++l) {
          CalibrationSet set{led_positions[l], {}};
          for (Eigen::Index i = 0; i < K; ++i) {
            set.samples.push_back({Vec3{train_xy(i, 0), train_xy(i, 1), 0.0}, train_rss(i, static_cast<Eigen::Index>(l))});
          }
          cals.push_back(calibrate(set));
        }
      } catch (const Error&) {
        cal_ok = false;
      }
    }
    std::optional<GpModel> gp;
    if (need_gp) {
      try {
        gp = gp_fit(train_rss, train_xy, config.gp_grid);
      } catch (const Error&) {
      }
    }
    const Localizers loc{cal_ok ? &cals : nullptr, gp ? &*gp : nullptr, &config.solver};
    std::vector<std::vector<double>> errs(M);
    std::vector<double> crlbs;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (is_train[i]) continue;
      const auto& r = records[i];
      const Vec2 truth{r.x, r.y};
      for (std::size_t m = 0; m < M; ++m) errs[m].push_back(loc.error(config.methods[m], r.rss, truth));
      if (cal_ok) {
        try {
          crlbs.push_back(crlb_xy(LocalizationProblem{cals, r.rss}, Vec3{r.x, r.y, 0.0}).crlb_xy);
        } catch (const Error&) {
        }
      }
    }
    for (std::size_t m = 0; m < M; ++m) {
      auto ok = finite_only(errs[m]);
      fails[m][draw] = errs[m].size() - ok.size();
      if (ok.empty()) continue;
      std::sort(ok.begin(), ok.end());
      p50[m][draw] = percentile_sorted(ok, 0.50);
      p99[m][draw] = percentile_sorted(ok, 0.99);
    }
    if (!crlbs.empty()) crlb_median[draw] = median(crlbs);
  });

  ReplayReport report;
  report.methods = config.methods;
  report.training_size = config.training_size;
  report.draws = D;
  report.draw_median_crlb = crlb_median;
  for (std::size_t m = 0; m < M; ++m) {
    ReplayMethodSummary s;
    s.method = config.methods[m];
    s.draw_p50 = p50[m];
    s.draw_p99 = p99[m];
    s.median_p50 = median(finite_only(p50[m]));
    s.median_p99 = median(finite_only(p99[m]));
    for (std::size_t f : fails[m]) s.failures += f;
    report.per_method.push_back(std::move(s));
  }
  fill_improvements(report.per_method, [](const ReplayMethodSummary& r) { return r.median_p50; },
                    [](const ReplayMethodSummary& r) { return r.median_p99; });
  return report;
}

}  // namespace vlp
