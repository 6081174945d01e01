#include "vlp/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Cholesky>

#include "vlp/errors.hpp"

namespace vlp {

namespace {

std::vector<double> logspace(double lo, double hi, int count) {
  std::vector<double> out;
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (count - 1)));
  return out;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const Eigen::Index m = x.rows();
  Eigen::MatrixXd d(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).squaredNorm();
  }
  return d;
}

// Rows with identical inputs are folded into one datum: the group mean target
// with noise jitter/n. The posterior mean is unchanged by this, and the
// marginal likelihood is recovered exactly from the within-group scatter.
struct Grouped {
  Eigen::MatrixXd x;       // U x L distinct inputs
  Eigen::VectorXd counts;  // U
  Eigen::MatrixXd y;       // U x 2 group mean targets
  Eigen::Vector2d scatter = Eigen::Vector2d::Zero();
  Eigen::Index total = 0;
};

Grouped group_rows(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  std::vector<Eigen::Index> first;
  std::vector<std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::size_t g = 0;
    while (g < first.size() && !(x.row(first[g]).array() == x.row(i).array()).all()) ++g;
    if (g == first.size()) {
      first.push_back(i);
      members.emplace_back();
    }
    members[g].push_back(i);
  }
  const auto u = static_cast<Eigen::Index>(first.size());
  Grouped out{Eigen::MatrixXd(u, x.cols()), Eigen::VectorXd(u), Eigen::MatrixXd::Zero(u, y.cols()), Eigen::Vector2d::Zero(), x.rows()};
  for (Eigen::Index g = 0; g < u; ++g) {
    const auto& rows = members[static_cast<std::size_t>(g)];
    out.x.row(g) = x.row(first[static_cast<std::size_t>(g)]);
    out.counts[g] = static_cast<double>(rows.size());
    for (Eigen::Index r : rows) out.y.row(g) += y.row(r);
    out.y.row(g) /= out.counts[g];
    for (Eigen::Index r : rows) out.scatter += (y.row(r) - out.y.row(g)).array().square().matrix().transpose();
  }
  return out;
}

// Cholesky of K + jitter*diag(1/n), escalating jitter tenfold on failure.
bool factor(const Eigen::MatrixXd& sqdist, const Eigen::VectorXd& counts, GpHyper& hyper,
            Eigen::LLT<Eigen::MatrixXd>& llt) {
  const double inv = -0.5 / (hyper.length_scale * hyper.length_scale);
  Eigen::MatrixXd k = hyper.signal_variance * (sqdist * inv).array().exp().matrix();
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd kk = k;
    kk.diagonal().array() += hyper.noise_jitter / counts.array();
    llt.compute(kk);
    if (llt.info() == Eigen::Success) return true;
    hyper.noise_jitter *= 10.0;
  }
  return false;
}

double lml_from(const Eigen::LLT<Eigen::MatrixXd>& llt, const Grouped& data, double jitter) {
  const Eigen::MatrixXd alpha = llt.solve(data.y);
  const auto m = static_cast<double>(data.total);
  const auto u = static_cast<double>(data.x.rows());
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum() +
                         (m - u) * std::log(jitter) + data.counts.array().log().sum();
  double lml = 0.0;
  for (Eigen::Index c = 0; c < data.y.cols(); ++c) {
    lml += -0.5 * (data.scatter[c] / jitter + data.y.col(c).dot(alpha.col(c))) - 0.5 * log_det -
           0.5 * m * std::log(2.0 * std::numbers::pi);
  }
  return lml;
}

}  // namespace

GpHyperGrid GpHyperGrid::standard() {
  return {logspace(1e-2, 1e1, 13), logspace(1e-2, 1e1, 7), logspace(1e-8, 1e-4, 5)};
}

double gp_log_marginal_likelihood(const Eigen::MatrixXd& standardized_inputs,
                                  const Eigen::MatrixXd& centred_targets, const GpHyper& hyper) {
  if (centred_targets.rows() != standardized_inputs.rows() || centred_targets.cols() != 2) {
    throw ContractViolation("GP targets must be M x 2");
  }
  const Grouped data = group_rows(standardized_inputs, centred_targets);
  GpHyper h = hyper;
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!factor(squared_distances(data.x), data.counts, h, llt)) {
    return -std::numeric_limits<double>::infinity();
  }
  return lml_from(llt, data, h.noise_jitter);
}

GpModel gp_fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const GpHyperGrid& grid) {
  const Eigen::Index m = inputs.rows();
  if (m < 1) throw ContractViolation("GP needs at least one training point");
  if (targets.rows() != m || targets.cols() != 2) throw ContractViolation("GP targets must be M x 2");
  if (!inputs.allFinite() || !targets.allFinite()) throw ContractViolation("GP training data must be finite");
  if (grid.length_scales.empty() || grid.signal_variances.empty() || grid.noise_jitters.empty()) {
    throw ContractViolation("GP hyperparameter grid is empty");
  }

  Grouped data = group_rows(inputs, targets);
  GpModel model;
  model.input_mean = data.x.colwise().mean();
  model.input_scale.resize(inputs.cols());
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    const double var = (data.x.col(c).array() - model.input_mean[c]).square().mean();
    model.input_scale[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  model.inputs = (data.x.rowwise() - model.input_mean).array().rowwise() / model.input_scale.array();
  data.x = model.inputs;
  model.target_mean = data.y.colwise().mean();
  data.y = data.y.rowwise() - model.target_mean;
  const Eigen::MatrixXd sqdist = squared_distances(model.inputs);

  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (double ell : grid.length_scales) {
    for (double sf2 : grid.signal_variances) {
      for (double jitter : grid.noise_jitters) {
        GpHyper h{ell, sf2, jitter};
        if (!(ell > 0.0 && sf2 > 0.0 && jitter > 0.0)) throw ContractViolation("GP hyperparameters must be positive");
        if (!factor(sqdist, data.counts, h, llt)) continue;
        const double lml = lml_from(llt, data, h.noise_jitter);
        // ties go to the first maximiser in grid order
        if (lml > best) {
          best = lml;
          model.hyper = h;
          model.alpha = llt.solve(data.y);
          found = true;
        }
      }
    }
  }
  if (!found) throw GpFitError("kernel matrix is not positive definite for any grid point");
  model.log_marginal_likelihood = best;
  return model;
}

Vec2 gp_predict(const GpModel& model, const Eigen::Ref<const Eigen::VectorXd>& rss) {
  if (rss.size() != model.inputs.cols()) throw ContractViolation("GP query has the wrong number of LEDs");
  const Eigen::RowVectorXd q = (rss.transpose() - model.input_mean).array() / model.input_scale.array();
  const double inv = -0.5 / (model.hyper.length_scale * model.hyper.length_scale);
  const Eigen::VectorXd kstar =
      model.hyper.signal_variance *
      ((model.inputs.rowwise() - q).rowwise().squaredNorm() * inv).array().exp().matrix();
  const Eigen::RowVector2d mean = model.target_mean + kstar.transpose() * model.alpha;
  return mean.transpose();
}

}  // namespace vlp
