#pragma once

#include <vector>

#include <Eigen/Core>

#include "vlp/channel.hpp"

namespace vlp {

/// Hyperparameter candidates searched by gp_fit. Length scales are in
/// standardized RSS units; signal variance and jitter in squared meters.
struct GpHyperGrid {
  std::vector<double> length_scales;
  std::vector<double> signal_variances;
  std::vector<double> noise_jitters;

  /// 13 x 7 x 5 log-spaced grid.
  static GpHyperGrid standard();
};

struct GpHyper {
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double noise_jitter = 1e-6;
};

/// Squared-exponential GP regression from an RSS vector to (x, y), with a
/// constant prior mean equal to the mean target over distinct inputs.
struct GpModel {
  Eigen::MatrixXd inputs;   // U x L distinct training inputs, standardized
  Eigen::RowVectorXd input_mean;
  Eigen::RowVectorXd input_scale;
  Eigen::RowVector2d target_mean = Eigen::RowVector2d::Zero();
  Eigen::MatrixXd alpha;    // U x 2, (K + jitter/n)^{-1} (y_bar - mean)
  GpHyper hyper;
  double log_marginal_likelihood = 0.0;
};

/// Log marginal likelihood summed over both outputs for a fixed hyperparameter set.
double gp_log_marginal_likelihood(const Eigen::MatrixXd& standardized_inputs,
                                  const Eigen::MatrixXd& centred_targets, const GpHyper& hyper);

GpModel gp_fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
               const GpHyperGrid& grid = GpHyperGrid::standard());

Vec2 gp_predict(const GpModel& model, const Eigen::Ref<const Eigen::VectorXd>& rss);

}  // namespace vlp
