#pragma once

#include <vector>

#include <Eigen/Core>

namespace vlp {

/// One row of a measurement dataset: a surveyed ground point and one RSS value per LED.
struct MeasurementRecord {
  long point_id = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  Eigen::VectorXd rss;
};

}  // namespace vlp
