#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vlp/calibration.hpp"
#include "vlp/cli.hpp"
#include "vlp/errors.hpp"
#include "vlp/localization.hpp"
#include "vlp/verify.hpp"

namespace py = pybind11;
using namespace vlp;

namespace {

LedCalibration calibrate_arrays(const Vec3& led_position, const Eigen::MatrixX3d& points, const Eigen::VectorXd& rss) {
  if (points.rows() != rss.size()) throw ValidationError("points and rss must have the same length");
  CalibrationSet set{led_position, {}};
  for (Eigen::Index i = 0; i < points.rows(); ++i) set.samples.push_back({points.row(i).transpose(), rss[i]});
  return calibrate(set);
}

LocalizationProblem make_problem(const std::vector<LedCalibration>& cals, const Eigen::VectorXd& rss) {
  LocalizationProblem p{cals, rss};
  p.validate();
  return p;
}

std::tuple<int, std::string, std::string> cli(const std::vector<std::string>& args) {
  std::vector<std::string> full{"vlpcal"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : full) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

PYBIND11_MODULE(_vlpcal, m) {
  m.doc() = "LED tilt/gain calibration and RSS localization";

  py::register_exception<Error>(m, "NumericalError", PyExc_RuntimeError);
  const auto& invalid = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", invalid.ptr());
  py::register_exception<ContractViolation>(m, "ContractViolation", invalid.ptr());
  py::register_exception<DomainError>(m, "DomainError", invalid.ptr());

  py::class_<LedCalibration>(m, "LedCalibration")
      .def_readonly("led_position", &LedCalibration::led_position)
      .def_readonly("c_vec", &LedCalibration::c_vec)
      .def_readonly("normal_hat", &LedCalibration::normal_hat)
      .def_readonly("gain_hat", &LedCalibration::gain_hat)
      .def_readonly("sigma2_hat", &LedCalibration::sigma2_hat)
      .def_readonly("ggt", &LedCalibration::ggt)
      .def_readonly("ggt_inverse", &LedCalibration::ggt_inverse)
      .def_readonly("sample_count", &LedCalibration::sample_count)
      .def_readonly("no_tilt_gain", &LedCalibration::no_tilt_gain);

  py::class_<PositionEstimate>(m, "PositionEstimate")
      .def_property_readonly("xy", [](const PositionEstimate& e) { return e.xy; })
      .def_readonly("objective_value", &PositionEstimate::objective_value)
      .def_readonly("iterations", &PositionEstimate::iterations)
      .def_readonly("converged", &PositionEstimate::converged)
      .def_property_readonly("method", [](const PositionEstimate& e) { return std::string(method_name(e.method)); });

  py::class_<CrlbReport>(m, "CrlbReport")
      .def_readonly("fim", &CrlbReport::fim)
      .def_readonly("covariance_bound", &CrlbReport::covariance_bound)
      .def_readonly("crlb_xy", &CrlbReport::crlb_xy)
      .def_readonly("crlb_xy_ground", &CrlbReport::crlb_xy_ground);

  m.def("optimal_radius", &optimal_radius, py::arg("height"));
  m.def("optimal_sum_mse", &optimal_sum_mse, py::arg("height"), py::arg("count"), py::arg("sigma2"));
  m.def(
      "plan_points",
      [](double h, int count, double phase) {
        const auto plan = plan_optimal_points(h, count, phase);
        Eigen::MatrixX3d pts(static_cast<Eigen::Index>(plan.points.size()), 3);
        for (std::size_t i = 0; i < plan.points.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = plan.points[i];
        return pts;
      },
      py::arg("height"), py::arg("count"), py::arg("phase") = 0.0,
      "LED-centred optimal calibration points as an (N, 3) array.");
  m.def(
      "radius_sweep",
      [](double h, int count, double sigma2, const std::vector<double>& radii) {
        const auto grid = radii.empty() ? default_sweep_grid(h) : radii;
        std::vector<std::pair<double, double>> rows;
        for (const auto& p : radius_sweep(h, count, sigma2, grid)) rows.emplace_back(p.radius, p.sum_mse);
        return rows;
      },
      py::arg("height"), py::arg("count"), py::arg("sigma2"), py::arg("radii") = std::vector<double>{});
  m.def("calibrate", &calibrate_arrays, py::arg("led_position"), py::arg("points"), py::arg("rss"));
  m.def(
      "localize_weighted_ls",
      [](const std::vector<LedCalibration>& cals, const Eigen::VectorXd& rss, bool freeze_weights) {
        SolverOptions opt;
        opt.freeze_weights = freeze_weights;
        return solve_weighted_ls(make_problem(cals, rss), opt);
      },
      py::arg("calibrations"), py::arg("rss"), py::arg("freeze_weights") = false);
  m.def(
      "localize_multilateration",
      [](const std::vector<LedCalibration>& cals, const Eigen::VectorXd& rss) {
        return multilaterate(make_problem(cals, rss));
      },
      py::arg("calibrations"), py::arg("rss"));
  m.def(
      "crlb",
      [](const std::vector<LedCalibration>& cals, const Vec2& xy, bool variance_term) {
        LocalizationProblem p{cals, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cals.size()))};
        FimOptions opt;
        opt.include_variance_term = variance_term;
        return crlb_xy(p, Vec3{xy.x(), xy.y(), 0.0}, opt);
      },
      py::arg("calibrations"), py::arg("xy"), py::arg("variance_term") = true);
  m.def(
      "verify",
      [](const std::string& suite, std::uint64_t seed, double scale) {
        const auto rep = run_verify_suite(suite, seed, scale);
        py::list checks;
        for (const auto& c : rep.checks) {
          py::dict d;
          d["name"] = c.name;
          d["measured"] = c.measured;
          d["expected"] = c.expected;
          d["tolerance"] = c.tolerance;
          d["passed"] = c.passed;
          checks.append(d);
        }
        return py::make_tuple(rep.passed(), checks);
      },
      py::arg("suite"), py::arg("seed") = 1, py::arg("scale") = 1.0);
  m.def("cli", &cli, py::arg("args"), "Runs a vlpcal subcommand in-process; returns (exit_code, stdout, stderr).");
}
