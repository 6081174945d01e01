#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vlp/calibration.hpp"
#include "vlp/localization.hpp"
#include "vlp/records.hpp"
#include "vlp/simulation.hpp"

namespace vlp::io {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

struct MeasurementTable {
  std::vector<MeasurementRecord> records;
  std::size_t led_count = 0;
};

/// CSV with header `point_id,x,y,z,rss_0,...,rss_{L-1}`. Throws ParseError with row/column.
MeasurementTable parse_measurements(std::istream& in);
MeasurementTable parse_measurements(const std::filesystem::path& path);
void write_measurements(std::ostream& out, const std::vector<MeasurementRecord>& records);

/// Scenario JSON. Omitted fields fall back to the default 4-LED room.
Scenario parse_scenario_text(const std::string& text);
Scenario parse_scenario(const std::filesystem::path& path);
std::string serialize_scenario(const Scenario& scenario);
void serialize_scenario(const Scenario& scenario, const std::filesystem::path& path);

std::string serialize_calibration(const LedCalibration& cal, int led_index = -1);
LedCalibration parse_calibration_text(const std::string& text);
LedCalibration parse_calibration(const std::filesystem::path& path);

/// Calibration set for one LED column of a measurement table.
CalibrationSet calibration_set_from(const MeasurementTable& table, std::size_t led_index, const Vec3& led_position);

void write_plan_csv(std::ostream& out, const CalibrationPlan& plan);
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& curve);
void write_estimate_csv(std::ostream& out, const PositionEstimate& est);
std::string serialize_crlb(const CrlbReport& report, const Vec3& position);

void write_experiment_stats_csv(std::ostream& out, const ExperimentReport& report);
/// Empirical CDF, at most `max_rows` evenly spaced order statistics per method.
void write_experiment_cdf_csv(std::ostream& out, const ExperimentReport& report, std::size_t max_rows = 1001);
void write_experiment_points_csv(std::ostream& out, const ExperimentReport& report);

void write_replay_stats_csv(std::ostream& out, const ReplayReport& report);
void write_replay_draws_csv(std::ostream& out, const ReplayReport& report);

}  // namespace vlp::io
