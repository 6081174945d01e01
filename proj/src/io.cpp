#include "vlp/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "vlp/errors.hpp"

namespace vlp::io {

using nlohmann::json;

namespace {

constexpr const char* kScenarioFormat = "vlpcal-scenario/1";
constexpr const char* kCalibrationFormat = "vlpcal-calibration/1";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
  const std::string t = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ParseError("non-numeric cell '" + t + "'", row, col);
  }
  if (!std::isfinite(v)) throw ParseError("non-finite value", row, col);
  return v;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

json mat_json(const Mat3& m) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
  return rows;
}

Vec3 vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Vec2 vec2_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw ParseError(std::string(what) + " must be a 2-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

Mat3 mat3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + " must be a 3x3 array");
  Mat3 m;
  for (int i = 0; i < 3; ++i) m.row(i) = vec3_from(j[static_cast<std::size_t>(i)], what).transpose();
  return m;
}

std::vector<Vec2> points_from(const json& j, const RoomBounds& room, const char* what) {
  std::vector<Vec2> out;
  if (j.is_array()) {
    for (const auto& p : j) out.push_back(vec2_from(p, what));
    return out;
  }
  if (!j.is_object()) throw ParseError(std::string(what) + " must be a point list or a generator object");
  const std::string kind = j.value("kind", "");
  if (kind == "rectangle_loop") {
    return rectangle_loop(room, j.value("inset", 1.0), j.value("spacing", 0.1));
  }
  if (kind == "grid") {
    return uniform_grid(vec2_from(j.at("lo"), "grid lo"), vec2_from(j.at("hi"), "grid hi"), j.at("nx").get<int>(),
                        j.at("ny").get<int>());
  }
  throw ParseError(std::string(what) + ": unknown generator kind '" + kind + "'");
}

std::vector<Vec2> default_training(const RoomBounds& room) {
  const Vec2 lo{room.x_min + 1.0, room.y_min + 2.0};
  const Vec2 hi{room.x_min + room.width - 1.0, room.y_min + room.depth - 1.0};
  if (!(hi.x() > lo.x() && hi.y() > lo.y())) return {};
  return uniform_grid(lo, hi, 7, 6);
}

std::vector<Vec2> default_trajectory(const RoomBounds& room) {
  if (room.width <= 2.0 || room.depth <= 2.0) return {};
  return rectangle_loop(room, 1.0, 0.1);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------

MeasurementTable parse_measurements(std::istream& in) {
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++row;
    if (!trim(line).empty()) {
      header = split(line, ',');
      break;
    }
  }
  if (header.empty()) throw ParseError("measurement file is empty");
  for (auto& h : header) h = trim(h);
  const std::vector<std::string> fixed{"point_id", "x", "y", "z"};
  for (std::size_t c = 0; c < fixed.size(); ++c) {
    if (c >= header.size() || header[c] != fixed[c]) {
      throw ParseError("missing column '" + fixed[c] + "' in header", row, c + 1);
    }
  }
  if (header.size() < 5) throw ParseError("header declares no rss_ columns", row);
  MeasurementTable table;
  table.led_count = header.size() - 4;
  for (std::size_t l = 0; l < table.led_count; ++l) {
    if (header[4 + l] != "rss_" + std::to_string(l)) {
      throw ParseError("expected column 'rss_" + std::to_string(l) + "', found '" + header[4 + l] + "'", row, 5 + l);
    }
  }
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()), row);
    }
    MeasurementRecord r;
    const double id = parse_number(cells[0], row, 1);
    if (id != std::floor(id)) throw ParseError("point_id must be an integer", row, 1);
    r.point_id = static_cast<long>(id);
    r.x = parse_number(cells[1], row, 2);
    r.y = parse_number(cells[2], row, 3);
    r.z = parse_number(cells[3], row, 4);
    if (std::abs(r.z) > 1e-9) throw ParseError("z must be 0 (PD on the ground plane)", row, 4);
    r.rss.resize(static_cast<Eigen::Index>(table.led_count));
    for (std::size_t l = 0; l < table.led_count; ++l) {
      r.rss[static_cast<Eigen::Index>(l)] = parse_number(cells[4 + l], row, 5 + l);
    }
    table.records.push_back(std::move(r));
  }
  if (table.records.empty()) throw ParseError("measurement file has a header but no records");
  return table;
}

MeasurementTable parse_measurements(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return parse_measurements(in);
}

void write_measurements(std::ostream& out, const std::vector<MeasurementRecord>& records) {
  const std::size_t L = records.empty() ? 0 : static_cast<std::size_t>(records.front().rss.size());
  out << "point_id,x,y,z";
  for (std::size_t l = 0; l < L; ++l) out << ",rss_" << l;
  out << '\n';
  for (const auto& r : records) {
    out << r.point_id << ',' << format_double(r.x) << ',' << format_double(r.y) << ',' << format_double(r.z);
    for (Eigen::Index l = 0; l < r.rss.size(); ++l) out << ',' << format_double(r.rss[l]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

Scenario parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("scenario must be a JSON object");
  try {
    const auto seed = doc.value("master_seed", kDefaultScenarioSeed);
    Scenario s = default_scenario(seed);
    bool room_given = false;
    if (doc.contains("room")) {
      const auto& r = doc["room"];
      s.room = RoomBounds{r.value("x_min", s.room.x_min), r.value("y_min", s.room.y_min),
                          r.value("width", s.room.width), r.value("depth", s.room.depth)};
      room_given = true;
    }
    if (doc.contains("leds")) {
      const Scenario defaults = default_scenario(seed);
      s.leds.clear();
      s.noise.clear();
      std::size_t l = 0;
      for (const auto& j : doc["leds"]) {
        const Vec3 pos = vec3_from(j.at("position"), "LED position");
        if (!(pos.z() > 0.0)) throw ValidationError("LED " + std::to_string(l) + " must be above the ground (z > 0)");
        const double polar = j.value("tilt_polar_deg", 0.0);
        double azimuth = 0.0;
        if (j.contains("tilt_azimuth_deg")) {
          azimuth = j["tilt_azimuth_deg"].get<double>();
        } else if (l < defaults.leds.size()) {
          azimuth = defaults.leds[l].tilt_azimuth_deg;
        }
        s.leds.push_back(LedGroundTruth::from_tilt(pos, polar, azimuth, j.value("gain", 1.0),
                                                   j.value("lambertian_order", 1.0)));
        s.noise.push_back(NoiseSpec{j.value("noise_sigma", 1e-4), j.value("noise_seed", std::uint64_t{1000 + l})});
        ++l;
      }
    }
    if (doc.contains("trajectory")) {
      s.trajectory = points_from(doc["trajectory"], s.room, "trajectory");
    } else if (room_given) {
      s.trajectory = default_trajectory(s.room);
    }
    if (doc.contains("training_points")) {
      s.training_points = points_from(doc["training_points"], s.room, "training_points");
    } else if (room_given) {
      s.training_points = default_training(s.room);
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed scenario field: ") + e.what());
  }
}

Scenario parse_scenario(const std::filesystem::path& path) { return parse_scenario_text(read_file(path)); }

std::string serialize_scenario(const Scenario& s) {
  json doc;
  doc["format"] = kScenarioFormat;
  doc["master_seed"] = s.master_seed;
  doc["room"] = {{"x_min", s.room.x_min}, {"y_min", s.room.y_min}, {"width", s.room.width}, {"depth", s.room.depth}};
  json leds = json::array();
  for (std::size_t l = 0; l < s.leds.size(); ++l) {
    const auto& led = s.leds[l];
    leds.push_back({{"position", vec_json(led.position)},
                    {"tilt_polar_deg", led.tilt_polar_deg},
                    {"tilt_azimuth_deg", led.tilt_azimuth_deg},
                    {"gain", led.gain},
                    {"lambertian_order", led.lambertian_order},
                    {"noise_sigma", s.noise[l].sigma},
                    {"noise_seed", s.noise[l].seed}});
  }
  doc["leds"] = leds;
  json traj = json::array();
  for (const auto& p : s.trajectory) traj.push_back(vec_json(p));
  doc["trajectory"] = traj;
  json train = json::array();
  for (const auto& p : s.training_points) train.push_back(vec_json(p));
  doc["training_points"] = train;
  return doc.dump(1) + "\n";
}

void serialize_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << serialize_scenario(scenario);
}

// ---------------------------------------------------------------------------

std::string serialize_calibration(const LedCalibration& cal, int led_index) {
  const auto [polar, azimuth] = normal_to_tilt(cal.normal_hat);
  json doc;
  doc["format"] = kCalibrationFormat;
  if (led_index >= 0) doc["led_index"] = led_index;
  doc["led_position"] = vec_json(cal.led_position);
  doc["c_vec"] = vec_json(cal.c_vec);
  doc["normal_hat"] = vec_json(cal.normal_hat);
  doc["gain_hat"] = cal.gain_hat;
  doc["sigma2_hat"] = cal.sigma2_hat;
  doc["tilt_polar_deg"] = polar * 180.0 / std::numbers::pi;
  doc["tilt_azimuth_deg"] = azimuth * 180.0 / std::numbers::pi;
  doc["ggt"] = mat_json(cal.ggt);
  doc["ggt_inverse"] = mat_json(cal.ggt_inverse);
  doc["sample_count"] = cal.sample_count;
  doc["no_tilt_gain"] = cal.no_tilt_gain;
  return doc.dump(1) + "\n";
}

LedCalibration parse_calibration_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("calibration record is not valid JSON: ") + e.what());
  }
  try {
    LedCalibration cal;
    cal.led_position = vec3_from(doc.at("led_position"), "led_position");
    cal.c_vec = vec3_from(doc.at("c_vec"), "c_vec");
    cal.normal_hat = vec3_from(doc.at("normal_hat"), "normal_hat");
    cal.gain_hat = doc.at("gain_hat").get<double>();
    cal.sigma2_hat = doc.at("sigma2_hat").get<double>();
    cal.ggt = mat3_from(doc.at("ggt"), "ggt");
    cal.ggt_inverse = mat3_from(doc.at("ggt_inverse"), "ggt_inverse");
    cal.sample_count = doc.value("sample_count", std::size_t{0});
    cal.no_tilt_gain = doc.value("no_tilt_gain", 0.0);
    if (!(cal.led_position.z() > 0.0)) throw ValidationError("calibration LED must be above the ground");
    if (std::abs(cal.normal_hat.norm() - 1.0) > 1e-9) throw ValidationError("normal_hat must be a unit vector");
    if (!(cal.gain_hat > 0.0)) throw ValidationError("gain_hat must be positive");
    if (!(cal.sigma2_hat >= 0.0)) throw ValidationError("sigma2_hat must be non-negative");
    if ((cal.c_vec - cal.gain_hat * cal.normal_hat).norm() > 1e-9 * cal.gain_hat) {
      throw ValidationError("c_vec is inconsistent with gain_hat * normal_hat");
    }
    return cal;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed calibration record: ") + e.what());
  }
}

LedCalibration parse_calibration(const std::filesystem::path& path) { return parse_calibration_text(read_file(path)); }

CalibrationSet calibration_set_from(const MeasurementTable& table, std::size_t led_index, const Vec3& led_position) {
  if (led_index >= table.led_count) throw ValidationError("LED index out of range for this dataset");
  CalibrationSet set{led_position, {}};
  for (const auto& r : table.records) {
    set.samples.push_back({Vec3{r.x, r.y, 0.0}, r.rss[static_cast<Eigen::Index>(led_index)]});
  }
  return set;
}

// ---------------------------------------------------------------------------

void write_plan_csv(std::ostream& out, const CalibrationPlan& plan) {
  out << "n,x,y,z\n";
  for (std::size_t n = 0; n < plan.points.size(); ++n) {
    const auto& p = plan.points[n];
    out << n << ',' << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z()) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& curve) {
  out << "radius,sum_mse\n";
  for (const auto& p : curve) out << format_double(p.radius) << ',' << format_double(p.sum_mse) << '\n';
}

void write_estimate_csv(std::ostream& out, const PositionEstimate& est) {
  out << "method,x,y,objective,iterations,converged\n";
  out << method_name(est.method) << ',' << format_double(est.xy.x()) << ',' << format_double(est.xy.y()) << ','
      << format_double(est.objective_value) << ',' << est.iterations << ',' << (est.converged ? "true" : "false")
      << '\n';
}

std::string serialize_crlb(const CrlbReport& report, const Vec3& position) {
  json doc;
  doc["position"] = vec_json(position);
  doc["crlb_xy"] = report.crlb_xy;
  doc["crlb_xy_ground"] = report.crlb_xy_ground;
  doc["fim"] = mat_json(report.fim);
  doc["covariance_bound"] = mat_json(report.covariance_bound);
  return doc.dump(1) + "\n";
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double rms_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return v.empty() ? std::nan("") : std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

void write_experiment_stats_csv(std::ostream& out, const ExperimentReport& report) {
  out << "method,count,failures,p50_m,p99_m,mean_m,rmse_m,improvement_p50_vs_gp,improvement_p99_vs_gp\n";
  for (const auto& m : report.per_method) {
    const auto& e = m.stats.per_point_errors;
    out << method_name(m.method) << ',' << e.size() << ',' << m.failures << ',' << format_double(m.stats.p50) << ','
        << format_double(m.stats.p99) << ',' << format_double(mean_of(e)) << ',' << format_double(rms_of(e)) << ','
        << opt(m.improvement_p50) << ',' << opt(m.improvement_p99) << '\n';
  }
}

void write_experiment_cdf_csv(std::ostream& out, const ExperimentReport& report, std::size_t max_rows) {
  out << "method,error_m,cdf\n";
  for (const auto& m : report.per_method) {
    const auto& cdf = m.stats.cdf;
    if (cdf.empty()) continue;
    const std::size_t rows = std::min(max_rows, cdf.size());
    std::size_t last = cdf.size();
    for (std::size_t k = 0; k < rows; ++k) {
      const std::size_t idx = rows == 1 ? cdf.size() - 1 : (cdf.size() - 1) * k / (rows - 1);
      if (idx == last) continue;
      last = idx;
      out << method_name(m.method) << ',' << format_double(cdf[idx].first) << ',' << format_double(cdf[idx].second)
          << '\n';
    }
  }
}

void write_experiment_points_csv(std::ostream& out, const ExperimentReport& report) {
  out << "point,x,y,crlb_xy_m,crlb_xy_ground_m";
  for (Method m : report.methods) out << ",rmse_" << method_name(m) << "_m";
  for (Method m : report.methods) out << ",mean_" << method_name(m) << "_m";
  out << '\n';
  for (std::size_t p = 0; p < report.points.size(); ++p) {
    const auto& pt = report.points[p];
    out << p << ',' << format_double(pt.truth.x()) << ',' << format_double(pt.truth.y()) << ',' << opt(pt.crlb_xy)
        << ',' << opt(pt.crlb_xy_ground);
    for (double v : pt.rmse) out << ',' << format_double(v);
    for (double v : pt.mean_error) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_replay_stats_csv(std::ostream& out, const ReplayReport& report) {
  out << "method,training_size,draws,median_p50_m,median_p99_m,failures,improvement_p50_vs_gp,improvement_p99_vs_gp\n";
  for (const auto& m : report.per_method) {
    out << method_name(m.method) << ',' << report.training_size << ',' << report.draws << ','
        << format_double(m.median_p50) << ',' << format_double(m.median_p99) << ',' << m.failures << ','
        << opt(m.improvement_p50) << ',' << opt(m.improvement_p99) << '\n';
  }
}

void write_replay_draws_csv(std::ostream& out, const ReplayReport& report) {
  out << "method,draw,p50_m,p99_m,median_crlb_xy_m\n";
  for (const auto& m : report.per_method) {
    for (std::size_t d = 0; d < m.draw_p50.size(); ++d) {
      const double crlb = d < report.draw_median_crlb.size() ? report.draw_median_crlb[d] : std::nan("");
      out << method_name(m.method) << ',' << d << ',' << format_double(m.draw_p50[d]) << ','
          << format_double(m.draw_p99[d]) << ',' << format_double(crlb) << '\n';
    }
  }
}

}  // namespace vlp::io
