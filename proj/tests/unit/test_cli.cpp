#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "test_support.hpp"
#include "vlp/cli.hpp"
#include "vlp/io.hpp"

using namespace vlp;
using namespace vlp::testing;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "vlpcal");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<double>> csv_rows(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line) && !line.empty()) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(cell.empty() ? std::nan("") : std::stod(cell));
    rows.push_back(v);
  }
  return rows;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class Workspace {
 public:
  Workspace() : dir_(std::filesystem::temp_directory_path() / ("vlpcal_cli_" + std::to_string(std::random_device{}()))) {
    std::filesystem::create_directories(dir_);
  }
  ~Workspace() { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  std::filesystem::path dir_;
};

const std::vector<Vec3> kLedPos{{1.059, 2.470, 1.284}, {2.428, 2.552, 1.284}, {1.031, 0.630, 1.284}, {2.402, 0.582, 1.284}};

std::vector<LedGroundTruth> dataset_leds() {
  std::vector<LedGroundTruth> leds;
  for (std::size_t l = 0; l < 4; ++l) leds.push_back(LedGroundTruth::from_tilt(kLedPos[l], 3.0 + l, 80.0 * l));
  return leds;
}

void write_dataset(const std::string& path, double sigma) {
  const auto leds = dataset_leds();
  std::mt19937_64 gen(2);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<MeasurementRecord> records;
  int id = 0;
  for (double x = 0.2; x < 2.9; x += 0.3) {
    for (double y = 0.2; y < 2.9; y += 0.3) {
      Eigen::VectorXd s = clean_rss(leds, Vec2{x, y});
      for (Eigen::Index k = 0; k < 4; ++k) s[k] += sigma * noise(gen);
      records.push_back({id++, x, y, 0.0, s});
    }
  }
  std::ofstream f(path);
  io::write_measurements(f, records);
}

std::string rss_arg(const Eigen::VectorXd& s) {
  std::string out;
  for (Eigen::Index i = 0; i < s.size(); ++i) out += (i ? "," : "") + io::format_double(s[i]);
  return out;
}

}  // namespace

TEST_CASE("plan") {
  const auto r = run({"plan", "--height", "1", "--count", "4"});
  CHECK(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) CHECK(std::hypot(row[1], row[2]) == doctest::Approx(0.550251).epsilon(1e-6));
}

TEST_CASE("validation errors exit 1 without printing results") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"plan", "--height", "0", "--count", "4"},
           {"plan", "--height", "1"},
           {"plan", "--height", "abc", "--count", "4"},
           {"sweep-radius", "--height", "4", "--count", "5", "--sigma2", "1e-6", "--grid", "1:0.5:0.1"},
           {"sweep-radius", "--height", "4", "--count", "5", "--sigma2", "1e-6", "--grid", "nonsense"},
           {"verify", "--suite", "prop9"},
           {"localize", "--calib", "/nonexistent.json", "--rss", "1,2,3", "--method", "wls"},
           {"simulate", "--scenario", "/nonexistent.json"},
           {"frobnicate"},
           {}}) {
    const auto r = run(args);
    CHECK(r.code == 1);
    CHECK(r.out.empty());
    CHECK_FALSE(r.err.empty());
  }
}

TEST_CASE("help exits 0") {
  const auto r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("simulate") != std::string::npos);
}

TEST_CASE("sweep-radius default grid has its minimum near 0.55 h") {
  const auto r = run({"sweep-radius", "--height", "4", "--count", "5", "--sigma2", "1e-6"});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  CHECK(rows.size() == 146);
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][1] < rows[best][1]) best = i;
  }
  CHECK(std::abs(rows[best][0] / (0.550251 * 4.0) - 1.0) <= 0.02);

  const auto g = run({"sweep-radius", "--height", "4", "--count", "5", "--sigma2", "1e-6", "--grid", "0.5:1.5:0.25"});
  REQUIRE(g.code == 0);
  const auto grows = csv_rows(g.out);
  REQUIRE(grows.size() == 5);
  CHECK(grows[4][0] == 1.5);
}

TEST_CASE("calibrate, localize and crlb from a measurement file") {
  Workspace ws;
  const auto data = ws.path("data.csv");
  write_dataset(data, 1e-5);
  std::vector<std::string> calib;
  for (std::size_t l = 0; l < 4; ++l) {
    const auto out = ws.path("led" + std::to_string(l) + ".json");
    const auto r = run({"calibrate", "--data", data, "--led-index", std::to_string(l), "--led-x",
                        io::format_double(kLedPos[l].x()), "--led-y", io::format_double(kLedPos[l].y()), "--led-z",
                        io::format_double(kLedPos[l].z()), "--out", out});
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    const auto cal = io::parse_calibration(out);
    CHECK((cal.normal_hat - dataset_leds()[l].normal).norm() < 1e-3);
    calib.push_back(out);
  }

  const Vec2 truth{1.37, 1.81};
  const auto rss = rss_arg(clean_rss(dataset_leds(), truth));
  for (const std::string method : {"wls", "multilateration"}) {
    std::vector<std::string> args{"localize", "--calib"};
    args.insert(args.end(), calib.begin(), calib.end());
    args.insert(args.end(), {"--rss", rss, "--method", method});
    const auto r = run(args);
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("method,x,y,objective,iterations,converged\n", 0) == 0);
    std::istringstream in(r.out);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    std::stringstream ss(line);
    std::string name, xs, ys;
    std::getline(ss, name, ',');
    std::getline(ss, xs, ',');
    std::getline(ss, ys, ',');
    const double err = (Vec2{std::stod(xs), std::stod(ys)} - truth).norm();
    if (method == "wls") {
      CHECK(name == "weighted_ls");
      CHECK(err < 0.01);
    } else {
      CHECK(name == "multilateration");
      CHECK(err < 0.5);
    }
  }

  {
    std::vector<std::string> args{"localize", "--calib"};
    args.insert(args.end(), calib.begin(), calib.end());
    args.insert(args.end(), {"--rss", rss, "--method", "gp", "--data", data, "--subset-seed", "3", "--subset-size", "40"});
    const auto r = run(args);
    CHECK(r.code == 0);
    CHECK(r.out.find("\ngp,") != std::string::npos);
  }
  {
    std::vector<std::string> args{"localize", "--calib"};
    args.insert(args.end(), calib.begin(), calib.end());
    args.insert(args.end(), {"--rss", rss, "--method", "gp"});
    CHECK(run(args).code == 1);
  }
  {
    std::vector<std::string> args{"localize", "--calib"};
    args.insert(args.end(), calib.begin(), calib.end());
    args.insert(args.end(), {"--rss", "0.1,0.2", "--method", "wls"});
    const auto r = run(args);
    CHECK(r.code == 1);
    CHECK(r.out.empty());
  }
  {
    std::vector<std::string> args{"localize", "--calib"};
    args.insert(args.end(), calib.begin(), calib.end());
    args.insert(args.end(), {"--rss", rss, "--method", "wls", "--max-iters", "-1"});
    CHECK(run(args).code == 1);
  }
  {
    std::vector<std::string> args{"localize", "--calib"};
    args.insert(args.end(), calib.begin(), calib.end());
    args.insert(args.end(), {"--rss", rss, "--method", "wls", "--max-iters", "0"});
    const auto lax = run(args);
    CHECK(lax.code == 0);
    CHECK(lax.err.find("did not converge") != std::string::npos);
    args.push_back("--strict");
    const auto strict = run(args);
    CHECK(strict.code == 2);
    CHECK(strict.out.empty());
  }
  {
    std::vector<std::string> args{"crlb", "--calib"};
    args.insert(args.end(), calib.begin(), calib.end());
    args.insert(args.end(), {"--at", "1.5,1.5"});
    const auto r = run(args);
    REQUIRE(r.code == 0);
    const auto doc = nlohmann::json::parse(r.out);
    CHECK(doc.at("crlb_xy").get<double>() > 0.0);
    CHECK(doc.at("crlb_xy_ground").get<double>() > 0.0);
    CHECK(doc.at("crlb_xy_ground").get<double>() <= doc.at("crlb_xy").get<double>() * (1.0 + 1e-12));
  }
}

TEST_CASE("singular calibration geometry exits 2") {
  Workspace ws;
  const auto data = ws.path("line.csv");
  {
    std::ofstream f(data);
    f << "point_id,x,y,z,rss_0\n1,-1,0,0,0.1\n2,0,0,0,0.2\n3,1,0,0,0.1\n4,2,0,0,0.05\n";
  }
  const auto r = run({"calibrate", "--data", data, "--led-index", "0", "--led-x", "0", "--led-y", "0", "--led-z", "2"});
  CHECK(r.code == 2);
  CHECK(r.out.empty());
}

TEST_CASE("calibrate reports bad row locations") {
  Workspace ws;
  const auto data = ws.path("bad.csv");
  {
    std::ofstream f(data);
    f << "point_id,x,y,z,rss_0\n1,-1,0,0,0.1\n2,0,zz,0,0.2\n";
  }
  const auto r = run({"calibrate", "--data", data, "--led-index", "0", "--led-x", "0", "--led-y", "0", "--led-z", "2"});
  CHECK(r.code == 1);
  CHECK(r.err.find("row 3") != std::string::npos);
  CHECK(run({"calibrate", "--data", data, "--led-index", "0", "--led-x", "0", "--led-y", "0", "--led-z", "2",
             "--subset-size", "2"})
            .code == 1);
}

TEST_CASE("simulate is deterministic across runs and thread counts") {
  Workspace ws;
  const auto sc = ws.path("small.json");
  {
    std::ofstream f(sc);
    f << R"({"trajectory": {"kind": "rectangle_loop", "inset": 1.0, "spacing": 1.0}})";
  }
  const std::vector<std::string> base{"simulate", "--scenario", sc, "--methods", "wls,gp,multilateration",
                                      "--training-size", "20", "--trials", "2", "--seed", "5"};
  const auto a = run(base);
  const auto b = run(base);
  auto threaded = base;
  threaded.insert(threaded.end(), {"--threads", "3"});
  const auto c = run(threaded);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out == c.out);
  CHECK(a.out.rfind("method,count,failures,p50_m,p99_m", 0) == 0);
  CHECK(a.out.find("\n\nmethod,error_m,cdf\n") != std::string::npos);

  auto seeded = base;
  seeded[seeded.size() - 1] = "6";
  CHECK(run(seeded).out != a.out);

  auto files = base;
  files.insert(files.end(), {"--out", ws.path("run")});
  REQUIRE(run(files).code == 0);
  CHECK(slurp(ws.path("run_stats.csv")).size() > 0);
  CHECK(slurp(ws.path("run_cdf.csv")).size() > 0);
  CHECK(slurp(ws.path("run_points.csv")).rfind("point,x,y,crlb_xy_m,crlb_xy_ground_m", 0) == 0);

  CHECK(run({"simulate", "--methods", "wls,wls"}).code == 1);
  CHECK(run({"simulate", "--methods", "kalman"}).code == 1);
  CHECK(run({"simulate", "--threads", "0"}).code == 1);
}

TEST_CASE("simulate replays a measurement file") {
  Workspace ws;
  const auto data = ws.path("data.csv");
  write_dataset(data, 1e-4);
  const auto sc = ws.path("exp.json");
  {
    std::ofstream f(sc);
    f << R"({"room": {"x_min": 0, "y_min": 0, "width": 3, "depth": 3}, "leds": [)"
      << R"({"position": [1.059, 2.470, 1.284]}, {"position": [2.428, 2.552, 1.284]},)"
      << R"({"position": [1.031, 0.630, 1.284]}, {"position": [2.402, 0.582, 1.284]}],)"
      << R"("trajectory": [], "training_points": []})";
  }
  const std::vector<std::string> args{"simulate", "--scenario", sc, "--data", data, "--training-size", "9",
                                      "--draws", "3", "--seed", "2"};
  const auto a = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == run(args).out);
  CHECK(a.out.find("method,draw,p50_m,p99_m,median_crlb_xy_m") != std::string::npos);
}

TEST_CASE("verify reports measured and expected values") {
  const auto r = run({"verify", "--suite", "prop1", "--seed", "3", "--scale", "0.02"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("suite,check,measured,expected,tolerance,result\n", 0) == 0);
  CHECK(r.out.find("prop1,overall,,,,PASS") != std::string::npos);
  CHECK(run({"verify", "--suite", "prop1", "--scale", "2"}).code == 1);
}
