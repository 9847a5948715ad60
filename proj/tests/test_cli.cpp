#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using hsc::cli::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "hsc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = hsc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / "hsc_cli_tests";
  fs::create_directories(d);
  return d;
}

std::string write(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string write(const std::string& name, const json& j) { return write(name, j.dump(2)); }

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

json reference_model() {
  return {{"beta0", 2.0}, {"r", 3.0}, {"tau", 1.0}, {"T", 1.0}, {"delta", 0.5}, {"K", 0.1}, {"gamma", 0.2}};
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  FAIL("missing column " << name);
  return 0;
}

}  // namespace

TEST_CASE("check reports the hypotheses of the reference scenario") {
  const auto cfg = write("check.json", json{{"model", reference_model()}});
  const auto r = run({"check", "--config", cfg});
  REQUIRE(r.code == 0);
  const json rep = json::parse(r.out);
  CHECK(rep["H1"] == true);
  CHECK(rep["H2"] == true);
  CHECK(rep["H3"] == true);
  CHECK(rep["H3prime"] == false);
  CHECK(rep["tau_window"]["contains_tau"] == true);
}

TEST_CASE("bare model objects are accepted") {
  const auto r = run({"check", "--config", write("bare.json", reference_model())});
  CHECK(r.code == 0);
}

TEST_CASE("check reports H0 violations and still exits 0") {
  json m = reference_model();
  m["K"] = 1.3;
  const auto r = run({"check", "--config", write("h0.json", json{{"model", m}})});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["H0"] == false);
}

TEST_CASE("constant-coefficient orbit CSV sits at the closed-form equilibrium") {
  const auto cfg = write("orbit.json", json{{"model", reference_model()}});
  const auto out = (scratch() / "orbit.csv").string();
  const auto r = run({"orbit", "--config", cfg, "--out", out});
  REQUIRE(r.code == 0);
  const double qbar = hsc::equilibrium(hsc::ModelParams::constant(2.0, 3.0, 1.0, 1.0, 0.5, 0.1, 0.2)).Q;
  const auto rows = read_csv(out);
  REQUIRE(rows.size() > 100);
  CHECK(rows[0] == std::vector<std::string>{"t", "Q", "u"});
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK_THAT(std::stod(rows[i][1]), WithinAbs(qbar, 1e-9));
}

TEST_CASE("simulate with zero data writes zeros at full precision") {
  json cfg{{"model", reference_model()}, {"simulate", {{"Q0", 0.0}, {"phi", 0.0}, {"t_end", 3.0}, {"m", 16}, {"P", true}}}};
  const auto out = (scratch() / "sim.csv").string();
  const auto r = run({"simulate", "--config", write("sim.json", cfg), "--out", out});
  REQUIRE(r.code == 0);
  const auto rows = read_csv(out);
  CHECK(rows[0] == std::vector<std::string>{"t", "Q", "u", "P"});
  REQUIRE(rows.size() == 3 * 16 + 2);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(std::stod(rows[i][1]) == 0.0);
    CHECK(std::stod(rows[i][2]) == 0.0);
    CHECK(std::stod(rows[i][3]) == 0.0);
  }
  CHECK(rows[17][0] == "1");
  CHECK(rows[2][0] == "0.0625");
}

TEST_CASE("sweep over tau flips H3 where the delay window predicts") {
  json cfg{{"model", reference_model()}};
  std::vector<double> taus;
  for (int k = 0; k < 41; ++k) taus.push_back(0.1 + 0.1 * k);
  cfg["sweep"] = {{"parameter", "tau"}, {"values", taus}, {"command", "check"}};
  const auto out = (scratch() / "sweep_tau.csv").string();
  const auto r = run({"sweep", "--config", write("sweep_tau.json", cfg), "--out", out});
  REQUIRE(r.code == 0);
  const auto rows = read_csv(out);
  REQUIRE(rows.size() == taus.size() + 1);
  const auto h3 = column(rows[0], "H3");
  const auto w = hsc::tau_window(hsc::ModelParams::constant(2.0, 3.0, 1.0, 1.0, 0.5, 0.1, 0.2));
  int flips = 0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    CHECK(rows[i + 1][h3] == (w.contains(taus[i]) ? "1" : "0"));
    if (i > 0) flips += rows[i + 1][h3] != rows[i][h3];
  }
  CHECK(flips == 1);
}

TEST_CASE("sweep over the perturbation amplitude shrinks the orbit") {
  json m = reference_model();
  m["delta"] = {{"mean", 0.5}, {"harmonics", json::array({{{"m", 1}, {"cos", 0.05}}})}};
  json cfg{{"model", m}, {"sweep", {{"parameter", "delta.harmonics.0.cos"}, {"values", {0.05, 0.005, 0.0005}}, {"command", "orbit"}}}};
  const auto out = (scratch() / "sweep_eta.csv").string();
  const auto r = run({"sweep", "--config", write("sweep_eta.json", cfg), "--out", out});
  REQUIRE(r.code == 0);
  const auto rows = read_csv(out);
  REQUIRE(rows.size() == 4);
  const auto col = column(rows[0], "sup_dev_Qbar");
  const auto st = column(rows[0], "status");
  for (int i = 1; i <= 3; ++i) CHECK(rows[i][st] == "ok");
  CHECK(std::stod(rows[1][col]) > std::stod(rows[2][col]));
  CHECK(std::stod(rows[2][col]) > std::stod(rows[3][col]));
}

TEST_CASE("empty sweep gives a header-only CSV") {
  json cfg{{"model", reference_model()}, {"sweep", {{"parameter", "tau"}, {"values", json::array()}, {"command", "orbit"}}}};
  const auto r = run({"sweep", "--config", write("sweep_empty.json", cfg)});
  REQUIRE(r.code == 0);
  CHECK(r.out == "value,status,H0,H1,H2,H3,H3prime,residual,min_Q,max_Q,sup_dev_Qbar,in_box,converged\n");
}

TEST_CASE("configuration errors exit 64 with a location") {
  const auto bad = write("bad.json", std::string("{\n  \"model\": {\n    \"beta0\": 2.0,,\n  }\n}\n"));
  const auto r = run({"check", "--config", bad});
  CHECK(r.code == 64);
  CHECK_THAT(r.err, ContainsSubstring(":3:"));

  json m = reference_model();
  m["bogus"] = 1;
  const auto r2 = run({"check", "--config", write("unknown.json", json{{"model", m}})});
  CHECK(r2.code == 64);
  CHECK_THAT(r2.err, ContainsSubstring("model.bogus"));

  json cfg{{"model", reference_model()}, {"sweep", {{"parameter", "delta.harmonics.3.cos"}, {"values", {1.0}}}}};
  CHECK(run({"sweep", "--config", write("badpath.json", cfg)}).code == 64);
  CHECK(run({"check", "--config", (scratch() / "missing.json").string()}).code == 64);
  CHECK(run({"frobnicate"}).code == 64);
  CHECK(run({"check"}).code == 64);
}

TEST_CASE("hypothesis failures exit 2") {
  json m = reference_model();
  m["delta"] = 10.0;
  CHECK(run({"orbit", "--config", write("h3fail.json", json{{"model", m}})}).code == 2);
  CHECK(run({"stability", "--config", write("h3pfail.json", json{{"model", reference_model()}})}).code == 2);
}

TEST_CASE("non-convergence exits 1 with the report") {
  json m = reference_model();
  m["delta"] = {{"mean", 0.5}, {"harmonics", json::array({{{"m", 1}, {"cos", 0.05}}})}};
  json cfg{{"model", m}, {"orbit", {{"method", "poincare"}, {"max_iters", 1}}}};
  const auto r = run({"orbit", "--config", write("nonconv.json", cfg)});
  CHECK(r.code == 1);
  CHECK(json::parse(r.out)["converged"] == false);
}

TEST_CASE("spectrum and pde-compare produce their CSVs") {
  const auto cfg = write("spec.json", json{{"model", reference_model()}});
  const auto out = (scratch() / "spec.csv").string();
  const auto r = run({"spectrum", "--config", cfg, "--out", out});
  REQUIRE(r.code == 0);
  CHECK(read_csv(out)[0] == std::vector<std::string>{"tau", "k", "l"});
  const json rep = json::parse(r.out);
  CHECK(rep["intersects_unit_circle"] == true);

  const auto pout = (scratch() / "pde.csv").string();
  const auto rp = run({"pde-compare", "--config", cfg, "--out", pout});
  REQUIRE(rp.code == 0);
  CHECK(json::parse(rp.out)["max_rel_error"].get<double>() < 1e-2);
  CHECK(read_csv(pout)[0] == std::vector<std::string>{"t", "Q_pde", "u_pde", "Q", "u"});
}

#ifdef HSC_CLI_PATH
TEST_CASE("the installed binary runs the shipped configurations") {
  const std::string bin = HSC_CLI_PATH;
  const std::string dir = HSC_CONFIG_DIR;
  const std::string sink = " > " + (scratch() / "bin.out").string() + " 2>&1";
  CHECK(std::system((bin + " check --config " + dir + "/constant_h3.json" + sink).c_str()) == 0);
  CHECK(std::system((bin + " orbit --config " + dir + "/periodic_h3.json" + sink).c_str()) == 0);
  CHECK(std::system((bin + " stability --config " + dir + "/stable_h3prime.json" + sink).c_str()) == 0);
  CHECK(std::system((bin + " sweep --config " + dir + "/sweep_tau.json" + sink).c_str()) == 0);
}
#endif
