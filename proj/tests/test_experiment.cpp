#include "koopbound/experiment.hpp"
#include "koopbound/json_io.hpp"
#include "koopbound/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace koopbound;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  fs::path dir = fs::temp_directory_path() / "koopbound_test_experiment";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

Json base_config_json() {
  return Json{
      {"network",
       {{"generator",
         {{"widths", {2, 2}},
          {"recipe", "scaled_orthogonal"},
          {"scale", 0.9},
          {"activation", {{"kind", "identity"}}}}}}},
      {"weight_class", {{"kind", "invertible"}, {"C", 1.0}, {"D", 0.5}}},
      {"kernel", {{"matern_smoothness", 0.5}}},
      {"dataset", {{"n", 8}, {"distribution", "unit_sphere"}, {"seed", 3}}},
      {"variants", {"theorem_inv", "corollary", "baseline_spectral"}},
      {"master_seed", 42}};
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(KOOPBOUND_CLI_PATH) + " " + args;
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("generate_dataset shapes and determinism") {
  DatasetConfig ds;
  ds.n = 10;
  ds.dim = 3;
  ds.seed = 4;
  ds.distribution = DatasetConfig::Distribution::unit_sphere;
  auto a = generate_dataset(ds);
  auto b = generate_dataset(ds);
  REQUIRE(a.size() == 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].size() == 3);
    CHECK(a[i].norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((a[i] - b[i]).norm() == 0.0);
  }

  ds.distribution = DatasetConfig::Distribution::grid;
  ds.n = 9;
  ds.dim = 2;
  auto g = generate_dataset(ds);
  for (const auto& x : g) {
    CHECK(x.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("config validation accepts the sample and rejects bad configs") {
  ExperimentConfig ok = experiment_config_from_json(base_config_json());
  CHECK(validate_experiment(ok).valid());

  // s_0 = d_0/2 violates the embedding condition
  Json bad_order = base_config_json();
  bad_order["network"]["generator"]["sobolev_orders"] = {1.0, 1.5};
  ValidationReport r1 = validate_experiment(experiment_config_from_json(bad_order));
  CHECK_FALSE(r1.valid());
  bool cites_condition = false;
  for (const auto& e : r1.errors)
    if (e.find("s_l > d_l/2") != std::string::npos) cites_condition = true;
  CHECK(cites_condition);

  // empty class: C = 1, D = 2 at d = 2
  Json empty_class = base_config_json();
  empty_class["weight_class"]["D"] = 2.0;
  ValidationReport r2 = validate_experiment(experiment_config_from_json(empty_class));
  CHECK_FALSE(r2.valid());
  bool cites_empty = false;
  for (const auto& e : r2.errors)
    if (e.find("class is empty") != std::string::npos) cites_empty = true;
  CHECK(cites_empty);

  // unknown sweep axis
  Json bad_axis = base_config_json();
  bad_axis["sweep"] = Json::array({Json{{"axis", "learning_rate"}, {"values", {1.0}}}});
  CHECK_FALSE(validate_experiment(experiment_config_from_json(bad_axis)).valid());
}

TEST_CASE("parse errors carry line anchors") {
  fs::path dir = tmp_dir();
  fs::path bad = dir / "broken.json";
  write_file(bad, "{\n  \"network\": {\n  oops\n}\n");
  ConfigLoadResult loaded = load_experiment_config(bad.string());
  REQUIRE_FALSE(loaded.config.has_value());
  REQUIRE(loaded.errors.size() == 1);
  CHECK(loaded.errors[0].find(":3:") != std::string::npos);
}

TEST_CASE("single-cell run is a pass-through of direct library calls") {
  fs::path dir = tmp_dir();

  NetworkGeneratorConfig gen;
  gen.widths = {2, 2};
  gen.activation = ActivationSpec{};
  gen.bias_scale = 0.0;
  gen.seed = 9;
  NetworkSpec net = generate_network(gen);  // orthogonal layers
  Json net_json = net;
  fs::path net_path = dir / "net.json";
  write_file(net_path, net_json.dump());

  Json config_json = base_config_json();
  config_json["network"] = Json{{"file", net_path.string()}};
  config_json["weight_class"] = Json{{"kind", "orthogonal"}, {"C", 1.0}, {"D", 1.0}};
  ExperimentConfig config = experiment_config_from_json(config_json);
  REQUIRE(validate_experiment(config).valid());

  ExperimentReport report = run_experiment(config, 1);
  REQUIRE(report.cells.size() == 1);
  REQUIRE_FALSE(report.cells[0].failed());

  MultiTaskKernelConfig kc;
  ScalarKernelSpec ks;
  ks.input_dim = 2;
  ks.sobolev_order = 1.5;
  kc.tasks.push_back({ks, Matrix::Identity(1, 1)});
  WeightClassSpec cls{WeightClassKind::orthogonal, 1.0, 1.0};
  BoundReport direct = theorem_inv_bound(net, cls, kc, 8);

  bool found = false;
  for (const auto& b : report.cells[0].bounds)
    if (b.variant == "theorem_inv") {
      CHECK(b.total == direct.total);
      found = true;
    }
  CHECK(found);
}

TEST_CASE("width sweep with the orthogonal recipe keeps layer factors at one") {
  Json config_json = base_config_json();
  config_json["network"]["generator"]["recipe"] = "orthogonal";
  config_json["network"]["generator"]["widths"] = {2, 2, 2};
  config_json["weight_class"] = Json{{"kind", "orthogonal"}, {"C", 1.0}, {"D", 1.0}};
  config_json["variants"] = {"theorem_inv", "corollary"};
  config_json["sweep"] = Json::array(
      {Json{{"axis", "width"}, {"values", {2.0, 4.0, 8.0}}}});
  ExperimentConfig config = experiment_config_from_json(config_json);
  REQUIRE(validate_experiment(config).valid());

  ExperimentReport report = run_experiment(config, 1);
  REQUIRE(report.cells.size() == 3);
  for (const auto& cell : report.cells) {
    REQUIRE_FALSE(cell.failed());
    for (const auto& b : cell.bounds) {
      if (b.variant != "theorem_inv") continue;
      for (const auto& f : b.layer_factors)
        CHECK(f.contribution() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("reruns with one seed produce byte-identical CSV") {
  Json config_json = base_config_json();
  config_json["sweep"] =
      Json::array({Json{{"axis", "n"}, {"values", {4.0, 8.0}}}});
  config_json["estimator"] =
      Json{{"num_sigma", 6}, {"restarts", 2}, {"steps", 10}, {"seed", 1}};
  ExperimentConfig config = experiment_config_from_json(config_json);
  REQUIRE(validate_experiment(config).valid());

  std::string csv_a = bounds_csv(run_experiment(config, 1));
  std::string csv_b = bounds_csv(run_experiment(config, 1));
  CHECK(csv_a == csv_b);
  // parallel cells produce the same bytes
  std::string csv_p = bounds_csv(run_experiment(config, 2));
  CHECK(csv_a == csv_p);
}

TEST_CASE("CSV cells round-trip against the JSON report") {
  Json config_json = base_config_json();
  config_json["estimator"] =
      Json{{"num_sigma", 4}, {"restarts", 2}, {"steps", 5}, {"seed", 2}};
  ExperimentConfig config = experiment_config_from_json(config_json);
  ExperimentReport report = run_experiment(config, 1);
  REQUIRE_FALSE(report.any_failed());

  std::string csv = bounds_csv(report);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  std::vector<std::string> columns;
  {
    std::istringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) columns.push_back(col);
  }
  Json jreport = report_to_json(report);

  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    while (cells.size() < columns.size()) cells.push_back("");
    int cell_index = std::stoi(cells[0]);
    std::string variant = cells[7];
    const Json& jcell = jreport["cells"][cell_index];
    for (const auto& jb : jcell["bounds"]) {
      if (jb["variant"] != variant) continue;
      ++rows;
      double total_json = jb["total"].get<double>();
      double total_csv = std::stod(cells[10]);
      CHECK(std::abs(total_csv - total_json) <=
            1e-15 * std::max(1.0, std::abs(total_json)));
      double pref_json = jb["prefactor"].get<double>();
      CHECK(std::abs(std::stod(cells[8]) - pref_json) <=
            1e-15 * std::max(1.0, std::abs(pref_json)));
    }
    if (!cells[12].empty()) {
      double mean_json = jcell["estimate"]["mean"].get<double>();
      CHECK(std::abs(std::stod(cells[12]) - mean_json) <=
            1e-15 * std::max(1.0, std::abs(mean_json)));
    }
  }
  CHECK(rows >= 3);
}

TEST_CASE("emit_plot structure and determinism") {
  PlotSeries single{"estimate", {1.0, 2.0}, {0.5, 0.25}};
  std::string svg = emit_plot("n", {single});
  std::size_t count = 0, pos = 0;
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    ++count;
    pos += 9;
  }
  CHECK(count == 1);
  CHECK(svg.find("bound value") != std::string::npos);
  CHECK(svg.find(">n</text>") != std::string::npos);

  CHECK(emit_plot("n", {single}) == svg);

  // degenerate axis
  PlotSeries flat{"x", {2.0, 2.0}, {1.0, 2.0}};
  CHECK_THROWS_WITH_AS(emit_plot("n", {flat}), doctest::Contains("degenerate"),
                       std::invalid_argument);
  PlotSeries short_series{"x", {1.0}, {1.0}};
  CHECK_THROWS_AS(emit_plot("n", {short_series}), std::invalid_argument);
}

TEST_CASE("emit_plot output is well-formed XML") {
  Rng rng(81);
  std::vector<PlotSeries> series;
  for (int s = 0; s < 5; ++s) {
    PlotSeries ps;
    ps.label = "variant_" + std::to_string(s) + " <&> \"q\"";
    for (int i = 0; i < 10; ++i) {
      ps.xs.push_back(i);
      ps.ys.push_back(std::exp(rng.normal()));
    }
    series.push_back(std::move(ps));
  }
  std::string svg = emit_plot("width", series);
  CHECK(oracles::xml_well_formed(svg));
  std::size_t count = 0, pos = 0;
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    ++count;
    pos += 9;
  }
  CHECK(count == 5);
}

TEST_CASE("write_report_files produces the expected artifacts") {
  fs::path dir = tmp_dir() / "run_out";
  fs::remove_all(dir);

  Json config_json = base_config_json();
  config_json["sweep"] =
      Json::array({Json{{"axis", "n"}, {"values", {4.0, 8.0, 16.0}}}});
  ExperimentConfig config = experiment_config_from_json(config_json);
  ExperimentReport report = run_experiment(config, 1);
  write_report_files(report, config, dir.string());

  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "bounds.csv"));
  CHECK(fs::exists(dir / "plots" / "n.svg"));
  Json parsed = Json::parse(read_file(dir / "report.json"));
  CHECK(parsed["cells"].size() == 3);
  CHECK(parsed["tool_version"] == kToolVersion);
}

TEST_CASE("cell failures are isolated and reported") {
  // scaled-orthogonal layers are not orthogonal-class members; with
  // projection disabled the theorem call fails per cell
  Json config_json = base_config_json();
  config_json["weight_class"] = Json{{"kind", "orthogonal"}, {"C", 1.0}, {"D", 1.0}};
  config_json["project_to_class"] = false;
  ExperimentConfig config = experiment_config_from_json(config_json);
  ExperimentReport report = run_experiment(config, 1);
  REQUIRE(report.cells.size() == 1);
  CHECK(report.cells[0].failed());
  CHECK(report.any_failed());
  CHECK(report.cells[0].error.find("class") != std::string::npos);
}

TEST_CASE("cli validate/run/gen-network/bound exit codes") {
  fs::path dir = tmp_dir();

  fs::path good = dir / "good.json";
  Json config_json = base_config_json();
  config_json["output_dir"] = (dir / "cli_out").string();
  write_file(good, config_json.dump(2));
  CHECK(run_cli("validate " + good.string() + " > /dev/null 2>&1") == 0);

  fs::path invalid = dir / "invalid.json";
  Json bad = base_config_json();
  bad["weight_class"]["D"] = 2.0;  // empty class at d = 2
  write_file(invalid, bad.dump(2));
  CHECK(run_cli("validate " + invalid.string() + " > /dev/null 2>&1") == 2);

  CHECK(run_cli("run " + good.string() + " > /dev/null 2>&1") == 0);
  CHECK(fs::exists(dir / "cli_out" / "report.json"));

  // run with a failing cell exits 1
  fs::path failing = dir / "failing.json";
  Json fail_json = base_config_json();
  fail_json["weight_class"] = Json{{"kind", "orthogonal"}, {"C", 1.0}, {"D", 1.0}};
  fail_json["project_to_class"] = false;
  fail_json["output_dir"] = (dir / "cli_fail").string();
  write_file(failing, fail_json.dump(2));
  CHECK(run_cli("run " + failing.string() + " > /dev/null 2>&1") == 1);

  // gen-network + bound pipeline
  fs::path net_path = dir / "gen_net.json";
  CHECK(run_cli("gen-network --widths 2 2 --recipe orthogonal --activation identity "
                "--seed 4 -o " +
                net_path.string() + " > /dev/null 2>&1") == 0);
  fs::path class_path = dir / "class.json";
  write_file(class_path, R"({"kind":"orthogonal","C":1.0,"D":1.0})");
  fs::path kernel_path = dir / "kernel.json";
  Json kernel{{"tasks",
               Json::array({Json{{"kernel",
                                  {{"sobolev_order", 1.5}, {"input_dim", 2}}},
                                 {"output_matrix",
                                  {{"rows", 1}, {"cols", 1}, {"data", {1.0}}}}}})}};
  write_file(kernel_path, kernel.dump());
  fs::path bound_out = dir / "bound_out.json";
  CHECK(run_cli("bound " + net_path.string() + " " + class_path.string() + " " +
                kernel_path.string() + " --n 8 --variants theorem_inv corollary > " +
                bound_out.string() + " 2>/dev/null") == 0);
  Json bounds = Json::parse(read_file(bound_out));
  REQUIRE(bounds.size() == 2);
  CHECK(bounds[0]["total"].get<double>() > 0.0);

  // estimate subcommand
  fs::path est_config = dir / "est.json";
  Json est_json = base_config_json();
  est_json["estimator"] =
      Json{{"num_sigma", 4}, {"restarts", 2}, {"steps", 5}, {"seed", 6}};
  est_json["output_dir"] = (dir / "cli_est").string();
  write_file(est_config, est_json.dump(2));
  CHECK(run_cli("estimate " + est_config.string() + " > /dev/null 2>&1") == 0);
  Json est_report = Json::parse(read_file(dir / "cli_est" / "report.json"));
  CHECK_FALSE(est_report["cells"][0]["estimate"].is_null());

  // KOOPBOUND_OUT fallback when neither --out nor output_dir is given
  fs::path env_out = dir / "env_out";
  fs::path noout = dir / "noout.json";
  write_file(noout, base_config_json().dump(2));
  std::string cmd = "cd " + dir.string() + " && KOOPBOUND_OUT=" + env_out.string() +
                    " " + std::string(KOOPBOUND_CLI_PATH) + " run " + noout.string() +
                    " > /dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(fs::exists(env_out / "report.json"));
}
