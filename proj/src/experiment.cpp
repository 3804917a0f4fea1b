#include "koopbound/experiment.hpp"

#include "koopbound/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace koopbound {

namespace {

const std::set<std::string> kKnownVariants = {
    "theorem_inv",     "corollary",          "theorem_inj",
    "remark_brownian", "hashimoto_alt",      "baseline_spectral",
    "baseline_frobenius"};

const std::set<std::string> kKnownAxes = {"width", "depth", "condition_number",
                                          "tasks", "n"};

std::uint64_t cell_stream(std::uint64_t master_seed, std::uint64_t tag) {
  return Rng::for_task(master_seed, tag).next_u64();
}

bool is_integral(double v) { return std::abs(v - std::round(v)) < 1e-9; }

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<Vector> generate_dataset(const DatasetConfig& config) {
  if (config.n < 1) throw std::invalid_argument("dataset: n must be >= 1");
  if (config.dim < 1) throw std::invalid_argument("dataset: dim must be >= 1");
  std::vector<Vector> points;
  points.reserve(config.n);
  Rng rng = Rng::for_task(config.seed, 0x0da7aULL);
  switch (config.distribution) {
    case DatasetConfig::Distribution::unit_sphere:
      for (int i = 0; i < config.n; ++i) {
        Vector x(config.dim);
        double norm = 0.0;
        do {
          for (int j = 0; j < config.dim; ++j) x(j) = rng.normal();
          norm = x.norm();
        } while (norm < 1e-12);
        points.push_back(x / norm);
      }
      break;
    case DatasetConfig::Distribution::gaussian:
      for (int i = 0; i < config.n; ++i) {
        Vector x(config.dim);
        for (int j = 0; j < config.dim; ++j) x(j) = rng.normal();
        points.push_back(x);
      }
      break;
    case DatasetConfig::Distribution::grid: {
      int side = static_cast<int>(std::ceil(
          std::pow(static_cast<double>(config.n), 1.0 / config.dim)));
      side = std::max(side, 1);
      for (int i = 0; i < config.n; ++i) {
        Vector x(config.dim);
        int rest = i;
        for (int j = 0; j < config.dim; ++j) {
          int digit = rest % side;
          rest /= side;
          x(j) = side == 1 ? 0.0 : -1.0 + 2.0 * digit / (side - 1);
        }
        points.push_back(x);
      }
      break;
    }
  }
  return points;
}

namespace {

std::string distribution_name(DatasetConfig::Distribution d) {
  switch (d) {
    case DatasetConfig::Distribution::unit_sphere: return "unit_sphere";
    case DatasetConfig::Distribution::gaussian: return "gaussian";
    case DatasetConfig::Distribution::grid: return "grid";
  }
  return "unit_sphere";
}

DatasetConfig::Distribution distribution_from(const std::string& s) {
  if (s == "unit_sphere") return DatasetConfig::Distribution::unit_sphere;
  if (s == "gaussian") return DatasetConfig::Distribution::gaussian;
  if (s == "grid") return DatasetConfig::Distribution::grid;
  throw std::invalid_argument("unknown dataset distribution: " + s);
}

std::string recipe_name(WeightRecipe r) {
  switch (r) {
    case WeightRecipe::orthogonal: return "orthogonal";
    case WeightRecipe::scaled_orthogonal: return "scaled_orthogonal";
    case WeightRecipe::conditioned: return "conditioned";
  }
  return "orthogonal";
}

WeightRecipe recipe_from(const std::string& s) {
  if (s == "orthogonal") return WeightRecipe::orthogonal;
  if (s == "scaled_orthogonal") return WeightRecipe::scaled_orthogonal;
  if (s == "conditioned") return WeightRecipe::conditioned;
  throw std::invalid_argument("unknown weight recipe: " + s);
}

}  // namespace

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig config;
  const Json& network = j.at("network");
  if (network.contains("generator")) {
    const Json& g = network.at("generator");
    NetworkGeneratorConfig gen;
    if (g.contains("widths")) {
      gen.widths = g.at("widths").get<std::vector<int>>();
    } else {
      int width = g.at("width").get<int>();
      int depth = g.at("depth").get<int>();
      gen.widths.assign(depth + 1, width);
    }
    if (g.contains("tasks")) gen.tasks = g.at("tasks").get<int>();
    if (g.contains("output_dim")) gen.output_dim = g.at("output_dim").get<int>();
    if (g.contains("recipe")) gen.recipe = recipe_from(g.at("recipe").get<std::string>());
    if (g.contains("scale")) gen.scale = g.at("scale").get<double>();
    if (g.contains("condition_target"))
      gen.condition_target = g.at("condition_target").get<double>();
    if (g.contains("bias_scale")) gen.bias_scale = g.at("bias_scale").get<double>();
    if (g.contains("coeff_scale")) gen.coeff_scale = g.at("coeff_scale").get<double>();
    if (g.contains("activation")) gen.activation = g.at("activation").get<ActivationSpec>();
    if (g.contains("sobolev_orders"))
      gen.sobolev_orders = g.at("sobolev_orders").get<std::vector<double>>();
    if (g.contains("seed")) gen.seed = g.at("seed").get<std::uint64_t>();
    config.generator = std::move(gen);
  }
  if (network.contains("file"))
    config.network_file = network.at("file").get<std::string>();

  config.weight_class = j.at("weight_class").get<WeightClassSpec>();

  if (j.contains("kernel")) {
    const Json& k = j.at("kernel");
    if (k.contains("matern_smoothness"))
      config.kernel.matern_smoothness = k.at("matern_smoothness").get<double>();
    if (k.contains("length_scale"))
      config.kernel.length_scale = k.at("length_scale").get<double>();
    if (k.contains("amplitude")) config.kernel.amplitude = k.at("amplitude").get<double>();
    if (k.contains("output_diagonals"))
      config.kernel.output_diagonals =
          k.at("output_diagonals").get<std::vector<std::vector<double>>>();
  }

  const Json& d = j.at("dataset");
  config.dataset.n = d.at("n").get<int>();
  if (d.contains("distribution"))
    config.dataset.distribution = distribution_from(d.at("distribution").get<std::string>());
  if (d.contains("seed")) config.dataset.seed = d.at("seed").get<std::uint64_t>();

  if (j.contains("variants"))
    config.variants = j.at("variants").get<std::vector<std::string>>();
  if (j.contains("estimator"))
    config.estimator = j.at("estimator").get<EstimatorConfig>();
  if (j.contains("sweep")) {
    for (const auto& a : j.at("sweep")) {
      SweepAxis axis;
      axis.name = a.at("axis").get<std::string>();
      axis.values = a.at("values").get<std::vector<double>>();
      config.sweep.push_back(std::move(axis));
    }
  }
  if (j.contains("output_dir")) config.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("master_seed")) config.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("project_to_class"))
    config.project_to_weight_class = j.at("project_to_class").get<bool>();
  return config;
}

Json experiment_config_to_json(const ExperimentConfig& config) {
  Json j;
  Json network;
  if (config.generator) {
    const auto& g = *config.generator;
    Json gen{{"widths", g.widths},
             {"tasks", g.tasks},
             {"output_dim", g.output_dim},
             {"recipe", recipe_name(g.recipe)},
             {"scale", g.scale},
             {"condition_target", g.condition_target},
             {"bias_scale", g.bias_scale},
             {"coeff_scale", g.coeff_scale},
             {"activation", g.activation},
             {"seed", g.seed}};
    if (!g.sobolev_orders.empty()) gen["sobolev_orders"] = g.sobolev_orders;
    network["generator"] = std::move(gen);
  }
  if (config.network_file) network["file"] = *config.network_file;
  j["network"] = std::move(network);
  j["weight_class"] = config.weight_class;
  Json kernel{{"matern_smoothness", config.kernel.matern_smoothness},
              {"length_scale", config.kernel.length_scale},
              {"amplitude", config.kernel.amplitude}};
  if (!config.kernel.output_diagonals.empty())
    kernel["output_diagonals"] = config.kernel.output_diagonals;
  j["kernel"] = std::move(kernel);
  j["dataset"] = Json{{"n", config.dataset.n},
                      {"distribution", distribution_name(config.dataset.distribution)},
                      {"seed", config.dataset.seed}};
  j["variants"] = config.variants;
  if (config.estimator) j["estimator"] = *config.estimator;
  if (!config.sweep.empty()) {
    Json sweep = Json::array();
    for (const auto& axis : config.sweep)
      sweep.push_back(Json{{"axis", axis.name}, {"values", axis.values}});
    j["sweep"] = std::move(sweep);
  }
  if (!config.output_dir.empty()) j["output_dir"] = config.output_dir;
  j["master_seed"] = config.master_seed;
  j["project_to_class"] = config.project_to_weight_class;
  return j;
}

ValidationReport validate_experiment(const ExperimentConfig& config) {
  ValidationReport report;
  auto fail = [&](const std::string& path, const std::string& message) {
    report.errors.push_back(path + ": " + message);
  };

  if (config.generator.has_value() == config.network_file.has_value())
    fail("network", "exactly one of generator or file must be given");

  bool has_axis_width = false, has_axis_depth = false, has_axis_tasks = false,
       has_axis_cond = false;
  for (std::size_t i = 0; i < config.sweep.size(); ++i) {
    const SweepAxis& axis = config.sweep[i];
    std::ostringstream path;
    path << "sweep[" << i << "]";
    if (!kKnownAxes.count(axis.name)) {
      fail(path.str(), "unknown axis '" + axis.name +
                           "' (known: width, depth, condition_number, tasks, n)");
      continue;
    }
    if (axis.values.empty()) fail(path.str(), "axis value list must be non-empty");
    for (double v : axis.values) {
      if (axis.name == "condition_number") {
        if (!(v >= 1.0)) fail(path.str(), "condition_number values must be >= 1");
      } else if (!is_integral(v) || v < 1.0) {
        fail(path.str(), "axis '" + axis.name + "' needs positive integer values");
      }
    }
    if (axis.name == "width") has_axis_width = true;
    if (axis.name == "depth") has_axis_depth = true;
    if (axis.name == "tasks") has_axis_tasks = true;
    if (axis.name == "condition_number") has_axis_cond = true;
  }

  int m = 1;
  std::vector<int> base_widths;
  if (config.generator) {
    const auto& g = *config.generator;
    m = g.output_dim;
    base_widths = g.widths;
    if (g.widths.size() < 2)
      fail("network.generator.widths", "must list d_0..d_L (at least two entries)");
    for (std::size_t i = 0; i + 1 < g.widths.size(); ++i)
      if (g.widths[i + 1] < g.widths[i])
        fail("network.generator.widths",
             "widths must be nondecreasing (injective orientation)");
    for (int w : g.widths)
      if (w < 1) fail("network.generator.widths", "widths must be positive");
    if (g.tasks < 1) fail("network.generator.tasks", "must be >= 1");
    if (g.output_dim < 1) fail("network.generator.output_dim", "must be >= 1");
    if (!g.sobolev_orders.empty()) {
      if (g.sobolev_orders.size() != g.widths.size())
        fail("network.generator.sobolev_orders", "must have length L+1");
      for (std::size_t l = 0;
           l < std::min(g.sobolev_orders.size(), g.widths.size()); ++l) {
        if (!(g.sobolev_orders[l] > 0.5 * g.widths[l])) {
          std::ostringstream msg;
          msg << "s_" << l << " = " << g.sobolev_orders[l]
              << " violates the s_l > d_l/2 condition (d_" << l << " = "
              << g.widths[l] << ")";
          fail("network.generator.sobolev_orders", msg.str());
        }
      }
      if (has_axis_width || has_axis_depth)
        fail("network.generator.sobolev_orders",
             "explicit orders cannot be combined with width/depth sweeps");
    }
    try {
      g.activation.validate();
    } catch (const std::exception& e) {
      fail("network.generator.activation", e.what());
    }
  }
  if (config.network_file) {
    if (!std::filesystem::exists(*config.network_file)) {
      fail("network.file", "referenced file does not exist: " + *config.network_file);
    } else {
      try {
        std::ifstream in(*config.network_file);
        Json jn = Json::parse(in);
        NetworkSpec net = jn.get<NetworkSpec>();
        net.validate();
        m = net.output_dim;
        base_widths.push_back(net.input_dim());
        for (const auto& layer : net.layers)
          base_widths.push_back(static_cast<int>(layer.weight.rows()));
      } catch (const std::exception& e) {
        fail("network.file", std::string("invalid network file: ") + e.what());
      }
    }
    if (has_axis_width || has_axis_depth || has_axis_tasks || has_axis_cond)
      fail("sweep", "width/depth/tasks/condition_number axes need a generator network");
  }

  try {
    config.weight_class.validate();
  } catch (const std::exception& e) {
    fail("weight_class", e.what());
  }
  // class feasibility at every width the sweep can reach
  std::vector<int> dims;
  for (int w : base_widths) dims.push_back(w);
  for (const auto& axis : config.sweep)
    if (axis.name == "width")
      for (double v : axis.values)
        if (is_integral(v) && v >= 1.0) dims.push_back(static_cast<int>(v));
  for (int d : dims) {
    if (!config.weight_class.feasible_for(d)) {
      std::ostringstream msg;
      msg << "class is empty at d = " << d << ": C^d = "
          << std::pow(config.weight_class.operator_norm_cap, d) << " < D = "
          << config.weight_class.det_floor;
      fail("weight_class", msg.str());
      break;
    }
  }

  double nu = config.kernel.matern_smoothness;
  if (std::abs(nu - 0.5) > 1e-9 && std::abs(nu - 1.5) > 1e-9 &&
      std::abs(nu - 2.5) > 1e-9)
    fail("kernel.matern_smoothness", "must be one of 1/2, 3/2, 5/2");
  if (!(config.kernel.length_scale > 0.0)) fail("kernel.length_scale", "must be > 0");
  if (!(config.kernel.amplitude > 0.0)) fail("kernel.amplitude", "must be > 0");
  int tasks_base = config.generator ? config.generator->tasks : 1;
  if (!config.kernel.output_diagonals.empty()) {
    for (std::size_t t = 0; t < config.kernel.output_diagonals.size(); ++t) {
      const auto& diag = config.kernel.output_diagonals[t];
      if (static_cast<int>(diag.size()) != m)
        fail("kernel.output_diagonals", "each diagonal must have length m");
      for (double v : diag)
        if (v < 0.0) fail("kernel.output_diagonals", "diagonals must be nonnegative");
    }
    std::size_t count = config.kernel.output_diagonals.size();
    if (has_axis_tasks) {
      if (count > 1)
        fail("kernel.output_diagonals",
             "with a tasks sweep, give zero or one shared diagonal");
    } else if (count != 1 && count != static_cast<std::size_t>(tasks_base)) {
      fail("kernel.output_diagonals", "need 1 or T diagonals");
    }
  }

  if (config.dataset.n < 1) fail("dataset.n", "must be >= 1");

  for (std::size_t i = 0; i < config.variants.size(); ++i)
    if (!kKnownVariants.count(config.variants[i]))
      fail("variants[" + std::to_string(i) + "]",
           "unknown variant '" + config.variants[i] + "'");

  if (config.estimator) {
    if (config.estimator->num_sigma < 1) fail("estimator.num_sigma", "must be >= 1");
    if (config.estimator->restarts < 1) fail("estimator.restarts", "must be >= 1");
    if (config.estimator->steps < 0) fail("estimator.steps", "must be >= 0");
    if (!(config.estimator->step_size > 0.0)) fail("estimator.step_size", "must be > 0");
  }
  return report;
}

ConfigLoadResult load_experiment_config(const std::string& path) {
  ConfigLoadResult result;
  std::ifstream in(path);
  if (!in) {
    result.errors.push_back(path + ": cannot open file");
    return result;
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    // byte offset -> line:column anchor
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream msg;
    msg << path << ":" << line << ":" << col << ": " << e.what();
    result.errors.push_back(msg.str());
    return result;
  }
  ExperimentConfig config;
  try {
    config = experiment_config_from_json(j);
  } catch (const std::exception& e) {
    result.errors.push_back(path + ": " + e.what());
    return result;
  }
  ValidationReport validation = validate_experiment(config);
  if (!validation.valid()) {
    for (const auto& err : validation.errors)
      result.errors.push_back(path + ": " + err);
    return result;
  }
  result.config = std::move(config);
  return result;
}

bool ExperimentReport::any_failed() const {
  for (const auto& cell : cells)
    if (cell.failed()) return true;
  return false;
}

namespace {

struct CellPlan {
  int index = 0;
  std::vector<std::pair<std::string, double>> axis_values;  // swept axes only
  double axis(const std::string& name, double fallback) const {
    for (const auto& [k, v] : axis_values)
      if (k == name) return v;
    return fallback;
  }
};

std::vector<CellPlan> enumerate_cells(const ExperimentConfig& config) {
  std::vector<CellPlan> cells;
  std::size_t total = 1;
  for (const auto& axis : config.sweep) total *= axis.values.size();
  for (std::size_t idx = 0; idx < total; ++idx) {
    CellPlan plan;
    plan.index = static_cast<int>(idx);
    std::size_t rest = idx;
    // last axis varies fastest
    std::vector<std::size_t> digits(config.sweep.size(), 0);
    for (std::size_t a = config.sweep.size(); a-- > 0;) {
      digits[a] = rest % config.sweep[a].values.size();
      rest /= config.sweep[a].values.size();
    }
    for (std::size_t a = 0; a < config.sweep.size(); ++a)
      plan.axis_values.emplace_back(config.sweep[a].name,
                                    config.sweep[a].values[digits[a]]);
    cells.push_back(std::move(plan));
  }
  return cells;
}

MultiTaskKernelConfig build_kernel(const ExperimentConfig& config,
                                   const NetworkSpec& net) {
  MultiTaskKernelConfig kc;
  int d0 = net.input_dim();
  int m = net.output_dim;
  for (int t = 0; t < net.tasks; ++t) {
    MultiTaskKernelConfig::Task task;
    task.kernel.input_dim = d0;
    task.kernel.sobolev_order = 0.5 * d0 + config.kernel.matern_smoothness;
    task.kernel.length_scale = config.kernel.length_scale;
    task.kernel.amplitude = config.kernel.amplitude;
    if (config.kernel.output_diagonals.empty()) {
      task.output_matrix = Matrix::Identity(m, m);
    } else {
      const auto& diag =
          config.kernel.output_diagonals.size() == 1
              ? config.kernel.output_diagonals.front()
              : config.kernel.output_diagonals.at(static_cast<std::size_t>(t));
      task.output_matrix = Matrix::Zero(m, m);
      for (int i = 0; i < m; ++i) task.output_matrix(i, i) = diag.at(i);
    }
    kc.tasks.push_back(std::move(task));
  }
  return kc;
}

CellResult run_cell(const ExperimentConfig& config, const CellPlan& plan) {
  CellResult cell;
  cell.index = plan.index;
  try {
    // resolve the network for this cell
    NetworkSpec net;
    double condition_target = 0.0;
    if (config.generator) {
      NetworkGeneratorConfig gen = *config.generator;
      int depth = static_cast<int>(gen.widths.size()) - 1;
      depth = static_cast<int>(plan.axis("depth", depth));
      int width = static_cast<int>(plan.axis("width", 0.0));
      if (width > 0) {
        gen.widths.assign(depth + 1, width);
      } else if (depth + 1 != static_cast<int>(gen.widths.size())) {
        gen.widths.assign(depth + 1, gen.widths.front());
      }
      double cond = plan.axis("condition_number", 0.0);
      if (cond > 0.0) {
        gen.recipe = WeightRecipe::conditioned;
        gen.condition_target = cond;
      }
      gen.tasks = static_cast<int>(plan.axis("tasks", gen.tasks));
      gen.seed = cell_stream(config.master_seed,
                             3ULL * static_cast<std::uint64_t>(plan.index) + 1ULL);
      condition_target =
          gen.recipe == WeightRecipe::conditioned ? gen.condition_target : 0.0;
      net = generate_network(gen);
    } else {
      std::ifstream in(*config.network_file);
      if (!in)
        throw std::runtime_error("cannot open network file " + *config.network_file);
      Json jn = Json::parse(in);
      net = jn.get<NetworkSpec>();
      net.validate();
    }

    if (config.project_to_weight_class)
      for (auto& layer : net.layers)
        layer.weight = project_to_class(layer.weight, config.weight_class);

    // record the cell coordinates (swept and implied)
    cell.axes.emplace_back("width", static_cast<double>(net.input_dim()));
    cell.axes.emplace_back("depth", static_cast<double>(net.depth()));
    cell.axes.emplace_back("tasks", static_cast<double>(net.tasks));
    cell.axes.emplace_back("output_dim", static_cast<double>(net.output_dim));
    int n = static_cast<int>(plan.axis("n", config.dataset.n));
    cell.axes.emplace_back("n", static_cast<double>(n));
    cell.axes.emplace_back("condition_number", condition_target);

    MultiTaskKernelConfig kernel = build_kernel(config, net);

    for (const auto& variant : config.variants) {
      if (variant == "theorem_inv")
        cell.bounds.push_back(theorem_inv_bound(net, config.weight_class, kernel, n));
      else if (variant == "corollary")
        cell.bounds.push_back(corollary_bound(net, config.weight_class, kernel, n));
      else if (variant == "theorem_inj")
        cell.bounds.push_back(theorem_inj_bound(net, config.weight_class, kernel, n));
      else if (variant == "remark_brownian")
        cell.bounds.push_back(remark_brownian_bound(net));
      else if (variant == "hashimoto_alt")
        cell.bounds.push_back(hashimoto_alt_bound(net));
      else if (variant == "baseline_spectral")
        cell.bounds.push_back(baseline_bounds(net, n)[0]);
      else if (variant == "baseline_frobenius")
        cell.bounds.push_back(baseline_bounds(net, n)[1]);
      else
        throw std::invalid_argument("unknown variant " + variant);
    }
    if (cell.bounds.size() > 1) {
      BoundReport combined;
      combined.variant = "combined";
      const BoundReport* best = &cell.bounds.front();
      for (const auto& b : cell.bounds)
        if (b.total < best->total) best = &b;
      combined.prefactor = 1.0;
      combined.total = best->total;
      combined.notes.push_back("min over computed variants; winner: " + best->variant);
      cell.bounds.push_back(std::move(combined));
    }

    if (config.estimator) {
      DatasetConfig ds = config.dataset;
      ds.n = n;
      ds.dim = net.input_dim();
      ds.seed = config.dataset.seed ^ cell_stream(config.master_seed, 0ULL);
      std::vector<Vector> data = generate_dataset(ds);
      EstimatorConfig est = *config.estimator;
      est.seed = cell_stream(config.master_seed,
                             3ULL * static_cast<std::uint64_t>(plan.index) + 2ULL);
      cell.estimate = estimate_sup(net, config.weight_class, data, est);
    }
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, int jobs) {
  auto t0 = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.config_echo = experiment_config_to_json(config);
  report.master_seed = config.master_seed;

  std::vector<CellPlan> plans = enumerate_cells(config);
  report.cells.resize(plans.size());
  if (jobs <= 0)
    jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int num_cells = static_cast<int>(plans.size());
  if (jobs > 1 && num_cells > 1) {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(jobs, num_cells); ++t)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < num_cells; i = next.fetch_add(1))
          report.cells[i] = run_cell(config, plans[i]);
      });
    for (auto& th : pool) th.join();
  } else {
    for (int i = 0; i < num_cells; ++i) report.cells[i] = run_cell(config, plans[i]);
  }

  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

Json report_to_json(const ExperimentReport& report) {
  Json cells = Json::array();
  for (const auto& cell : report.cells) {
    Json axes;
    for (const auto& [k, v] : cell.axes) axes[k] = v;
    Json jc{{"index", cell.index}, {"axes", std::move(axes)}};
    jc["bounds"] = cell.bounds;
    if (cell.estimate)
      jc["estimate"] = *cell.estimate;
    else
      jc["estimate"] = nullptr;
    jc["error"] = cell.error.empty() ? Json(nullptr) : Json(cell.error);
    cells.push_back(std::move(jc));
  }
  return Json{{"config", report.config_echo},
              {"tool_version", report.tool_version},
              {"master_seed", report.master_seed},
              {"wall_clock_seconds", report.wall_clock_seconds},
              {"cells", std::move(cells)}};
}

std::string bounds_csv(const ExperimentReport& report) {
  std::size_t max_layers = 0;
  for (const auto& cell : report.cells)
    for (const auto& b : cell.bounds)
      max_layers = std::max(max_layers, b.layer_factors.size());

  std::ostringstream csv;
  csv << "cell_index,width,depth,tasks,output_dim,n_samples,condition_target,"
         "variant,prefactor,factor_product,total,alternate_prefactor_total,"
         "estimate_mean,estimate_stderr";
  for (std::size_t l = 1; l <= max_layers; ++l) csv << ",layer" << l << "_contribution";
  csv << "\n";

  auto axis_of = [](const CellResult& cell, const char* name) {
    for (const auto& [k, v] : cell.axes)
      if (k == name) return fmt17(v);
    return std::string();
  };
  for (const auto& cell : report.cells) {
    if (cell.failed()) continue;
    auto emit_row = [&](const BoundReport* bound) {
      csv << cell.index << "," << axis_of(cell, "width") << ","
          << axis_of(cell, "depth") << "," << axis_of(cell, "tasks") << ","
          << axis_of(cell, "output_dim") << "," << axis_of(cell, "n") << ","
          << axis_of(cell, "condition_number") << ",";
      if (bound) {
        csv << bound->variant << "," << fmt17(bound->prefactor) << ","
            << fmt17(bound->factor_product()) << "," << fmt17(bound->total) << ",";
        if (!std::isnan(bound->alternate_prefactor_total))
          csv << fmt17(bound->alternate_prefactor_total);
      } else {
        csv << "estimate,,,,";
      }
      csv << ",";
      if (cell.estimate)
        csv << fmt17(cell.estimate->mean) << "," << fmt17(cell.estimate->stderr_);
      else
        csv << ",";
      for (std::size_t l = 0; l < max_layers; ++l) {
        csv << ",";
        if (bound && l < bound->layer_factors.size())
          csv << fmt17(bound->layer_factors[l].contribution());
      }
      csv << "\n";
    };
    for (const auto& b : cell.bounds) emit_row(&b);
    if (cell.bounds.empty() && cell.estimate) emit_row(nullptr);
  }
  return csv.str();
}

std::vector<std::pair<std::string, std::string>> render_plots(
    const ExperimentReport& report, const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> plots;
  if (config.sweep.empty()) return plots;

  // cell lookup by swept-axis coordinates
  std::vector<CellPlan> plans = enumerate_cells(config);
  for (std::size_t target = 0; target < config.sweep.size(); ++target) {
    const SweepAxis& axis = config.sweep[target];
    if (axis.values.size() < 2) continue;
    std::map<std::string, std::vector<std::pair<double, double>>> series_points;
    for (std::size_t i = 0; i < plans.size(); ++i) {
      bool on_slice = true;
      double x = 0.0;
      for (std::size_t a = 0; a < config.sweep.size(); ++a) {
        double v = plans[i].axis_values[a].second;
        if (a == target)
          x = v;
        else if (v != config.sweep[a].values.front())
          on_slice = false;
      }
      if (!on_slice || report.cells[i].failed()) continue;
      for (const auto& b : report.cells[i].bounds)
        series_points[b.variant].emplace_back(x, b.total);
      if (report.cells[i].estimate)
        series_points["estimate"].emplace_back(x, report.cells[i].estimate->mean);
    }
    std::vector<PlotSeries> series;
    for (auto& [label, pts] : series_points) {
      if (pts.size() < 2) continue;
      std::sort(pts.begin(), pts.end());
      PlotSeries s;
      s.label = label;
      for (const auto& [x, y] : pts) {
        s.xs.push_back(x);
        s.ys.push_back(y);
      }
      series.push_back(std::move(s));
    }
    if (series.empty()) continue;
    plots.emplace_back(axis.name + ".svg", emit_plot(axis.name, series));
  }
  return plots;
}

void write_report_files(const ExperimentReport& report,
                        const ExperimentConfig& config,
                        const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "report.json");
    out << report_to_json(report).dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(out_dir) / "bounds.csv");
    out << bounds_csv(report);
  }
  auto plots = render_plots(report, config);
  if (!plots.empty()) {
    fs::create_directories(fs::path(out_dir) / "plots");
    for (const auto& [name, svg] : plots) {
      std::ofstream out(fs::path(out_dir) / "plots" / name);
      out << svg;
    }
  }
}

}  // namespace koopbound
