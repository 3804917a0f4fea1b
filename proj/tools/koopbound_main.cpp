#include "koopbound/experiment.hpp"
#include "koopbound/json_io.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using koopbound::Json;

int exit_invalid() { return 2; }

std::string resolve_out_dir(const std::string& flag_value,
                            const std::string& config_value) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  if (const char* env = std::getenv("KOOPBOUND_OUT")) {
    if (*env) return env;
  }
  return "out";
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return Json::parse(in);
}

int cmd_validate(const std::string& config_path) {
  koopbound::ConfigLoadResult loaded = koopbound::load_experiment_config(config_path);
  if (!loaded.config) {
    for (const auto& err : loaded.errors) std::cerr << err << "\n";
    std::cerr << "invalid: " << loaded.errors.size() << " problem(s)\n";
    return exit_invalid();
  }
  std::cout << "valid\n";
  return 0;
}

int cmd_run(const std::string& config_path, int jobs, long long seed_override,
            bool has_seed_override, const std::string& out_flag, bool estimate_only) {
  koopbound::ConfigLoadResult loaded = koopbound::load_experiment_config(config_path);
  if (!loaded.config) {
    for (const auto& err : loaded.errors) std::cerr << err << "\n";
    return exit_invalid();
  }
  koopbound::ExperimentConfig config = *loaded.config;
  if (has_seed_override) config.master_seed = static_cast<std::uint64_t>(seed_override);
  if (estimate_only) {
    if (!config.estimator) {
      std::cerr << config_path << ": estimate mode needs an estimator section\n";
      return exit_invalid();
    }
    config.variants.clear();
  }
  std::string out_dir = resolve_out_dir(out_flag, config.output_dir);
  koopbound::ExperimentReport report = koopbound::run_experiment(config, jobs);
  koopbound::write_report_files(report, config, out_dir);

  int failed = 0;
  for (const auto& cell : report.cells) {
    if (cell.failed()) {
      ++failed;
      std::cerr << "cell " << cell.index << " failed: " << cell.error << "\n";
    }
  }
  std::cout << report.cells.size() - failed << "/" << report.cells.size()
            << " configurations completed; results in " << out_dir << "\n";
  return failed > 0 ? 1 : 0;
}

int cmd_bound(const std::string& network_path, const std::string& class_path,
              const std::string& kernel_path, int n,
              const std::vector<std::string>& variants) {
  try {
    koopbound::NetworkSpec net = read_json_file(network_path).get<koopbound::NetworkSpec>();
    net.validate();
    koopbound::WeightClassSpec cls =
        read_json_file(class_path).get<koopbound::WeightClassSpec>();
    koopbound::MultiTaskKernelConfig kernel =
        read_json_file(kernel_path).get<koopbound::MultiTaskKernelConfig>();

    Json out = Json::array();
    for (const auto& v : variants) {
      if (v == "theorem_inv")
        out.push_back(koopbound::theorem_inv_bound(net, cls, kernel, n));
      else if (v == "corollary")
        out.push_back(koopbound::corollary_bound(net, cls, kernel, n));
      else if (v == "theorem_inj")
        out.push_back(koopbound::theorem_inj_bound(net, cls, kernel, n));
      else if (v == "remark_brownian")
        out.push_back(koopbound::remark_brownian_bound(net));
      else if (v == "hashimoto_alt")
        out.push_back(koopbound::hashimoto_alt_bound(net));
      else if (v == "baseline_spectral")
        out.push_back(koopbound::baseline_bounds(net, n)[0]);
      else if (v == "baseline_frobenius")
        out.push_back(koopbound::baseline_bounds(net, n)[1]);
      else {
        std::cerr << "unknown variant " << v << "\n";
        return exit_invalid();
      }
    }
    std::cout << out.dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}

int cmd_gen_network(const std::vector<int>& widths, int width, int depth, int tasks,
                    int output_dim, const std::string& recipe, double scale,
                    double condition_target, double bias_scale, double coeff_scale,
                    const std::string& activation, double alpha, double beta,
                    unsigned long long seed, const std::string& out_path) {
  try {
    koopbound::NetworkGeneratorConfig gen;
    if (!widths.empty()) {
      gen.widths = widths;
    } else {
      if (width < 1 || depth < 1) {
        std::cerr << "give either --widths or both --width and --depth\n";
        return exit_invalid();
      }
      gen.widths.assign(depth + 1, width);
    }
    gen.tasks = tasks;
    gen.output_dim = output_dim;
    if (recipe == "orthogonal")
      gen.recipe = koopbound::WeightRecipe::orthogonal;
    else if (recipe == "scaled_orthogonal")
      gen.recipe = koopbound::WeightRecipe::scaled_orthogonal;
    else if (recipe == "conditioned")
      gen.recipe = koopbound::WeightRecipe::conditioned;
    else {
      std::cerr << "unknown recipe " << recipe << "\n";
      return exit_invalid();
    }
    gen.scale = scale;
    gen.condition_target = condition_target;
    gen.bias_scale = bias_scale;
    gen.coeff_scale = coeff_scale;
    if (activation == "identity")
      gen.activation.kind = koopbound::ActivationKind::identity;
    else if (activation == "smoothed_leaky_relu")
      gen.activation.kind = koopbound::ActivationKind::smoothed_leaky_relu;
    else if (activation == "tanh")
      gen.activation.kind = koopbound::ActivationKind::tanh;
    else {
      std::cerr << "unknown activation " << activation << "\n";
      return exit_invalid();
    }
    gen.activation.alpha = alpha;
    gen.activation.beta = beta;
    gen.seed = seed;
    koopbound::NetworkSpec net = koopbound::generate_network(gen);
    Json j = net;
    if (out_path.empty() || out_path == "-") {
      std::cout << j.dump(2) << "\n";
    } else {
      std::ofstream out(out_path);
      out << j.dump(2) << "\n";
      std::cout << "wrote " << out_path << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koopman-operator generalization bounds for multi-task networks"};
  app.require_subcommand(1);

  std::string config_path;
  auto* validate = app.add_subcommand("validate", "check an experiment config");
  validate->add_option("config", config_path, "experiment JSON file")->required();

  std::string run_config, run_out;
  int jobs = 0;
  long long seed_override = 0;
  auto* run = app.add_subcommand("run", "execute an experiment sweep");
  run->add_option("config", run_config, "experiment JSON file")->required();
  run->add_option("--jobs", jobs, "worker threads over sweep cells (0 = all cores)");
  auto* seed_opt = run->add_option("--seed", seed_override, "master seed override");
  run->add_option("--out", run_out, "output directory");

  std::string est_config, est_out;
  int est_jobs = 0;
  long long est_seed = 0;
  auto* estimate = app.add_subcommand("estimate", "run only the Rademacher estimator");
  estimate->add_option("config", est_config, "experiment JSON file")->required();
  estimate->add_option("--jobs", est_jobs, "worker threads over sweep cells");
  auto* est_seed_opt = estimate->add_option("--seed", est_seed, "master seed override");
  estimate->add_option("--out", est_out, "output directory");

  std::string net_path, class_path, kernel_path;
  int bound_n = 16;
  std::vector<std::string> bound_variants{"theorem_inv"};
  auto* bound = app.add_subcommand("bound", "compute bounds for explicit inputs");
  bound->add_option("network", net_path, "network JSON file")->required();
  bound->add_option("class", class_path, "weight class JSON file")->required();
  bound->add_option("kernel", kernel_path, "multi-task kernel JSON file")->required();
  bound->add_option("--n", bound_n, "sample count")->required();
  bound->add_option("--variants", bound_variants, "bound variants to compute");

  std::vector<int> gen_widths;
  int gen_width = 0, gen_depth = 0, gen_tasks = 1, gen_m = 1;
  std::string gen_recipe = "orthogonal", gen_activation = "smoothed_leaky_relu";
  double gen_scale = 1.0, gen_cond = 1.0, gen_bias = 0.1, gen_coeff = 1.0;
  double gen_alpha = 0.25, gen_beta = 1.0;
  unsigned long long gen_seed = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-network", "generate a synthetic network");
  gen->add_option("--widths", gen_widths, "layer widths d_0..d_L");
  gen->add_option("--width", gen_width, "uniform width");
  gen->add_option("--depth", gen_depth, "layer count L");
  gen->add_option("--tasks", gen_tasks, "task count T");
  gen->add_option("--output-dim", gen_m, "output dimension m");
  gen->add_option("--recipe", gen_recipe, "orthogonal|scaled_orthogonal|conditioned");
  gen->add_option("--scale", gen_scale, "gamma for scaled_orthogonal");
  gen->add_option("--condition-target", gen_cond, "kappa target for conditioned");
  gen->add_option("--bias-scale", gen_bias, "bias draw scale");
  gen->add_option("--coeff-scale", gen_coeff, "final map coefficient scale");
  gen->add_option("--activation", gen_activation, "identity|smoothed_leaky_relu|tanh");
  gen->add_option("--alpha", gen_alpha, "negative-side slope");
  gen->add_option("--beta", gen_beta, "smoothing scale");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("-o,--out", gen_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  if (*validate) return cmd_validate(config_path);
  if (*run)
    return cmd_run(run_config, jobs, seed_override, seed_opt->count() > 0, run_out,
                   false);
  if (*estimate)
    return cmd_run(est_config, est_jobs, est_seed, est_seed_opt->count() > 0, est_out,
                   true);
  if (*bound) return cmd_bound(net_path, class_path, kernel_path, bound_n, bound_variants);
  if (*gen)
    return cmd_gen_network(gen_widths, gen_width, gen_depth, gen_tasks, gen_m,
                           gen_recipe, gen_scale, gen_cond, gen_bias, gen_coeff,
                           gen_activation, gen_alpha, gen_beta, gen_seed, gen_out);
  return 0;
}
