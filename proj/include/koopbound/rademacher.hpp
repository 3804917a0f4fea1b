#pragma once

#include "koopbound/matrix_analysis.hpp"
#include "koopbound/network.hpp"

#include <cstdint>
#include <vector>

namespace koopbound {

enum class GradientMode { analytic, central_difference };

struct EstimatorConfig {
  int num_sigma = 64;
  int restarts = 8;
  int steps = 300;
  double step_size = 0.05;
  double step_decay = 0.99;
  std::uint64_t seed = 0;
  GradientMode gradient_mode = GradientMode::analytic;
  // The function class fixes g; flipping this adds the final-map coefficients
  // c_t to the ascent variables (unconstrained -- the sup is then over a
  // strictly larger class).
  bool optimize_final_map = false;
  bool optimize_biases = true;
  int threads = 1;
};

struct RademacherEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  int num_sigma_samples = 0;
  int restarts_per_sample = 0;
  std::vector<double> best_objective_per_sample;
  long long total_iterations = 0;
  long long projection_count = 0;
  int discarded_restarts = 0;
  bool final_map_optimized = false;
};

struct OracleResult {
  double exact_value = 0.0;
  int class_size = 0;
  long long sigma_space_size = 0;
};

// Free parameters of the inner maximization.
struct NetworkParams {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  std::vector<Vector> final_coeffs;  // populated only when c_t are optimized

  static NetworkParams from_network(const NetworkSpec& net, bool with_coeffs);
  void apply_to(NetworkSpec& net) const;
};

// Inner expression of the empirical complexity at one sign draw:
// (1/n) |sum_i <sigma_i, values_i>|. values and signs are n x m.
double fixed_function_rademacher(const Matrix& values, const Matrix& signs);

// Signed objective (1/n) sum_i <sigma_i, f(x_i)> for the network obtained by
// substituting params into the template. No absolute value.
double rademacher_objective(const NetworkSpec& templ, const NetworkParams& params,
                            const Matrix& signs, const std::vector<Vector>& data);

// Gradient of rademacher_objective in the same layout as params. Analytic
// mode backpropagates through the closed-form network; central differences
// use step 1e-5 (1 + |theta_k|) per coordinate.
NetworkParams gradient_of_objective(const NetworkSpec& templ,
                                    const NetworkParams& params,
                                    const Matrix& signs,
                                    const std::vector<Vector>& data,
                                    GradientMode mode, bool with_coeffs);

// Monte-Carlo lower-bound estimate of the empirical vector-valued Rademacher
// complexity over the constrained class: per sign draw, projected gradient
// ascent over weights (project_to_class after every step) and biases, both
// signs of the objective, best over restarts; mean +/- stderr over draws.
// Iterates stay feasible, so the estimate is a consistent lower bound.
RademacherEstimate estimate_sup(const NetworkSpec& templ, const WeightClassSpec& cls,
                                const std::vector<Vector>& data,
                                const EstimatorConfig& config);

// estimate_sup with the continuous projection replaced by nearest-grid-point
// snapping onto an explicit finite class. Restarts cycle through the grid as
// starting points, so restarts >= grid size makes the per-draw max exact.
RademacherEstimate estimate_sup_on_grid(const std::vector<NetworkSpec>& grid,
                                        const std::vector<Vector>& data,
                                        const EstimatorConfig& config);

// Exact value of the empirical complexity for a finite class by full
// enumeration of all 2^{nm} sign patterns; requires n*m <= 16.
OracleResult brute_force_oracle(const std::vector<NetworkSpec>& grid,
                                const std::vector<Vector>& data, int m);

}  // namespace koopbound
