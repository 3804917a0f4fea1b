#pragma once

#include "koopbound/kernels.hpp"
#include "koopbound/matrix_analysis.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace koopbound {

enum class ActivationKind { identity, smoothed_leaky_relu, tanh };

// smoothed_leaky_relu: sigma(x) = alpha x + (1-alpha) (x + sqrt(x^2+beta^2))/2,
// bijective on R with derivative in (alpha, 1).
struct ActivationSpec {
  ActivationKind kind = ActivationKind::identity;
  double alpha = 0.25;  // negative-side slope, in (0,1)
  double beta = 1.0;    // smoothing scale, > 0

  double eval(double x) const;
  double derivative(double x) const;
  void validate() const;
};

struct DerivativeBounds {
  double sup = 1.0;
  double inf = 1.0;
};

struct LayerSpec {
  Matrix weight;  // d_l x d_{l-1}
  Vector bias;    // length d_l
  std::optional<ActivationSpec> activation;  // none on the final layer
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;            // L >= 1
  FinalMapSpec final_map;
  std::vector<double> sobolev_orders;       // s_0 .. s_L, length L+1
  int tasks = 1;                            // T
  int output_dim = 1;                       // m
  // Optional per-layer |K_sigma| override for orders beyond the s=1
  // elementwise inequality; entries match layers 1..L-1 when present.
  std::vector<std::optional<double>> activation_norm_overrides;

  int depth() const { return static_cast<int>(layers.size()); }
  int input_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
  }
  void validate() const;
};

Vector forward(const NetworkSpec& net, const Vector& x);
Vector final_map_eval(const FinalMapSpec& spec, const Vector& x);

// Closed-form (sup, inf) of sigma' over R, checked against dense sampling in
// tests. tanh has inf sigma' = 0 on R and carries no bi-Lipschitz
// certificate, so it is rejected here.
DerivativeBounds activation_derivative_bounds(const ActivationSpec& act);

// Remark-style bound for elementwise bi-Lipschitz sigma at s = 1:
//   |K_sigma| <= |det J_{sigma^{-1}}|_inf max_i |d_i sigma|_inf
//             <= (1 / inf sigma')^d sup sigma'.
double koopman_activation_norm_bound(const ActivationSpec& act, int dim);

enum class WeightRecipe { orthogonal, scaled_orthogonal, conditioned };

struct NetworkGeneratorConfig {
  std::vector<int> widths;        // d_0 .. d_L (depth = widths.size() - 1)
  int tasks = 1;
  int output_dim = 1;
  WeightRecipe recipe = WeightRecipe::orthogonal;
  double scale = 1.0;             // gamma for scaled_orthogonal
  double condition_target = 1.0;  // kappa_target for conditioned
  double bias_scale = 0.1;
  double coeff_scale = 1.0;       // spread of the final-map coefficients c_t
  ActivationSpec activation;      // applied to layers 1..L-1
  std::vector<double> sobolev_orders;  // optional; default max(d)/2 + 1/2 uniform
  std::uint64_t seed = 0;
};

// Deterministic synthetic instance. Layers must be square or expanding
// (d_l >= d_{l-1}); the conditioned recipe places log-spaced singular values
// so that sigma_max/sigma_min hits condition_target.
NetworkSpec generate_network(const NetworkGeneratorConfig& config);

// Haar-ish orthogonal matrix from a seeded QR draw (square), or a matrix with
// orthonormal columns when rows > cols.
Matrix random_orthogonal(Eigen::Index rows, Eigen::Index cols, class Rng& rng);

}  // namespace koopbound
