#pragma once

#include "koopbound/kernels.hpp"
#include "koopbound/matrix_analysis.hpp"
#include "koopbound/network.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace koopbound {

// Per-layer pieces of a bound product. The layer contribution is
// restriction_factor * ratio_sup / det_factor * activation_norm_bound; which
// measured quantity lands in which slot depends on the variant and is spelled
// out in the report notes.
struct LayerFactor {
  int layer = 0;  // 1-based
  double ratio_sup = 1.0;
  double det_factor = 1.0;
  double activation_norm_bound = 1.0;
  double operator_norm = 0.0;
  double condition_number = 0.0;
  double restriction_factor = 1.0;  // G_l; 1 unless overridden

  double contribution() const {
    return restriction_factor * ratio_sup / det_factor * activation_norm_bound;
  }
};

struct BoundReport {
  std::string variant;
  double prefactor = 1.0;
  std::vector<LayerFactor> layer_factors;
  double total = 0.0;
  // Same product under the proof-final-line prefactor T U0 sqrt(kappa/n);
  // NaN for variants without a kernel prefactor.
  double alternate_prefactor_total = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> notes;

  double factor_product() const {
    double p = 1.0;
    for (const auto& f : layer_factors) p *= f.contribution();
    return p;
  }
};

// sup over omega of ((1+|W^T omega|^2)^{s_in} / (1+|omega|^2)^{s_out})^{1/2}.
// Requires s_in <= s_out, else the supremum diverges. Closed form through the
// top singular value: the 1-D profile h(rho) = (1+sig^2 rho^2)^{s_in} /
// (1+rho^2)^{s_out} is maximized at rho = 0, rho -> inf, or the stationary
// point rho*^2 = (s_in sig^2 - s_out) / (sig^2 (s_out - s_in)).
double ratio_sup(const Matrix& w, double s_in, double s_out);

// Same supremum with omega restricted to range(W) for tall or square W. The
// top left-singular direction lies in range(W), so the restricted supremum
// coincides with the full one; the orientation check is what differs.
double ratio_sup_restricted(const Matrix& w, double s_in, double s_out);

// Invertible-weights bound: headline total uses the prefactor
// T sqrt(kappa U0 / n); alternate_prefactor_total uses T U0 sqrt(kappa / n).
BoundReport theorem_inv_bound(const NetworkSpec& net, const WeightClassSpec& cls,
                              const MultiTaskKernelConfig& kernel, int n);

// Class-uniform bound max(1, C^s) T sqrt(kappa U0 / (n D)) |g| prod |K_sigma|.
// Needs one dimension d and one order s across all layers.
BoundReport corollary_bound(const NetworkSpec& net, const WeightClassSpec& cls,
                            const MultiTaskKernelConfig& kernel, int n);

// Injective-weights bound with factor G_l ratio_restricted / det(W^T W)^{1/4};
// the ratio uses the single order s_{l-1} on both sides of the quotient, as
// stated. G_l defaults to 1 (noted as assumed) unless overridden.
BoundReport theorem_inj_bound(
    const NetworkSpec& net, const WeightClassSpec& cls,
    const MultiTaskKernelConfig& kernel, int n,
    const std::optional<std::vector<double>>& g_overrides = std::nullopt);

// Single-output bound prod |W_l| prod (1/inf sigma')^d sup sigma', unit
// big-O constant. Needs m = 1, T = 1 and elementwise bi-Lipschitz sigma.
BoundReport remark_brownian_bound(const NetworkSpec& net);

// Alternative product prod max(1,|W_l|^2)^{1/2} / det(W_l^T W_l)^{1/4} with
// max(1, sigma' bounds) activation terms, unit big-O constant.
BoundReport hashimoto_alt_bound(const NetworkSpec& net);

// Norm-product proxies: spectral prod |W_l| / sqrt(n) and Frobenius
// prod |W_l|_F / sqrt(n). Labeled proxies, not any cited paper's constants.
std::vector<BoundReport> baseline_bounds(const NetworkSpec& net, int n);

}  // namespace koopbound
