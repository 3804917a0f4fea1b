#include "koopbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace koopbound {

namespace {

double ratio_sup_from_sigma(double sigma_max, double s_in, double s_out) {
  if (s_in > s_out + 1e-12) {
    std::ostringstream msg;
    msg << "ratio_sup: s_in = " << s_in << " > s_out = " << s_out
        << "; the supremum over omega diverges (needs s_{l-1} <= s_l)";
    throw std::invalid_argument(msg.str());
  }
  double sig2 = sigma_max * sigma_max;
  if (std::abs(s_in - s_out) <= 1e-12)
    return std::pow(std::max(1.0, sigma_max), s_in);
  if (sigma_max == 0.0) return 1.0;
  // h(rho) = (1+sig^2 rho^2)^{s_in} / (1+rho^2)^{s_out}; h(0)=1, h(inf)=0.
  double sup_h = 1.0;
  double rho2 = (s_in * sig2 - s_out) / (sig2 * (s_out - s_in));
  if (rho2 > 0.0) {
    double h = std::pow(1.0 + sig2 * rho2, s_in) / std::pow(1.0 + rho2, s_out);
    sup_h = std::max(sup_h, h);
  }
  return std::sqrt(sup_h);
}

struct Prefactors {
  double kappa = 1.0;
  double u0_value = 1.0;
  double g_norm_value = 1.0;
  double headline = 1.0;   // T sqrt(kappa U0 / n)
  double alternate = 1.0;  // T U0 sqrt(kappa / n)
};

Prefactors kernel_prefactors(const NetworkSpec& net,
                             const MultiTaskKernelConfig& kernel, int n) {
  if (n < 1) throw std::invalid_argument("bound: sample count n must be >= 1");
  kernel.validate();
  net.validate();
  if (static_cast<int>(kernel.tasks.size()) != net.tasks)
    throw std::invalid_argument("bound: kernel task count differs from network T");
  if (kernel.output_dim() != net.output_dim)
    throw std::invalid_argument("bound: kernel output dim differs from network m");
  if (kernel.tasks.front().kernel.input_dim != net.input_dim())
    throw std::invalid_argument("bound: kernel input_dim differs from network d_0");

  Prefactors p;
  p.kappa = 0.0;
  for (const auto& task : kernel.tasks)
    p.kappa = std::max(p.kappa, kappa_bound(task.kernel));
  p.u0_value = u0(kernel);
  p.g_norm_value = g_norm(net.final_map);
  double t = static_cast<double>(net.tasks);
  p.headline = t * std::sqrt(p.kappa * p.u0_value / n);
  p.alternate = t * p.u0_value * std::sqrt(p.kappa / n);
  return p;
}

double activation_bound_for_layer(const NetworkSpec& net, int l /*0-based*/) {
  const LayerSpec& layer = net.layers[l];
  if (!layer.activation) return 1.0;
  if (!net.activation_norm_overrides.empty() &&
      net.activation_norm_overrides[l].has_value())
    return *net.activation_norm_overrides[l];
  return koopman_activation_norm_bound(*layer.activation,
                                       static_cast<int>(layer.weight.rows()));
}

void require_class_members(const NetworkSpec& net, const WeightClassSpec& cls,
                           const char* variant) {
  std::vector<int> offenders;
  for (int l = 0; l < net.depth(); ++l)
    if (!class_membership(net.layers[l].weight, cls).member)
      offenders.push_back(l + 1);
  if (!offenders.empty()) {
    std::ostringstream msg;
    msg << variant << ": layers outside the weight class:";
    for (int l : offenders) msg << " " << l;
    throw std::invalid_argument(msg.str());
  }
}

LayerFactor measured_layer(const NetworkSpec& net, int l) {
  LayerFactor f;
  f.layer = l + 1;
  const Matrix& w = net.layers[l].weight;
  Vector sv = svd(w).singular_values;
  f.operator_norm = sv(0);
  double smin = sv(sv.size() - 1);
  f.condition_number = (sv(0) == 0.0 || smin < kRankTolerance * sv(0))
                           ? std::numeric_limits<double>::infinity()
                           : sv(0) / smin;
  return f;
}

void check_finite_factors(const BoundReport& report) {
  for (const auto& f : report.layer_factors) {
    if (!(f.ratio_sup > 0.0) || !std::isfinite(f.ratio_sup) ||
        !(f.det_factor > 0.0) || !std::isfinite(f.det_factor) ||
        !(f.activation_norm_bound > 0.0) || !std::isfinite(f.activation_norm_bound)) {
      std::ostringstream msg;
      msg << report.variant << ": layer " << f.layer
          << " produced a nonpositive or non-finite factor (ratio_sup="
          << f.ratio_sup << ", det_factor=" << f.det_factor
          << ", activation=" << f.activation_norm_bound << ")";
      throw std::runtime_error(msg.str());
    }
  }
}

void require_single_output(const NetworkSpec& net, const char* variant) {
  if (net.output_dim != 1 || net.tasks != 1) {
    std::ostringstream msg;
    msg << variant << ": defined for single-output networks only (m = T = 1), got m="
        << net.output_dim << ", T=" << net.tasks;
    throw std::invalid_argument(msg.str());
  }
  for (const auto& layer : net.layers)
    if (layer.activation && layer.activation->kind == ActivationKind::tanh)
      throw std::invalid_argument(
          std::string(variant) + ": needs elementwise bi-Lipschitz activations");
}

}  // namespace

double ratio_sup(const Matrix& w, double s_in, double s_out) {
  detail::require_finite(w, "ratio_sup");
  return ratio_sup_from_sigma(operator_norm(w), s_in, s_out);
}

double ratio_sup_restricted(const Matrix& w, double s_in, double s_out) {
  if (w.rows() < w.cols()) {
    std::ostringstream msg;
    msg << "ratio_sup_restricted: needs injective orientation rows >= cols, got "
        << w.rows() << "x" << w.cols();
    throw std::invalid_argument(msg.str());
  }
  detail::require_finite(w, "ratio_sup_restricted");
  return ratio_sup_from_sigma(operator_norm(w), s_in, s_out);
}

BoundReport theorem_inv_bound(const NetworkSpec& net, const WeightClassSpec& cls,
                              const MultiTaskKernelConfig& kernel, int n) {
  Prefactors p = kernel_prefactors(net, kernel, n);
  for (int l = 0; l < net.depth(); ++l)
    if (net.layers[l].weight.rows() != net.layers[l].weight.cols()) {
      std::ostringstream msg;
      msg << "theorem_inv_bound: layer " << l + 1 << " is "
          << net.layers[l].weight.rows() << "x" << net.layers[l].weight.cols()
          << "; invertible weights must be square";
      throw std::invalid_argument(msg.str());
    }
  require_class_members(net, cls, "theorem_inv_bound");

  BoundReport report;
  report.variant = "theorem_inv";
  report.prefactor = p.headline * p.g_norm_value;
  for (int l = 0; l < net.depth(); ++l) {
    LayerFactor f = measured_layer(net, l);
    f.ratio_sup = ratio_sup(net.layers[l].weight, net.sobolev_orders[l],
                            net.sobolev_orders[l + 1]);
    f.det_factor = std::sqrt(det_abs(net.layers[l].weight));
    f.activation_norm_bound = activation_bound_for_layer(net, l);
    report.layer_factors.push_back(f);
  }
  check_finite_factors(report);
  double product = report.factor_product();
  report.total = report.prefactor * product;
  report.alternate_prefactor_total = p.alternate * p.g_norm_value * product;
  std::ostringstream note;
  note << "prefactor = T sqrt(kappa U0 / n) |g| with T=" << net.tasks
       << ", kappa=" << p.kappa << ", U0=" << p.u0_value
       << ", n=" << n << ", |g|=" << p.g_norm_value;
  report.notes.push_back(note.str());
  report.notes.push_back(
      "layer contribution = ratio_sup(W_l, s_{l-1}, s_l) / |det W_l|^{1/2} * "
      "activation bound");
  report.notes.push_back(
      "alternate_prefactor_total uses T U0 sqrt(kappa/n) (proof final line); "
      "the statement form is the headline total");
  return report;
}

BoundReport corollary_bound(const NetworkSpec& net, const WeightClassSpec& cls,
                            const MultiTaskKernelConfig& kernel, int n) {
  Prefactors p = kernel_prefactors(net, kernel, n);
  cls.validate();
  double s = net.sobolev_orders[0];
  Eigen::Index d = net.layers.front().weight.cols();
  for (int l = 0; l < net.depth(); ++l) {
    if (net.layers[l].weight.rows() != d || net.layers[l].weight.cols() != d)
      throw std::invalid_argument(
          "corollary_bound: needs one dimension d across all layers");
    if (std::abs(net.sobolev_orders[l + 1] - s) > 1e-12)
      throw std::invalid_argument(
          "corollary_bound: needs one Sobolev order s across all layers");
  }

  BoundReport report;
  report.variant = "corollary";
  double cap = std::max(1.0, std::pow(cls.operator_norm_cap, s));
  report.prefactor = cap * static_cast<double>(net.tasks) *
                     std::sqrt(p.kappa * p.u0_value / (n * cls.det_floor)) *
                     p.g_norm_value;
  for (int l = 0; l < net.depth(); ++l) {
    LayerFactor f = measured_layer(net, l);
    f.activation_norm_bound = activation_bound_for_layer(net, l);
    report.layer_factors.push_back(f);
  }
  check_finite_factors(report);
  double product = report.factor_product();
  report.total = report.prefactor * product;
  report.alternate_prefactor_total =
      cap * p.alternate / std::sqrt(cls.det_floor) * p.g_norm_value * product;
  std::ostringstream note;
  note << "prefactor = max(1, C^s) T sqrt(kappa U0 / (n D)) |g| with C="
       << cls.operator_norm_cap << ", D=" << cls.det_floor << ", s=" << s
       << "; class-uniform, single cap factor as stated (a per-layer capping "
          "would give (max(1,C^s)/sqrt(D))^L)";
  report.notes.push_back(note.str());
  report.notes.push_back("layer contribution = activation bound only");
  return report;
}

BoundReport theorem_inj_bound(
    const NetworkSpec& net, const WeightClassSpec& cls,
    const MultiTaskKernelConfig& kernel, int n,
    const std::optional<std::vector<double>>& g_overrides) {
  Prefactors p = kernel_prefactors(net, kernel, n);
  for (int l = 0; l < net.depth(); ++l)
    if (net.layers[l].weight.rows() < net.layers[l].weight.cols()) {
      std::ostringstream msg;
      msg << "theorem_inj_bound: layer " << l + 1 << " is "
          << net.layers[l].weight.rows() << "x" << net.layers[l].weight.cols()
          << " (wide); injective weights need d_l >= d_{l-1}";
      throw std::invalid_argument(msg.str());
    }
  require_class_members(net, cls, "theorem_inj_bound");
  if (g_overrides && static_cast<int>(g_overrides->size()) != net.depth())
    throw std::invalid_argument("theorem_inj_bound: G overrides must have length L");

  BoundReport report;
  report.variant = "theorem_inj";
  report.prefactor = p.headline * p.g_norm_value;
  bool any_assumed = false;
  for (int l = 0; l < net.depth(); ++l) {
    LayerFactor f = measured_layer(net, l);
    f.ratio_sup = ratio_sup_restricted(net.layers[l].weight,
                                       net.sobolev_orders[l], net.sobolev_orders[l]);
    GramDetQuarter gd = gram_det_quarter(net.layers[l].weight);
    if (gd.rank_deficient) {
      std::ostringstream msg;
      msg << "theorem_inj_bound: layer " << l + 1
          << " is rank deficient; det(W^T W)^{1/4} = 0";
      throw std::invalid_argument(msg.str());
    }
    f.det_factor = gd.value;
    if (g_overrides)
      f.restriction_factor = (*g_overrides)[l];
    else
      any_assumed = true;
    f.activation_norm_bound = activation_bound_for_layer(net, l);
    report.layer_factors.push_back(f);
  }
  check_finite_factors(report);
  double product = report.factor_product();
  report.total = report.prefactor * product;
  report.alternate_prefactor_total = p.alternate * p.g_norm_value * product;
  report.notes.push_back(
      "layer contribution = G_l ratio_restricted(W_l, s_{l-1}, s_{l-1}) / "
      "det(W_l^T W_l)^{1/4} * activation bound; the ratio uses the single "
      "order s_{l-1}, unlike the invertible variant's (s_{l-1}, s_l) pair");
  if (any_assumed)
    report.notes.push_back(
        "G_l = 1 assumed (restriction-norm ratio is not desk-computable)");
  return report;
}

BoundReport remark_brownian_bound(const NetworkSpec& net) {
  net.validate();
  require_single_output(net, "remark_brownian_bound");

  BoundReport report;
  report.variant = "remark_brownian";
  report.prefactor = 1.0;
  for (int l = 0; l < net.depth(); ++l) {
    LayerFactor f = measured_layer(net, l);
    f.ratio_sup = f.operator_norm;
    if (net.layers[l].activation) {
      DerivativeBounds b = activation_derivative_bounds(*net.layers[l].activation);
      f.activation_norm_bound =
          std::pow(1.0 / b.inf, static_cast<double>(net.layers[l].weight.rows())) *
          b.sup;
    }
    report.layer_factors.push_back(f);
  }
  check_finite_factors(report);
  report.total = report.factor_product();
  report.notes.push_back(
      "|W_l| and (1/inf sigma')^d sup sigma' products, unit big-O constant; "
      "absolute scale is convention-dependent, ratios are not");
  return report;
}

BoundReport hashimoto_alt_bound(const NetworkSpec& net) {
  net.validate();
  require_single_output(net, "hashimoto_alt_bound");

  BoundReport report;
  report.variant = "hashimoto_alt";
  report.prefactor = 1.0;
  for (int l = 0; l < net.depth(); ++l) {
    LayerFactor f = measured_layer(net, l);
    f.ratio_sup = std::sqrt(std::max(1.0, f.operator_norm * f.operator_norm));
    GramDetQuarter gd = gram_det_quarter(net.layers[l].weight);
    if (gd.rank_deficient)
      throw std::invalid_argument(
          "hashimoto_alt_bound: rank-deficient layer, det(W^T W)^{1/4} = 0");
    f.det_factor = gd.value;
    if (net.layers[l].activation) {
      DerivativeBounds b = activation_derivative_bounds(*net.layers[l].activation);
      f.activation_norm_bound =
          std::pow(1.0 / b.inf, static_cast<double>(net.layers[l].weight.rows())) *
          std::max(1.0, b.sup);
    }
    report.layer_factors.push_back(f);
  }
  check_finite_factors(report);
  report.total = report.factor_product();
  report.notes.push_back(
      "max(1,|W_l|^2)^{1/2} / det(W_l^T W_l)^{1/4} products with max(1, "
      "sigma' bounds) activation terms, unit big-O constant");
  return report;
}

std::vector<BoundReport> baseline_bounds(const NetworkSpec& net, int n) {
  net.validate();
  if (n < 1) throw std::invalid_argument("baseline_bounds: n must be >= 1");
  BoundReport spectral;
  spectral.variant = "baseline_spectral";
  spectral.prefactor = 1.0 / std::sqrt(static_cast<double>(n));
  BoundReport frob;
  frob.variant = "baseline_frobenius";
  frob.prefactor = spectral.prefactor;
  for (int l = 0; l < net.depth(); ++l) {
    LayerFactor fs = measured_layer(net, l);
    fs.ratio_sup = fs.operator_norm;
    spectral.layer_factors.push_back(fs);
    LayerFactor ff = measured_layer(net, l);
    ff.ratio_sup = net.layers[l].weight.norm();
    frob.layer_factors.push_back(ff);
  }
  spectral.total = spectral.prefactor * spectral.factor_product();
  frob.total = frob.prefactor * frob.factor_product();
  spectral.notes.push_back("spectral norm product / sqrt(n); proxy, not any cited paper's constants");
  frob.notes.push_back("Frobenius norm product / sqrt(n); proxy, not any cited paper's constants");
  return {spectral, frob};
}

}  // namespace koopbound
