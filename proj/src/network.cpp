#include "koopbound/network.hpp"

#include "koopbound/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace koopbound {

double ActivationSpec::eval(double x) const {
  switch (kind) {
    case ActivationKind::identity:
      return x;
    case ActivationKind::smoothed_leaky_relu:
      return alpha * x + (1.0 - alpha) * 0.5 * (x + std::sqrt(x * x + beta * beta));
    case ActivationKind::tanh:
      return std::tanh(x);
  }
  return x;
}

double ActivationSpec::derivative(double x) const {
  switch (kind) {
    case ActivationKind::identity:
      return 1.0;
    case ActivationKind::smoothed_leaky_relu:
      return alpha + (1.0 - alpha) * 0.5 * (1.0 + x / std::sqrt(x * x + beta * beta));
    case ActivationKind::tanh: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

void ActivationSpec::validate() const {
  if (kind == ActivationKind::smoothed_leaky_relu) {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("ActivationSpec: alpha must lie in (0,1)");
    if (!(beta > 0.0))
      throw std::invalid_argument("ActivationSpec: beta must be > 0");
  }
}

void NetworkSpec::validate() const {
  if (layers.empty())
    throw std::invalid_argument("NetworkSpec: needs at least one layer");
  int depth_l = depth();
  if (static_cast<int>(sobolev_orders.size()) != depth_l + 1)
    throw std::invalid_argument("NetworkSpec: sobolev_orders must have length L+1");
  for (int l = 0; l < depth_l; ++l) {
    const LayerSpec& layer = layers[l];
    if (layer.bias.size() != layer.weight.rows()) {
      std::ostringstream msg;
      msg << "NetworkSpec: layer " << l + 1 << " bias length " << layer.bias.size()
          << " does not match weight rows " << layer.weight.rows();
      throw std::invalid_argument(msg.str());
    }
    if (l > 0 && layer.weight.cols() != layers[l - 1].weight.rows()) {
      std::ostringstream msg;
      msg << "NetworkSpec: layer " << l + 1 << " expects input of length "
          << layer.weight.cols() << " but layer " << l << " outputs "
          << layers[l - 1].weight.rows();
      throw std::invalid_argument(msg.str());
    }
    if (layer.activation) layer.activation->validate();
    if (l == depth_l - 1 && layer.activation)
      throw std::invalid_argument("NetworkSpec: final layer must have no activation");
    double s = sobolev_orders[l + 1];
    double d = static_cast<double>(layer.weight.rows());
    if (!(s > 0.5 * d)) {
      std::ostringstream msg;
      msg << "NetworkSpec: order s_" << l + 1 << " = " << s
          << " violates s > d/2 with d = " << d;
      throw std::invalid_argument(msg.str());
    }
  }
  if (!(sobolev_orders[0] > 0.5 * input_dim()))
    throw std::invalid_argument("NetworkSpec: order s_0 violates s > d/2");
  final_map.validate();
  if (final_map.input_dim != static_cast<int>(layers.back().weight.rows()))
    throw std::invalid_argument(
        "NetworkSpec: final map input_dim must equal the last layer width");
  if (final_map.output_dim() != output_dim)
    throw std::invalid_argument("NetworkSpec: final map output dim must equal m");
  if (tasks < 1) throw std::invalid_argument("NetworkSpec: T must be >= 1");
  if (static_cast<int>(final_map.terms.size()) != tasks)
    throw std::invalid_argument("NetworkSpec: final map needs one term per task");
  if (!activation_norm_overrides.empty() &&
      static_cast<int>(activation_norm_overrides.size()) != depth_l - 1)
    throw std::invalid_argument(
        "NetworkSpec: activation_norm_overrides must have length L-1");
}

Vector final_map_eval(const FinalMapSpec& spec, const Vector& x) {
  double sq = x.squaredNorm();
  Vector out = Vector::Zero(spec.output_dim());
  for (const auto& term : spec.terms)
    out += std::exp(-static_cast<double>(term.rate) * sq) *
           (term.output_matrix * term.coeffs);
  return out;
}

Vector forward(const NetworkSpec& net, const Vector& x) {
  if (x.size() != net.input_dim()) {
    std::ostringstream msg;
    msg << "forward: input length " << x.size() << " does not match layer 1 width "
        << net.input_dim();
    throw std::invalid_argument(msg.str());
  }
  Vector h = x;
  for (int l = 0; l < net.depth(); ++l) {
    const LayerSpec& layer = net.layers[l];
    if (h.size() != layer.weight.cols()) {
      std::ostringstream msg;
      msg << "forward: layer " << l + 1 << " expects input of length "
          << layer.weight.cols() << ", got " << h.size();
      throw std::invalid_argument(msg.str());
    }
    h = layer.weight * h + layer.bias;
    if (layer.activation)
      h = h.unaryExpr([&](double v) { return layer.activation->eval(v); });
  }
  return final_map_eval(net.final_map, h);
}

DerivativeBounds activation_derivative_bounds(const ActivationSpec& act) {
  act.validate();
  switch (act.kind) {
    case ActivationKind::identity:
      return {1.0, 1.0};
    case ActivationKind::smoothed_leaky_relu:
      // sigma'(x) = alpha + (1-alpha)(1 + x/sqrt(x^2+beta^2))/2 tends to
      // alpha at -inf and 1 at +inf, strictly between.
      return {1.0, act.alpha};
    case ActivationKind::tanh:
      throw std::invalid_argument(
          "activation_derivative_bounds: tanh has inf sigma' = 0 on R, no "
          "bi-Lipschitz certificate");
  }
  return {1.0, 1.0};
}

double koopman_activation_norm_bound(const ActivationSpec& act, int dim) {
  if (dim < 1)
    throw std::invalid_argument("koopman_activation_norm_bound: dim must be >= 1");
  if (act.kind == ActivationKind::identity) return 1.0;
  DerivativeBounds b = activation_derivative_bounds(act);
  if (!(b.inf > 0.0))
    throw std::invalid_argument(
        "koopman_activation_norm_bound: inf sigma' <= 0, inverse Jacobian unbounded");
  // det J_{sigma^{-1}} = prod_i 1/sigma'(sigma^{-1}(y_i)) <= (1/inf sigma')^d
  return std::pow(1.0 / b.inf, static_cast<double>(dim)) * b.sup;
}

Matrix random_orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (rows < cols)
    throw std::invalid_argument("random_orthogonal: needs rows >= cols");
  Matrix g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  // Fix signs so the draw does not depend on QR's internal conventions.
  Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < cols; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

NetworkSpec generate_network(const NetworkGeneratorConfig& config) {
  if (config.widths.size() < 2)
    throw std::invalid_argument("generate_network: widths must list d_0..d_L");
  for (std::size_t i = 1; i < config.widths.size(); ++i) {
    if (config.widths[i] < 1 || config.widths[i - 1] < 1)
      throw std::invalid_argument("generate_network: widths must be positive");
    if (config.widths[i] < config.widths[i - 1]) {
      std::ostringstream msg;
      msg << "generate_network: contracting layer " << i << " ("
          << config.widths[i - 1] << " -> " << config.widths[i]
          << ") is not injective; widths must be nondecreasing";
      throw std::invalid_argument(msg.str());
    }
  }
  if (config.tasks < 1 || config.output_dim < 1)
    throw std::invalid_argument("generate_network: T and m must be >= 1");
  if (config.recipe == WeightRecipe::conditioned && !(config.condition_target >= 1.0))
    throw std::invalid_argument("generate_network: condition target must be >= 1");
  if (config.recipe == WeightRecipe::scaled_orthogonal && !(config.scale > 0.0))
    throw std::invalid_argument("generate_network: scale must be > 0");
  config.activation.validate();

  int depth = static_cast<int>(config.widths.size()) - 1;
  NetworkSpec net;
  net.tasks = config.tasks;
  net.output_dim = config.output_dim;

  Rng weight_rng = Rng::for_task(config.seed, 1);
  Rng bias_rng = Rng::for_task(config.seed, 2);
  Rng coeff_rng = Rng::for_task(config.seed, 3);

  for (int l = 0; l < depth; ++l) {
    Eigen::Index rows = config.widths[l + 1];
    Eigen::Index cols = config.widths[l];
    LayerSpec layer;
    switch (config.recipe) {
      case WeightRecipe::orthogonal:
        layer.weight = random_orthogonal(rows, cols, weight_rng);
        break;
      case WeightRecipe::scaled_orthogonal:
        layer.weight = config.scale * random_orthogonal(rows, cols, weight_rng);
        break;
      case WeightRecipe::conditioned: {
        Eigen::Index k = cols;  // rows >= cols
        if (k == 1 && config.condition_target > 1.05) {
          std::ostringstream msg;
          msg << "generate_network: layer " << l + 1
              << " has a single singular value; condition target "
              << config.condition_target << " is unreachable";
          throw std::invalid_argument(msg.str());
        }
        Matrix u = random_orthogonal(rows, k, weight_rng);
        Matrix v = random_orthogonal(k, k, weight_rng);
        Vector sv(k);
        if (k == 1) {
          sv(0) = 1.0;
        } else {
          double log_kappa = std::log(config.condition_target);
          for (Eigen::Index i = 0; i < k; ++i)
            sv(i) = std::exp(-log_kappa * static_cast<double>(i) /
                             static_cast<double>(k - 1));
        }
        layer.weight = u * sv.asDiagonal() * v.transpose();
        break;
      }
    }
    layer.bias = Vector(rows);
    for (Eigen::Index i = 0; i < rows; ++i)
      layer.bias(i) = config.bias_scale * bias_rng.normal();
    if (l < depth - 1) layer.activation = config.activation;
    net.layers.push_back(std::move(layer));
  }

  if (config.sobolev_orders.empty()) {
    int d_max = *std::max_element(config.widths.begin(), config.widths.end());
    net.sobolev_orders.assign(depth + 1, 0.5 * d_max + 0.5);
  } else {
    if (static_cast<int>(config.sobolev_orders.size()) != depth + 1)
      throw std::invalid_argument("generate_network: sobolev_orders must have length L+1");
    net.sobolev_orders = config.sobolev_orders;
  }

  net.final_map.input_dim = config.widths.back();
  net.final_map.sobolev_order = net.sobolev_orders.back();
  for (int t = 0; t < config.tasks; ++t) {
    FinalMapSpec::Term term;
    term.rate = 1;
    term.output_matrix = Matrix::Identity(config.output_dim, config.output_dim);
    term.coeffs = Vector(config.output_dim);
    for (int j = 0; j < config.output_dim; ++j)
      term.coeffs(j) = config.coeff_scale * coeff_rng.normal();
    net.final_map.terms.push_back(std::move(term));
  }

  net.validate();
  return net;
}

}  // namespace koopbound
