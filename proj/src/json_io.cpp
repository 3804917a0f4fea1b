#include "koopbound/json_io.hpp"

#include <cmath>
#include <stdexcept>

namespace koopbound {

Json matrix_to_json(const Matrix& m) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
  Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const Json& data = j.at("data");
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("matrix JSON: rows and cols must be positive");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::invalid_argument("matrix JSON: data length must equal rows*cols");
  Matrix m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  detail::require_finite(m, "matrix JSON");
  return m;
}

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

namespace {

std::string activation_kind_name(ActivationKind k) {
  switch (k) {
    case ActivationKind::identity: return "identity";
    case ActivationKind::smoothed_leaky_relu: return "smoothed_leaky_relu";
    case ActivationKind::tanh: return "tanh";
  }
  return "identity";
}

ActivationKind activation_kind_from(const std::string& s) {
  if (s == "identity") return ActivationKind::identity;
  if (s == "smoothed_leaky_relu") return ActivationKind::smoothed_leaky_relu;
  if (s == "tanh") return ActivationKind::tanh;
  throw std::invalid_argument("unknown activation kind: " + s);
}

std::string class_kind_name(WeightClassKind k) {
  switch (k) {
    case WeightClassKind::invertible: return "invertible";
    case WeightClassKind::injective: return "injective";
    case WeightClassKind::orthogonal: return "orthogonal";
  }
  return "invertible";
}

WeightClassKind class_kind_from(const std::string& s) {
  if (s == "invertible") return WeightClassKind::invertible;
  if (s == "injective") return WeightClassKind::injective;
  if (s == "orthogonal") return WeightClassKind::orthogonal;
  throw std::invalid_argument("unknown weight class kind: " + s);
}

}  // namespace

void to_json(Json& j, const ActivationSpec& a) {
  j = Json{{"kind", activation_kind_name(a.kind)}};
  if (a.kind == ActivationKind::smoothed_leaky_relu) {
    j["alpha"] = a.alpha;
    j["beta"] = a.beta;
  }
}

void from_json(const Json& j, ActivationSpec& a) {
  a.kind = activation_kind_from(j.at("kind").get<std::string>());
  if (j.contains("alpha")) a.alpha = j.at("alpha").get<double>();
  if (j.contains("beta")) a.beta = j.at("beta").get<double>();
}

void to_json(Json& j, const WeightClassSpec& c) {
  j = Json{{"kind", class_kind_name(c.kind)},
           {"C", c.operator_norm_cap},
           {"D", c.det_floor}};
}

void from_json(const Json& j, WeightClassSpec& c) {
  c.kind = class_kind_from(j.at("kind").get<std::string>());
  c.operator_norm_cap = j.at("C").get<double>();
  c.det_floor = j.at("D").get<double>();
}

void to_json(Json& j, const ScalarKernelSpec& k) {
  j = Json{{"sobolev_order", k.sobolev_order},
           {"input_dim", k.input_dim},
           {"length_scale", k.length_scale},
           {"amplitude", k.amplitude}};
}

void from_json(const Json& j, ScalarKernelSpec& k) {
  k.sobolev_order = j.at("sobolev_order").get<double>();
  k.input_dim = j.at("input_dim").get<int>();
  if (j.contains("length_scale")) k.length_scale = j.at("length_scale").get<double>();
  if (j.contains("amplitude")) k.amplitude = j.at("amplitude").get<double>();
}

void to_json(Json& j, const MultiTaskKernelConfig& c) {
  Json tasks = Json::array();
  for (const auto& t : c.tasks)
    tasks.push_back(Json{{"kernel", t.kernel},
                         {"output_matrix", matrix_to_json(t.output_matrix)}});
  j = Json{{"tasks", std::move(tasks)}};
}

void from_json(const Json& j, MultiTaskKernelConfig& c) {
  c.tasks.clear();
  for (const auto& t : j.at("tasks")) {
    MultiTaskKernelConfig::Task task;
    task.kernel = t.at("kernel").get<ScalarKernelSpec>();
    task.output_matrix = matrix_from_json(t.at("output_matrix"));
    c.tasks.push_back(std::move(task));
  }
}

void to_json(Json& j, const FinalMapSpec& f) {
  Json terms = Json::array();
  for (const auto& t : f.terms)
    terms.push_back(Json{{"rate", t.rate},
                         {"M", matrix_to_json(t.output_matrix)},
                         {"c", vector_to_json(t.coeffs)}});
  j = Json{{"terms", std::move(terms)},
           {"input_dim", f.input_dim},
           {"sobolev_order", f.sobolev_order}};
}

void from_json(const Json& j, FinalMapSpec& f) {
  f.terms.clear();
  for (const auto& t : j.at("terms")) {
    FinalMapSpec::Term term;
    term.rate = t.at("rate").get<int>();
    term.output_matrix = matrix_from_json(t.at("M"));
    term.coeffs = vector_from_json(t.at("c"));
    f.terms.push_back(std::move(term));
  }
  f.input_dim = j.at("input_dim").get<int>();
  f.sobolev_order = j.at("sobolev_order").get<double>();
}

void to_json(Json& j, const NetworkSpec& n) {
  Json layers = Json::array();
  for (const auto& layer : n.layers) {
    Json jl{{"W", matrix_to_json(layer.weight)}, {"b", vector_to_json(layer.bias)}};
    if (layer.activation)
      jl["activation"] = *layer.activation;
    else
      jl["activation"] = nullptr;
    layers.push_back(std::move(jl));
  }
  j = Json{{"layers", std::move(layers)},
           {"final_map", n.final_map},
           {"sobolev_orders", n.sobolev_orders},
           {"T", n.tasks},
           {"m", n.output_dim}};
  if (!n.activation_norm_overrides.empty()) {
    Json ov = Json::array();
    for (const auto& o : n.activation_norm_overrides) {
      if (o)
        ov.push_back(*o);
      else
        ov.push_back(nullptr);
    }
    j["activation_norm_overrides"] = std::move(ov);
  }
}

void from_json(const Json& j, NetworkSpec& n) {
  n.layers.clear();
  for (const auto& jl : j.at("layers")) {
    LayerSpec layer;
    layer.weight = matrix_from_json(jl.at("W"));
    layer.bias = vector_from_json(jl.at("b"));
    if (jl.contains("activation") && !jl.at("activation").is_null())
      layer.activation = jl.at("activation").get<ActivationSpec>();
    n.layers.push_back(std::move(layer));
  }
  n.final_map = j.at("final_map").get<FinalMapSpec>();
  n.sobolev_orders = j.at("sobolev_orders").get<std::vector<double>>();
  n.tasks = j.at("T").get<int>();
  n.output_dim = j.at("m").get<int>();
  n.activation_norm_overrides.clear();
  if (j.contains("activation_norm_overrides")) {
    for (const auto& o : j.at("activation_norm_overrides")) {
      if (o.is_null())
        n.activation_norm_overrides.push_back(std::nullopt);
      else
        n.activation_norm_overrides.push_back(o.get<double>());
    }
  }
}

void to_json(Json& j, const LayerFactor& f) {
  j = Json{{"layer", f.layer},
           {"ratio_sup", f.ratio_sup},
           {"det_factor", f.det_factor},
           {"activation_norm_bound", f.activation_norm_bound},
           {"operator_norm", f.operator_norm},
           {"condition_number", f.condition_number},
           {"restriction_factor", f.restriction_factor},
           {"contribution", f.contribution()}};
  if (std::isinf(f.condition_number)) j["condition_number"] = "inf";
}

void to_json(Json& j, const BoundReport& r) {
  j = Json{{"variant", r.variant},
           {"prefactor", r.prefactor},
           {"layer_factors", r.layer_factors},
           {"factor_product", r.factor_product()},
           {"total", r.total},
           {"notes", r.notes}};
  if (std::isnan(r.alternate_prefactor_total))
    j["alternate_prefactor_total"] = nullptr;
  else
    j["alternate_prefactor_total"] = r.alternate_prefactor_total;
}

void to_json(Json& j, const EstimatorConfig& c) {
  j = Json{{"num_sigma", c.num_sigma},
           {"restarts", c.restarts},
           {"steps", c.steps},
           {"step_size", c.step_size},
           {"step_decay", c.step_decay},
           {"seed", c.seed},
           {"gradient_mode",
            c.gradient_mode == GradientMode::analytic ? "analytic" : "central_difference"},
           {"optimize_final_map", c.optimize_final_map},
           {"optimize_biases", c.optimize_biases},
           {"threads", c.threads}};
}

void from_json(const Json& j, EstimatorConfig& c) {
  if (j.contains("num_sigma")) c.num_sigma = j.at("num_sigma").get<int>();
  if (j.contains("restarts")) c.restarts = j.at("restarts").get<int>();
  if (j.contains("steps")) c.steps = j.at("steps").get<int>();
  if (j.contains("step_size")) c.step_size = j.at("step_size").get<double>();
  if (j.contains("step_decay")) c.step_decay = j.at("step_decay").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("gradient_mode")) {
    std::string mode = j.at("gradient_mode").get<std::string>();
    if (mode == "analytic")
      c.gradient_mode = GradientMode::analytic;
    else if (mode == "central_difference")
      c.gradient_mode = GradientMode::central_difference;
    else
      throw std::invalid_argument("unknown gradient mode: " + mode);
  }
  if (j.contains("optimize_final_map"))
    c.optimize_final_map = j.at("optimize_final_map").get<bool>();
  if (j.contains("optimize_biases"))
    c.optimize_biases = j.at("optimize_biases").get<bool>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
}

void to_json(Json& j, const RademacherEstimate& e) {
  j = Json{{"mean", e.mean},
           {"stderr", e.stderr_},
           {"num_sigma_samples", e.num_sigma_samples},
           {"restarts_per_sample", e.restarts_per_sample},
           {"best_objective_per_sample", e.best_objective_per_sample},
           {"total_iterations", e.total_iterations},
           {"projection_count", e.projection_count},
           {"discarded_restarts", e.discarded_restarts},
           {"final_map_optimized", e.final_map_optimized}};
}

}  // namespace koopbound
