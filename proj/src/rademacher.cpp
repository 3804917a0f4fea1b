#include "koopbound/rademacher.hpp"

#include "koopbound/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace koopbound {

namespace {

struct ForwardTrace {
  std::vector<Vector> pre;   // z_l per layer
  std::vector<Vector> post;  // after activation (post.back() == pre.back())
};

Vector forward_with_params(const NetworkSpec& templ, const NetworkParams& params,
                           const Vector& x, ForwardTrace* trace) {
  int depth = templ.depth();
  Vector h = x;
  for (int l = 0; l < depth; ++l) {
    Vector z = params.weights[l] * h + params.biases[l];
    if (trace) trace->pre.push_back(z);
    if (l < depth - 1 && templ.layers[l].activation)
      h = z.unaryExpr([&](double v) { return templ.layers[l].activation->eval(v); });
    else
      h = z;
    if (trace) trace->post.push_back(h);
  }
  // final map with possibly substituted coefficients
  const FinalMapSpec& fm = templ.final_map;
  double sq = h.squaredNorm();
  Vector out = Vector::Zero(fm.output_dim());
  for (std::size_t t = 0; t < fm.terms.size(); ++t) {
    const Vector& c =
        params.final_coeffs.empty() ? fm.terms[t].coeffs : params.final_coeffs[t];
    out += std::exp(-static_cast<double>(fm.terms[t].rate) * sq) *
           (fm.terms[t].output_matrix * c);
  }
  return out;
}

struct ObjectiveAndGradient {
  double value = 0.0;
  NetworkParams gradient;
};

NetworkParams zero_like(const NetworkParams& params) {
  NetworkParams g;
  g.weights.reserve(params.weights.size());
  for (const auto& w : params.weights) g.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : params.biases) g.biases.push_back(Vector::Zero(b.size()));
  for (const auto& c : params.final_coeffs) g.final_coeffs.push_back(Vector::Zero(c.size()));
  return g;
}

// One pass computing the signed objective and, if grad != nullptr, its
// analytic gradient by backpropagation.
double objective_impl(const NetworkSpec& templ, const NetworkParams& params,
                      const Matrix& signs, const std::vector<Vector>& data,
                      NetworkParams* grad) {
  int n = static_cast<int>(data.size());
  int depth = templ.depth();
  const FinalMapSpec& fm = templ.final_map;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    ForwardTrace trace;
    trace.pre.reserve(depth);
    trace.post.reserve(depth);
    Vector out = forward_with_params(templ, params, data[i], &trace);
    Vector u = signs.row(i).transpose() / static_cast<double>(n);
    total += u.dot(out);
    if (!grad) continue;

    const Vector& z_last = trace.pre.back();
    double sq = z_last.squaredNorm();
    Vector delta = Vector::Zero(z_last.size());
    for (std::size_t t = 0; t < fm.terms.size(); ++t) {
      const Vector& c =
          params.final_coeffs.empty() ? fm.terms[t].coeffs : params.final_coeffs[t];
      double rate = static_cast<double>(fm.terms[t].rate);
      double e = std::exp(-rate * sq);
      Vector v = fm.terms[t].output_matrix * c;
      delta += e * (-2.0 * rate) * v.dot(u) * z_last;
      if (!grad->final_coeffs.empty())
        grad->final_coeffs[t] += e * (fm.terms[t].output_matrix * u);
    }
    for (int l = depth - 1; l >= 0; --l) {
      const Vector& input = (l == 0) ? data[i] : trace.post[l - 1];
      grad->weights[l] += delta * input.transpose();
      grad->biases[l] += delta;
      if (l > 0) {
        Vector back = params.weights[l].transpose() * delta;
        if (templ.layers[l - 1].activation) {
          const Vector& z = trace.pre[l - 1];
          for (Eigen::Index j = 0; j < back.size(); ++j)
            back(j) *= templ.layers[l - 1].activation->derivative(z(j));
        }
        delta = back;
      }
    }
  }
  return total;
}

void check_shapes(const NetworkSpec& templ, const Matrix& signs,
                  const std::vector<Vector>& data) {
  if (data.empty()) throw std::invalid_argument("rademacher: needs n >= 1 data points");
  if (signs.rows() != static_cast<Eigen::Index>(data.size()) ||
      signs.cols() != templ.output_dim) {
    std::ostringstream msg;
    msg << "rademacher: sign array is " << signs.rows() << "x" << signs.cols()
        << ", expected " << data.size() << "x" << templ.output_dim;
    throw std::invalid_argument(msg.str());
  }
  for (const auto& x : data)
    if (x.size() != templ.input_dim())
      throw std::invalid_argument("rademacher: data point length does not match d_0");
}

}  // namespace

NetworkParams NetworkParams::from_network(const NetworkSpec& net, bool with_coeffs) {
  NetworkParams p;
  for (const auto& layer : net.layers) {
    p.weights.push_back(layer.weight);
    p.biases.push_back(layer.bias);
  }
  if (with_coeffs)
    for (const auto& term : net.final_map.terms) p.final_coeffs.push_back(term.coeffs);
  return p;
}

void NetworkParams::apply_to(NetworkSpec& net) const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    net.layers[l].weight = weights[l];
    net.layers[l].bias = biases[l];
  }
  for (std::size_t t = 0; t < final_coeffs.size(); ++t)
    net.final_map.terms[t].coeffs = final_coeffs[t];
}

double fixed_function_rademacher(const Matrix& values, const Matrix& signs) {
  if (values.rows() != signs.rows() || values.cols() != signs.cols()) {
    std::ostringstream msg;
    msg << "fixed_function_rademacher: values " << values.rows() << "x"
        << values.cols() << " vs signs " << signs.rows() << "x" << signs.cols();
    throw std::invalid_argument(msg.str());
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      acc += signs(i, j) * values(i, j);
  return std::abs(acc) / static_cast<double>(values.rows());
}

double rademacher_objective(const NetworkSpec& templ, const NetworkParams& params,
                            const Matrix& signs, const std::vector<Vector>& data) {
  check_shapes(templ, signs, data);
  return objective_impl(templ, params, signs, data, nullptr);
}

NetworkParams gradient_of_objective(const NetworkSpec& templ,
                                    const NetworkParams& params,
                                    const Matrix& signs,
                                    const std::vector<Vector>& data,
                                    GradientMode mode, bool with_coeffs) {
  check_shapes(templ, signs, data);
  if (mode == GradientMode::analytic) {
    NetworkParams grad = zero_like(params);
    if (!with_coeffs) grad.final_coeffs.clear();
    objective_impl(templ, params, signs, data, &grad);
    if (grad.final_coeffs.empty() && !params.final_coeffs.empty())
      grad.final_coeffs.assign(params.final_coeffs.size(), Vector());
    return grad;
  }

  // central differences, step 1e-5 (1 + |theta_k|)
  NetworkParams grad = zero_like(params);
  NetworkParams probe = params;
  auto central = [&](double& slot, double& gslot) {
    double saved = slot;
    double h = 1e-5 * (1.0 + std::abs(saved));
    slot = saved + h;
    double hi = objective_impl(templ, probe, signs, data, nullptr);
    slot = saved - h;
    double lo = objective_impl(templ, probe, signs, data, nullptr);
    slot = saved;
    gslot = (hi - lo) / (2.0 * h);
  };
  for (std::size_t l = 0; l < probe.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < probe.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < probe.weights[l].cols(); ++c)
        central(probe.weights[l](r, c), grad.weights[l](r, c));
    for (Eigen::Index r = 0; r < probe.biases[l].size(); ++r)
      central(probe.biases[l](r), grad.biases[l](r));
  }
  if (with_coeffs)
    for (std::size_t t = 0; t < probe.final_coeffs.size(); ++t)
      for (Eigen::Index r = 0; r < probe.final_coeffs[t].size(); ++r)
        central(probe.final_coeffs[t](r), grad.final_coeffs[t](r));
  else
    grad.final_coeffs.clear();
  return grad;
}

namespace {

struct TaskResult {
  double best = 0.0;
  bool discarded = false;
  long long iterations = 0;
  long long projections = 0;
};

Matrix draw_signs(std::uint64_t seed, int sigma_index, int n, int m) {
  Rng rng = Rng::for_task(seed, static_cast<std::uint64_t>(sigma_index));
  Matrix s(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) s(i, j) = static_cast<double>(rng.sign());
  return s;
}

// Ascent of sign_dir * objective from params; returns best |objective| seen
// at feasible iterates, or marks the run discarded on overflow.
void ascend(const NetworkSpec& templ, const WeightClassSpec* cls,
            const std::vector<NetworkParams>* grid_points, NetworkParams params,
            const Matrix& signs, const std::vector<Vector>& data,
            const EstimatorConfig& config, double sign_dir, TaskResult& result) {
  double step = config.step_size;
  for (int k = 0; k < config.steps; ++k) {
    NetworkParams grad =
        gradient_of_objective(templ, params, signs, data, config.gradient_mode,
                              config.optimize_final_map);
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      params.weights[l] += sign_dir * step * grad.weights[l];
      if (cls) {
        params.weights[l] = project_to_class(params.weights[l], *cls);
        ++result.projections;
      }
      if (config.optimize_biases) params.biases[l] += sign_dir * step * grad.biases[l];
    }
    if (config.optimize_final_map)
      for (std::size_t t = 0; t < params.final_coeffs.size(); ++t)
        params.final_coeffs[t] += sign_dir * step * grad.final_coeffs[t];
    if (grid_points) {
      // nearest grid member in flattened parameter distance
      double best_dist = std::numeric_limits<double>::infinity();
      std::size_t best_idx = 0;
      for (std::size_t gi = 0; gi < grid_points->size(); ++gi) {
        const NetworkParams& gp = (*grid_points)[gi];
        double dist = 0.0;
        for (std::size_t l = 0; l < params.weights.size(); ++l) {
          dist += (params.weights[l] - gp.weights[l]).squaredNorm();
          dist += (params.biases[l] - gp.biases[l]).squaredNorm();
        }
        if (dist < best_dist) {
          best_dist = dist;
          best_idx = gi;
        }
      }
      params = (*grid_points)[best_idx];
      ++result.projections;
    }
    step *= config.step_decay;
    ++result.iterations;
    double value = objective_impl(templ, params, signs, data, nullptr);
    if (!std::isfinite(value)) {
      result.discarded = true;
      return;
    }
    result.best = std::max(result.best, std::abs(value));
  }
}

TaskResult run_task(const NetworkSpec& templ, const WeightClassSpec* cls,
                    const std::vector<NetworkSpec>* grid,
                    const std::vector<NetworkParams>* grid_points,
                    const Matrix& signs, const std::vector<Vector>& data,
                    const EstimatorConfig& config, int sigma_index, int restart) {
  TaskResult result;
  NetworkParams init;
  if (grid) {
    init = (*grid_points)[static_cast<std::size_t>(restart) % grid_points->size()];
  } else {
    init = NetworkParams::from_network(templ, config.optimize_final_map);
    if (restart > 0) {
      Rng rng = Rng::for_task(config.seed ^ 0x5eedULL,
                              static_cast<std::uint64_t>(sigma_index) *
                                      static_cast<std::uint64_t>(config.restarts) +
                                  static_cast<std::uint64_t>(restart));
      for (auto& w : init.weights) {
        double scale = cls->operator_norm_cap /
                       std::sqrt(static_cast<double>(std::max(w.rows(), w.cols())));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
          for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * rng.normal();
      }
      if (config.optimize_biases)
        for (auto& b : init.biases)
          for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = rng.normal();
    }
    for (auto& w : init.weights) {
      w = project_to_class(w, *cls);
      ++result.projections;
    }
  }

  double start_value = objective_impl(templ, init, signs, data, nullptr);
  if (!std::isfinite(start_value)) {
    result.discarded = true;
    return result;
  }
  result.best = std::abs(start_value);
  // The |.| objective is nonsmooth at 0: ascend both the sum and its negation.
  ascend(templ, cls, grid_points, init, signs, data, config, +1.0, result);
  if (!result.discarded)
    ascend(templ, cls, grid_points, init, signs, data, config, -1.0, result);
  return result;
}

RademacherEstimate estimate_impl(const NetworkSpec& templ, const WeightClassSpec* cls,
                                 const std::vector<NetworkSpec>* grid,
                                 const std::vector<Vector>& data,
                                 const EstimatorConfig& config) {
  templ.validate();
  if (config.num_sigma < 1 || config.restarts < 1)
    throw std::invalid_argument("estimate_sup: num_sigma and restarts must be >= 1");
  Matrix probe_signs = Matrix::Ones(static_cast<Eigen::Index>(data.size()),
                                    templ.output_dim);
  check_shapes(templ, probe_signs, data);
  if (cls) {
    cls->validate();
    for (int l = 0; l < templ.depth(); ++l) {
      const Matrix& w = templ.layers[l].weight;
      if (cls->kind != WeightClassKind::injective && w.rows() != w.cols())
        throw std::invalid_argument(
            "estimate_sup: class kind needs square template layers");
      if (w.rows() < w.cols())
        throw std::invalid_argument(
            "estimate_sup: template layer is wide; class is injective-oriented");
      if (!cls->feasible_for(std::min(w.rows(), w.cols())))
        throw std::invalid_argument("estimate_sup: infeasible class (C^d < D)");
    }
  }

  std::vector<NetworkParams> grid_points;
  if (grid) {
    if (grid->empty()) throw std::invalid_argument("estimate_sup: empty grid");
    for (const auto& g : *grid)
      grid_points.push_back(NetworkParams::from_network(g, false));
  }

  int num_tasks = config.num_sigma * config.restarts;
  std::vector<Matrix> signs(config.num_sigma);
  for (int s = 0; s < config.num_sigma; ++s)
    signs[s] = draw_signs(config.seed, s, static_cast<int>(data.size()),
                          templ.output_dim);

  std::vector<TaskResult> results(num_tasks);
  auto work = [&](int task) {
    int sigma_index = task / config.restarts;
    int restart = task % config.restarts;
    results[task] = run_task(templ, cls, grid, grid ? &grid_points : nullptr,
                             signs[sigma_index], data, config, sigma_index, restart);
  };
  if (config.threads > 1) {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    int nthreads = std::min(config.threads, num_tasks);
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (int task = next.fetch_add(1); task < num_tasks; task = next.fetch_add(1))
          work(task);
      });
    for (auto& th : pool) th.join();
  } else {
    for (int task = 0; task < num_tasks; ++task) work(task);
  }

  RademacherEstimate est;
  est.num_sigma_samples = config.num_sigma;
  est.restarts_per_sample = config.restarts;
  est.final_map_optimized = config.optimize_final_map;
  for (int s = 0; s < config.num_sigma; ++s) {
    double best = 0.0;
    bool any = false;
    for (int r = 0; r < config.restarts; ++r) {
      const TaskResult& task = results[s * config.restarts + r];
      est.total_iterations += task.iterations;
      est.projection_count += task.projections;
      if (task.discarded) {
        ++est.discarded_restarts;
        continue;
      }
      best = any ? std::max(best, task.best) : task.best;
      any = true;
    }
    if (!any) {
      std::ostringstream msg;
      msg << "estimate_sup: all " << config.restarts
          << " restarts overflowed for sign draw " << s;
      throw std::runtime_error(msg.str());
    }
    est.best_objective_per_sample.push_back(best);
  }
  double sum = std::accumulate(est.best_objective_per_sample.begin(),
                               est.best_objective_per_sample.end(), 0.0);
  est.mean = sum / config.num_sigma;
  if (config.num_sigma > 1) {
    double ss = 0.0;
    for (double v : est.best_objective_per_sample)
      ss += (v - est.mean) * (v - est.mean);
    est.stderr_ = std::sqrt(ss / (config.num_sigma - 1)) /
                  std::sqrt(static_cast<double>(config.num_sigma));
  }
  return est;
}

}  // namespace

RademacherEstimate estimate_sup(const NetworkSpec& templ, const WeightClassSpec& cls,
                                const std::vector<Vector>& data,
                                const EstimatorConfig& config) {
  return estimate_impl(templ, &cls, nullptr, data, config);
}

RademacherEstimate estimate_sup_on_grid(const std::vector<NetworkSpec>& grid,
                                        const std::vector<Vector>& data,
                                        const EstimatorConfig& config) {
  if (grid.empty()) throw std::invalid_argument("estimate_sup_on_grid: empty grid");
  return estimate_impl(grid.front(), nullptr, &grid, data, config);
}

OracleResult brute_force_oracle(const std::vector<NetworkSpec>& grid,
                                const std::vector<Vector>& data, int m) {
  if (grid.empty()) throw std::invalid_argument("brute_force_oracle: empty grid");
  int n = static_cast<int>(data.size());
  if (n < 1) throw std::invalid_argument("brute_force_oracle: needs n >= 1");
  long long bits = static_cast<long long>(n) * m;
  if (bits > 16) {
    std::ostringstream msg;
    msg << "brute_force_oracle: n*m = " << bits
        << " > 16; enumeration of 2^{nm} signs is off the table, use the "
           "Monte-Carlo estimator";
    throw std::invalid_argument(msg.str());
  }
  // cache f(x_i) for every grid member
  std::vector<Matrix> values;
  for (const auto& net : grid) {
    net.validate();
    if (net.output_dim != m)
      throw std::invalid_argument("brute_force_oracle: grid output dim mismatch");
    Matrix v(n, m);
    for (int i = 0; i < n; ++i) v.row(i) = forward(net, data[i]).transpose();
    values.push_back(v);
  }

  long long space = 1LL << bits;
  double acc = 0.0;
  for (long long mask = 0; mask < space; ++mask) {
    double best = 0.0;
    for (const auto& v : values) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
          double sign = ((mask >> (i * m + j)) & 1) ? 1.0 : -1.0;
          s += sign * v(i, j);
        }
      best = std::max(best, std::abs(s) / n);
    }
    acc += best;
  }
  OracleResult out;
  out.exact_value = acc / static_cast<double>(space);
  out.class_size = static_cast<int>(grid.size());
  out.sigma_space_size = space;
  return out;
}

}  // namespace koopbound
