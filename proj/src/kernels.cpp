#include "koopbound/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace koopbound {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

namespace detail {

double sphere_surface_area(int d) {
  // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)
  return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
}

void validate_output_matrix(const Matrix& m, bool require_diagonal,
                            const char* where) {
  if (m.rows() != m.cols())
    throw std::invalid_argument(std::string(where) + ": output matrix must be square");
  detail::require_finite(m, where);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument(std::string(where) + ": output matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument(std::string(where) +
                                ": output matrix must be positive semi-definite");
  if (require_diagonal) {
    Matrix off = m;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument(std::string(where) +
                                  ": per-task output matrices must be diagonal");
  }
}

}  // namespace detail

namespace {

bool near(double a, double b) { return std::abs(a - b) < 1e-9; }

}  // namespace

void ScalarKernelSpec::validate() const {
  if (input_dim < 1)
    throw std::invalid_argument("ScalarKernelSpec: input_dim must be >= 1");
  if (!(sobolev_order > 0.5 * input_dim)) {
    std::ostringstream msg;
    msg << "ScalarKernelSpec: Sobolev embedding needs s > d/2, got s="
        << sobolev_order << ", d=" << input_dim;
    throw std::invalid_argument(msg.str());
  }
  double nu = matern_smoothness();
  if (!near(nu, 0.5) && !near(nu, 1.5) && !near(nu, 2.5)) {
    std::ostringstream msg;
    msg << "ScalarKernelSpec: smoothness nu = s - d/2 = " << nu
        << " unsupported; needs nu in {1/2, 3/2, 5/2}";
    throw std::invalid_argument(msg.str());
  }
  if (!(length_scale > 0.0))
    throw std::invalid_argument("ScalarKernelSpec: length_scale must be > 0");
  if (!(amplitude > 0.0))
    throw std::invalid_argument("ScalarKernelSpec: amplitude must be > 0");
}

int MultiTaskKernelConfig::output_dim() const {
  return tasks.empty() ? 0 : static_cast<int>(tasks.front().output_matrix.rows());
}

void MultiTaskKernelConfig::validate() const {
  if (tasks.empty())
    throw std::invalid_argument("MultiTaskKernelConfig: needs at least one task");
  int d = tasks.front().kernel.input_dim;
  Eigen::Index m = tasks.front().output_matrix.rows();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    tasks[t].kernel.validate();
    if (tasks[t].kernel.input_dim != d)
      throw std::invalid_argument("MultiTaskKernelConfig: tasks must share input_dim");
    if (tasks[t].output_matrix.rows() != m)
      throw std::invalid_argument("MultiTaskKernelConfig: tasks must share output dim");
    std::ostringstream where;
    where << "MultiTaskKernelConfig task " << t;
    detail::validate_output_matrix(tasks[t].output_matrix, true, where.str().c_str());
  }
}

int FinalMapSpec::output_dim() const {
  return terms.empty() ? 0 : static_cast<int>(terms.front().coeffs.size());
}

void FinalMapSpec::validate() const {
  if (terms.empty())
    throw std::invalid_argument("FinalMapSpec: needs at least one term");
  if (input_dim < 1)
    throw std::invalid_argument("FinalMapSpec: input_dim must be >= 1");
  Eigen::Index m = terms.front().coeffs.size();
  for (std::size_t t = 0; t < terms.size(); ++t) {
    if (terms[t].rate < 1)
      throw std::invalid_argument("FinalMapSpec: rates r_t must be >= 1");
    if (terms[t].coeffs.size() != m || terms[t].output_matrix.rows() != m)
      throw std::invalid_argument("FinalMapSpec: terms must share output dim");
    std::ostringstream where;
    where << "FinalMapSpec term " << t;
    detail::validate_output_matrix(terms[t].output_matrix, false, where.str().c_str());
  }
}

double kernel_eval(const ScalarKernelSpec& spec, const Vector& x, const Vector& y) {
  spec.validate();
  if (x.size() != spec.input_dim || y.size() != spec.input_dim) {
    std::ostringstream msg;
    msg << "kernel_eval: expected vectors of length " << spec.input_dim
        << ", got " << x.size() << " and " << y.size();
    throw std::invalid_argument(msg.str());
  }
  double rho = (x - y).norm() / spec.length_scale;
  double nu = spec.matern_smoothness();
  if (near(nu, 0.5)) return spec.amplitude * std::exp(-rho);
  if (near(nu, 1.5)) {
    double a = std::sqrt(3.0) * rho;
    return spec.amplitude * (1.0 + a) * std::exp(-a);
  }
  // validate() guarantees nu == 5/2 here
  double a = std::sqrt(5.0) * rho;
  return spec.amplitude * (1.0 + a + a * a / 3.0) * std::exp(-a);
}

double kappa_bound(const ScalarKernelSpec& spec) {
  spec.validate();
  return spec.amplitude;
}

Matrix gram_matrix(const ScalarKernelSpec& spec, const std::vector<Vector>& points) {
  if (points.empty())
    throw std::invalid_argument("gram_matrix: needs at least one point");
  Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = kappa_bound(spec);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double v = kernel_eval(spec, points[i], points[j]);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

double mvk_gram_trace(const Matrix& k_gram, const Matrix& output_matrix) {
  if (k_gram.rows() != k_gram.cols())
    throw std::invalid_argument("mvk_gram_trace: Gram matrix must be square");
  return k_gram.trace() * output_matrix.trace();
}

double u0(const MultiTaskKernelConfig& config) {
  double total = 0.0;
  for (std::size_t t = 0; t < config.tasks.size(); ++t) {
    double tr = config.tasks[t].output_matrix.trace();
    if (tr < 0.0) {
      std::ostringstream msg;
      msg << "u0: task " << t << " output matrix has negative trace " << tr;
      throw std::invalid_argument(msg.str());
    }
    total += std::sqrt(tr);
  }
  return total;
}

double sobolev_norm_gaussian_bump(double r, double s, int d) {
  if (!(r > 0.0)) throw std::invalid_argument("sobolev_norm_gaussian_bump: r must be > 0");
  if (s < 0.0) throw std::invalid_argument("sobolev_norm_gaussian_bump: s must be >= 0");
  if (d < 1) throw std::invalid_argument("sobolev_norm_gaussian_bump: d must be >= 1");

  // Integrand peaks near rho ~ sqrt(r d); the cutoff T solves
  // T = margin + s log(1+2rT) + (d-1)/2 log(2rT) so the tail beyond
  // rho_max = sqrt(2rT) is negligible relative to the bulk.
  double t_cut = 80.0;
  for (int it = 0; it < 12; ++it) {
    t_cut = 80.0 + s * std::log1p(2.0 * r * t_cut) +
            0.5 * (d - 1) * std::log(std::max(2.0 * r * t_cut, 2.0));
  }
  double rho_max = std::sqrt(2.0 * r * t_cut);
  double amp = std::pow(kPi / r, static_cast<double>(d));
  auto integrand = [&](double rho) {
    return std::pow(1.0 + rho * rho, s) * amp * std::exp(-rho * rho / (2.0 * r)) *
           std::pow(rho, d - 1);
  };

  double surface = detail::sphere_surface_area(d);
  double prev = 0.0, prev2 = 0.0;
  long n = 64;
  for (int doubling = 0; doubling <= 20; ++doubling, n *= 2) {
    // composite Simpson on [0, rho_max] with n panels
    double h = rho_max / static_cast<double>(n);
    double acc = integrand(0.0) + integrand(rho_max);
    for (long i = 1; i < n; ++i)
      acc += (i % 2 ? 4.0 : 2.0) * integrand(i * h);
    double value = surface * acc * h / 3.0;
    if (doubling > 0 && std::abs(value - prev) <= 1e-8 * std::abs(value))
      return value;
    prev2 = prev;
    prev = value;
  }
  std::ostringstream msg;
  msg << "sobolev_norm_gaussian_bump: quadrature did not converge after 20 "
         "doublings; last two iterates "
      << prev2 << " and " << prev;
  throw std::runtime_error(msg.str());
}

double g_norm(const FinalMapSpec& spec) {
  spec.validate();
  double sq = 0.0;
  for (std::size_t t = 0; t < spec.terms.size(); ++t) {
    const auto& term = spec.terms[t];
    Eigen::SelfAdjointEigenSolver<Matrix> eig(term.output_matrix,
                                              Eigen::EigenvaluesOnly);
    double min_eig = eig.eigenvalues().minCoeff();
    double max_eig = eig.eigenvalues().maxCoeff();
    if (min_eig <= 0.0 || min_eig <= 1e-14 * max_eig) {
      std::ostringstream msg;
      msg << "g_norm: output matrix of task " << t
          << " is singular (min eigenvalue " << min_eig
          << "); the separable norm rule needs positive definite M_t";
      throw std::invalid_argument(msg.str());
    }
    double bump = sobolev_norm_gaussian_bump(static_cast<double>(term.rate),
                                             spec.sobolev_order, spec.input_dim);
    // v^T M^{-1} v with v = M c collapses to c^T M c
    double quad = term.coeffs.dot(term.output_matrix * term.coeffs);
    sq += bump * quad;
  }
  return std::sqrt(sq);
}

}  // namespace koopbound
