#pragma once

// Independent oracles used by the tests. Everything here is deliberately
// written against the math directly (power iteration, pivoted LU, grid
// searches, nested loops) and shares no code path with the library.

#include "koopbound/matrix_analysis.hpp"
#include "koopbound/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracles {

using koopbound::Matrix;
using koopbound::Vector;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols,
                            koopbound::Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

// eigenvalues of a symmetric 2x2 [[a,b],[b,c]] by the quadratic formula
inline std::pair<double, double> sym2x2_eigenvalues(double a, double b, double c) {
  double mean = 0.5 * (a + c);
  double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  return {mean + disc, mean - disc};
}

inline double power_iteration_norm(const Matrix& w, int iters = 2000) {
  Matrix gram = w.transpose() * w;
  Vector v = Vector::Ones(gram.rows());
  v.normalize();
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    Vector next = gram * v;
    lambda = next.norm();
    if (lambda == 0.0) return 0.0;
    v = next / lambda;
  }
  return std::sqrt(lambda);
}

// |det| via Doolittle LU with partial pivoting
inline double lu_det_abs(Matrix a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("lu_det_abs: square only");
  Eigen::Index n = a.rows();
  double det = 1.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = k;
    for (Eigen::Index i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(pivot, k))) pivot = i;
    if (a(pivot, k) == 0.0) return 0.0;
    if (pivot != k) a.row(pivot).swap(a.row(k));
    det *= a(k, k);
    for (Eigen::Index i = k + 1; i < n; ++i) {
      double f = a(i, k) / a(k, k);
      for (Eigen::Index j = k; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return std::abs(det);
}

// direct double-loop zero-padded full convolution, row-major output
inline Matrix direct_full_convolution(const Matrix& filter, const Matrix& x) {
  Eigen::Index out_rows = x.rows() + filter.rows() - 1;
  Eigen::Index out_cols = x.cols() + filter.cols() - 1;
  Matrix out = Matrix::Zero(out_rows, out_cols);
  for (Eigen::Index k = 0; k < out_rows; ++k)
    for (Eigen::Index l = 0; l < out_cols; ++l)
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          Eigen::Index fi = k - i, fj = l - j;
          if (fi >= 0 && fi < filter.rows() && fj >= 0 && fj < filter.cols())
            out(k, l) += filter(fi, fj) * x(i, j);
        }
  return out;
}

inline Vector vec_row_major(const Matrix& x) {
  Vector v(x.rows() * x.cols());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) v(k++) = x(i, j);
  return v;
}

// plain scalar matvec so summation order matches the nested-loop oracles
inline Vector matvec(const Matrix& a, const Vector& v) {
  Vector out = Vector::Zero(a.rows());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) out(r) += a(r, c) * v(c);
  return out;
}

inline Matrix random_int_matrix(Eigen::Index rows, Eigen::Index cols,
                                koopbound::Rng& rng, int range = 8) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<double>(static_cast<int>(rng.next_u64() %
                                                     (2 * range + 1)) - range);
  return m;
}

// dense log-spaced 1-D grid search for
// sup_rho ((1+sig^2 rho^2)^{s_in} / (1+rho^2)^{s_out})^{1/2}
inline double ratio_sup_grid(double sigma_max, double s_in, double s_out,
                             long points = 1000000, double rho_max = 1e3) {
  double best = 1.0;  // h(0)
  for (long i = 0; i <= points; ++i) {
    double rho = std::pow(10.0, -6.0 + (std::log10(rho_max) + 6.0) * i / points);
    double h = std::pow(1.0 + sigma_max * sigma_max * rho * rho, s_in) /
               std::pow(1.0 + rho * rho, s_out);
    best = std::max(best, h);
  }
  return std::sqrt(best);
}

// 2-D grid search of the same ratio with omega restricted to range(W),
// parameterized by coefficients on an orthonormal basis of the column space;
// the grid zooms onto the best cell until the sup is resolved
inline double ratio_sup_range_grid(const Matrix& w, double s_in, double s_out,
                                   int points_per_axis = 120, double coord_max = 50.0,
                                   int zoom_rounds = 8) {
  Eigen::HouseholderQR<Matrix> qr(w);
  Matrix q = qr.householderQ() * Matrix::Identity(w.rows(), w.cols());
  auto h = [&](double a, double b) {
    Vector omega = a * q.col(0) + b * q.col(1);
    return std::pow(1.0 + (w.transpose() * omega).squaredNorm(), s_in) /
           std::pow(1.0 + omega.squaredNorm(), s_out);
  };
  double best = 1.0;  // omega = 0
  double ca = 0.0, cb = 0.0, half = coord_max;
  for (int round = 0; round < zoom_rounds; ++round) {
    double best_a = ca, best_b = cb;
    for (int i = -points_per_axis; i <= points_per_axis; ++i)
      for (int j = -points_per_axis; j <= points_per_axis; ++j) {
        double a = ca + half * i / points_per_axis;
        double b = cb + half * j / points_per_axis;
        double v = h(a, b);
        if (v > best) {
          best = v;
          best_a = a;
          best_b = b;
        }
      }
    ca = best_a;
    cb = best_b;
    half *= 4.0 / points_per_axis;  // zoom onto the winning cell
  }
  return std::sqrt(best);
}

// trapezoid reference for the radial Sobolev integral of the Gaussian bump
inline double bump_norm_trapezoid(double r, double s, int d, long nodes,
                                  double rho_max) {
  auto f = [&](double rho) {
    return std::pow(1.0 + rho * rho, s) *
           std::pow(3.14159265358979323846 / r, static_cast<double>(d)) *
           std::exp(-rho * rho / (2.0 * r)) * std::pow(rho, d - 1);
  };
  double h = rho_max / nodes;
  double acc = 0.5 * (f(0.0) + f(rho_max));
  for (long i = 1; i < nodes; ++i) acc += f(i * h);
  double surface = 2.0 * std::pow(3.14159265358979323846, 0.5 * d) /
                   std::tgamma(0.5 * d);
  return surface * acc * h;
}

// minimal XML well-formedness check: tag balance, attribute quoting, one root
inline bool xml_well_formed(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool seen_root = false;
  // skip declaration
  if (text.rfind("<?xml", 0) == 0) {
    std::size_t end = text.find("?>");
    if (end == std::string::npos) return false;
    i = end + 2;
  }
  while (i < text.size()) {
    if (text[i] == '<') {
      std::size_t close = text.find('>', i);
      if (close == std::string::npos) return false;
      std::string tag = text.substr(i + 1, close - i - 1);
      if (tag.empty()) return false;
      if (tag[0] == '/') {
        std::string name = tag.substr(1);
        if (stack.empty() || stack.back() != name) return false;
        stack.pop_back();
      } else {
        bool self_closing = tag.back() == '/';
        if (self_closing) tag.pop_back();
        std::size_t sp = tag.find_first_of(" \t\n");
        std::string name = sp == std::string::npos ? tag : tag.substr(0, sp);
        if (name.empty()) return false;
        // attributes must have quoted values
        std::string attrs = sp == std::string::npos ? "" : tag.substr(sp);
        int quotes = static_cast<int>(std::count(attrs.begin(), attrs.end(), '"'));
        if (quotes % 2 != 0) return false;
        if (stack.empty()) {
          if (seen_root) return false;  // second root
          seen_root = true;
        }
        if (!self_closing) stack.push_back(name);
      }
      i = close + 1;
    } else {
      if (stack.empty() && !std::isspace(static_cast<unsigned char>(text[i])))
        return false;  // content outside the root
      std::size_t next = text.find('<', i);
      std::string content = text.substr(i, next - i);
      // bare & or < in content would have been caught; check for stray &
      for (std::size_t k = 0; k < content.size(); ++k) {
        if (content[k] == '&') {
          std::size_t semi = content.find(';', k);
          if (semi == std::string::npos || semi - k > 6) return false;
        }
      }
      if (next == std::string::npos) break;
      i = next;
    }
  }
  return stack.empty() && seen_root;
}

}  // namespace oracles
