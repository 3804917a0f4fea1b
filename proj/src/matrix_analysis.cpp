#include "koopbound/matrix_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace koopbound {

namespace detail {

void require_finite(const Matrix& w, const char* op) {
  if (!w.allFinite()) {
    std::ostringstream msg;
    msg << op << ": matrix " << w.rows() << "x" << w.cols()
        << " contains non-finite entries";
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace detail

namespace {

void require_square(const Matrix& w, const char* op) {
  if (w.rows() != w.cols()) {
    std::ostringstream msg;
    msg << op << ": expected a square matrix, got " << w.rows() << "x"
        << w.cols();
    throw std::invalid_argument(msg.str());
  }
}

const char* kind_name(WeightClassKind k) {
  switch (k) {
    case WeightClassKind::invertible: return "invertible";
    case WeightClassKind::injective: return "injective";
    case WeightClassKind::orthogonal: return "orthogonal";
  }
  return "?";
}

// Membership slack on each constraint.
constexpr double kMembershipSlack = 1e-9;
constexpr double kSingularFloor = 1e-6;

}  // namespace

bool WeightClassSpec::feasible_for(Eigen::Index dim) const {
  return std::pow(operator_norm_cap, static_cast<double>(dim)) >=
         det_floor * (1.0 - 1e-12);
}

void WeightClassSpec::validate() const {
  if (!(operator_norm_cap > 0.0))
    throw std::invalid_argument("WeightClassSpec: operator norm cap C must be > 0");
  if (!(det_floor > 0.0))
    throw std::invalid_argument("WeightClassSpec: determinant floor D must be > 0");
}

SvdResult svd(const Matrix& w) {
  detail::require_finite(w, "svd");
  SvdResult out;
  if (std::min(w.rows(), w.cols()) > 16) {
    Eigen::BDCSVD<Matrix> dec(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (dec.info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "svd: decomposition of " << w.rows() << "x" << w.cols()
          << " matrix did not converge";
      throw std::runtime_error(msg.str());
    }
    out.singular_values = dec.singularValues();
    out.left_vectors = dec.matrixU();
    out.right_vectors = dec.matrixV();
  } else {
    Eigen::JacobiSVD<Matrix> dec(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.singular_values = dec.singularValues();
    out.left_vectors = dec.matrixU();
    out.right_vectors = dec.matrixV();
  }
  return out;
}

double operator_norm(const Matrix& w) {
  return svd(w).singular_values(0);
}

double condition_number(const Matrix& w) {
  require_square(w, "condition_number");
  Vector sv = svd(w).singular_values;
  double smax = sv(0);
  double smin = sv(sv.size() - 1);
  if (smax == 0.0 || smin < kRankTolerance * smax)
    return std::numeric_limits<double>::infinity();
  return smax / smin;
}

double det_abs(const Matrix& w) {
  require_square(w, "det_abs");
  Vector sv = svd(w).singular_values;
  double p = 1.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) p *= sv(i);
  return p;
}

GramDetQuarter gram_det_quarter(const Matrix& w) {
  if (w.rows() < w.cols()) {
    std::ostringstream msg;
    msg << "gram_det_quarter: matrix is " << w.rows() << "x" << w.cols()
        << " (wide); injective orientation needs rows >= cols -- transpose the input";
    throw std::invalid_argument(msg.str());
  }
  Vector sv = svd(w).singular_values;
  GramDetQuarter out;
  double smax = sv(0);
  double p = 1.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) < kRankTolerance * smax) {
      out.rank_deficient = true;
      out.value = 0.0;
      return out;
    }
    p *= sv(i);
  }
  out.value = std::sqrt(p);
  return out;
}

ClassMembership class_membership(const Matrix& w, const WeightClassSpec& spec) {
  spec.validate();
  if (spec.kind != WeightClassKind::injective) {
    if (w.rows() != w.cols()) {
      std::ostringstream msg;
      msg << "class_membership: " << kind_name(spec.kind)
          << " class needs a square matrix, got " << w.rows() << "x" << w.cols();
      throw std::invalid_argument(msg.str());
    }
  } else if (w.rows() < w.cols()) {
    std::ostringstream msg;
    msg << "class_membership: injective class needs rows >= cols, got "
        << w.rows() << "x" << w.cols();
    throw std::invalid_argument(msg.str());
  }
  detail::require_finite(w, "class_membership");

  Vector sv = svd(w).singular_values;
  ClassMembership out;
  out.operator_norm = sv(0);
  double p = 1.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) p *= sv(i);
  out.det_term = p;
  Matrix gram = w.transpose() * w;
  out.orthogonality_defect =
      (gram - Matrix::Identity(gram.rows(), gram.cols())).norm();

  out.member = true;
  if (out.operator_norm > spec.operator_norm_cap + kMembershipSlack) {
    out.member = false;
    std::ostringstream msg;
    msg << "operator norm " << out.operator_norm << " exceeds cap "
        << spec.operator_norm_cap;
    out.violations.push_back(msg.str());
  }
  if (out.det_term < spec.det_floor - kMembershipSlack) {
    out.member = false;
    std::ostringstream msg;
    msg << "determinant term " << out.det_term << " below floor "
        << spec.det_floor;
    out.violations.push_back(msg.str());
  }
  if (spec.kind == WeightClassKind::orthogonal &&
      out.orthogonality_defect > kMembershipSlack) {
    out.member = false;
    std::ostringstream msg;
    msg << "orthogonality defect " << out.orthogonality_defect << " above "
        << kMembershipSlack;
    out.violations.push_back(msg.str());
  }
  return out;
}

Matrix project_to_class(const Matrix& w, const WeightClassSpec& spec) {
  spec.validate();
  if (spec.kind != WeightClassKind::injective) {
    require_square(w, "project_to_class");
  } else if (w.rows() < w.cols()) {
    std::ostringstream msg;
    msg << "project_to_class: injective class needs rows >= cols, got "
        << w.rows() << "x" << w.cols();
    throw std::invalid_argument(msg.str());
  }
  Eigen::Index k = std::min(w.rows(), w.cols());
  if (!spec.feasible_for(k)) {
    std::ostringstream msg;
    msg << "project_to_class: infeasible class (C=" << spec.operator_norm_cap
        << ")^" << k << " < D=" << spec.det_floor;
    throw std::invalid_argument(msg.str());
  }

  SvdResult dec = svd(w);
  const Vector& s0 = dec.singular_values;  // nonincreasing
  double prod0 = 1.0;
  for (Eigen::Index i = 0; i < s0.size(); ++i) prod0 *= s0(i);
  bool member = s0(0) <= spec.operator_norm_cap + kMembershipSlack &&
                prod0 >= spec.det_floor - kMembershipSlack;
  if (spec.kind == WeightClassKind::orthogonal) {
    double defect = (w.transpose() * w - Matrix::Identity(k, k)).norm();
    member = member && defect <= kMembershipSlack;
    if (member) return w;
    return dec.left_vectors * dec.right_vectors.transpose();
  }
  if (member) return w;

  Vector sv = s0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    sv(i) = std::clamp(sv(i), kSingularFloor, spec.operator_norm_cap);

  double prod = 1.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) prod *= sv(i);
  if (prod < spec.det_floor) {
    // Raise smallest singular values first, each capped at C. Values stay
    // paired with their own singular directions.
    for (Eigen::Index i = sv.size() - 1; i >= 0 && prod < spec.det_floor; --i) {
      double want = sv(i) * (spec.det_floor / prod);
      double raised = std::min(want, spec.operator_norm_cap);
      prod *= raised / sv(i);
      sv(i) = raised;
    }
  }
  return dec.left_vectors.leftCols(k) * sv.asDiagonal() *
         dec.right_vectors.leftCols(k).transpose();
}

Matrix conv_filter_to_matrix(const Matrix& filter, Eigen::Index in_rows,
                             Eigen::Index in_cols) {
  if (filter.rows() < 1 || filter.cols() < 1 || in_rows < 1 || in_cols < 1)
    throw std::invalid_argument("conv_filter_to_matrix: shapes must be positive");
  detail::require_finite(filter, "conv_filter_to_matrix");
  Eigen::Index out_rows = in_rows + filter.rows() - 1;
  Eigen::Index out_cols = in_cols + filter.cols() - 1;
  Matrix a = Matrix::Zero(out_rows * out_cols, in_rows * in_cols);
  for (Eigen::Index k = 0; k < out_rows; ++k)
    for (Eigen::Index l = 0; l < out_cols; ++l)
      for (Eigen::Index i = 0; i < in_rows; ++i) {
        Eigen::Index fi = k - i;
        if (fi < 0 || fi >= filter.rows()) continue;
        for (Eigen::Index j = 0; j < in_cols; ++j) {
          Eigen::Index fj = l - j;
          if (fj < 0 || fj >= filter.cols()) continue;
          a(k * out_cols + l, i * in_cols + j) = filter(fi, fj);
        }
      }
  return a;
}

}  // namespace koopbound
