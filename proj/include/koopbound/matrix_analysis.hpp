#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace koopbound {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Rank-deficiency threshold: singular values below rank_tolerance * sigma_max
// are treated as zero.
inline constexpr double kRankTolerance = 1e-14;

struct SvdResult {
  Vector singular_values;  // nonincreasing, all >= 0
  Matrix left_vectors;     // U, orthonormal columns
  Matrix right_vectors;    // V, orthonormal columns
};

enum class WeightClassKind { invertible, injective, orthogonal };

// Constraint set on weight matrices: operator norm <= operator_norm_cap,
// determinant term >= det_floor. For the injective kind the determinant term
// is det(W^T W)^{1/2}; for orthogonal, membership additionally requires
// W^T W = I.
struct WeightClassSpec {
  WeightClassKind kind = WeightClassKind::invertible;
  double operator_norm_cap = 1.0;  // C
  double det_floor = 1.0;          // D

  // The class is nonempty for matrices with k = min(rows, cols) singular
  // values only if C^k >= D.
  bool feasible_for(Eigen::Index dim) const;
  void validate() const;  // C > 0, D > 0
};

struct ClassMembership {
  bool member = false;
  double operator_norm = 0.0;
  double det_term = 0.0;             // |det W| or det(W^T W)^{1/2}
  double orthogonality_defect = 0.0; // ||W^T W - I||_F
  std::vector<std::string> violations;
};

struct GramDetQuarter {
  double value = 0.0;
  bool rank_deficient = false;
};

SvdResult svd(const Matrix& w);

// sigma_max(W)
double operator_norm(const Matrix& w);

// sigma_max / sigma_min for square W; +inf when sigma_min < 1e-14 * sigma_max
double condition_number(const Matrix& w);

// |det W| as the product of singular values, so that it shares one numerical
// pathway with the bound factors. Square W only.
double det_abs(const Matrix& w);

// det(W^T W)^{1/4} = (prod sigma_i)^{1/2} for tall or square W (rows >= cols).
// Rank-deficient input yields value 0 with the flag set.
GramDetQuarter gram_det_quarter(const Matrix& w);

ClassMembership class_membership(const Matrix& w, const WeightClassSpec& spec);

// Nearest-feasible repair: singular values clipped to [1e-6, C]; if the
// determinant term still falls short of D the smallest singular values are
// raised first, each capped at C. Orthogonal kind returns U V^T. Members are
// returned unchanged.
Matrix project_to_class(const Matrix& w, const WeightClassSpec& spec);

// Matrix A with A vec(x) = vec(conv(x)) for the zero-padded 2-D convolution
// out(k,l) = sum_{i,j} filter(k-i, l-j) x(i,j), row-major vec. The output
// support is the full convolution range, so A has shape
// (in_rows+f_rows-1)*(in_cols+f_cols-1) x in_rows*in_cols.
Matrix conv_filter_to_matrix(const Matrix& filter, Eigen::Index in_rows,
                             Eigen::Index in_cols);

namespace detail {
void require_finite(const Matrix& w, const char* op);
}

}  // namespace koopbound
