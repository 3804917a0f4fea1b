#pragma once

#include "koopbound/matrix_analysis.hpp"

#include <vector>

namespace koopbound {

// Scalar Sobolev kernel of order s on R^d, realized as the Matern kernel with
// half-integer smoothness nu = s - d/2. The Fourier transform of the Matern
// family decays like (1 + |.|^2)^{-s}, so its native space is H^s(R^d).
// Only nu in {1/2, 3/2, 5/2} is supported (closed forms).
struct ScalarKernelSpec {
  double sobolev_order = 1.0;  // s, must satisfy s > d/2
  int input_dim = 1;           // d
  double length_scale = 1.0;
  double amplitude = 1.0;      // k(x,x) = amplitude; override hook for kappa

  double matern_smoothness() const { return sobolev_order - 0.5 * input_dim; }
  void validate() const;
};

struct MultiTaskKernelConfig {
  struct Task {
    ScalarKernelSpec kernel;
    Matrix output_matrix;  // M_t, m x m diagonal p.s.d.
  };
  std::vector<Task> tasks;

  int output_dim() const;
  void validate() const;  // shared d and m, T >= 1, diagonal p.s.d. M_t
};

// Final nonlinear map g(x) = sum_t exp(-r_t |x|^2) M_t c_t.
struct FinalMapSpec {
  struct Term {
    int rate = 1;          // r_t >= 1
    Matrix output_matrix;  // M_t, positive definite
    Vector coeffs;         // c_t in R^m
  };
  std::vector<Term> terms;
  int input_dim = 1;          // d_L
  double sobolev_order = 1.0; // s_L

  int output_dim() const;
  void validate() const;
};

double kernel_eval(const ScalarKernelSpec& spec, const Vector& x, const Vector& y);

// Tight constant kappa with k(x,x) <= kappa for all x; equals Phi(0), i.e.
// the amplitude, for this translation-invariant family.
double kappa_bound(const ScalarKernelSpec& spec);

Matrix gram_matrix(const ScalarKernelSpec& spec, const std::vector<Vector>& points);

// Tr(k_gram (x) M) = Tr(k_gram) Tr(M); the Kronecker product is never formed.
double mvk_gram_trace(const Matrix& k_gram, const Matrix& output_matrix);

// U_0 = sum_t sqrt(Tr(M_t))
double u0(const MultiTaskKernelConfig& config);

// Squared H^s(R^d) norm of phi(x) = exp(-r |x|^2) under the convention
// phihat(w) = int phi(x) e^{-i<x,w>} dx, so phihat(w) = (pi/r)^{d/2}
// e^{-|w|^2/(4r)}:
//
//   int (1 + |w|^2)^s |phihat(w)|^2 dw
//     = surface(S^{d-1}) int_0^inf (1+rho^2)^s (pi/r)^d e^{-rho^2/(2r)}
//       rho^{d-1} drho.
//
// Evaluated by node-doubling Simpson quadrature, converged at 1e-8 relative.
double sobolev_norm_gaussian_bump(double r, double s, int d);

// Direct-sum Sobolev norm of g: sqrt(sum_t |phi_{r_t}|^2_{H^{s_L}} c_t^T M_t
// c_t), via the separable-kernel norm rule |phi v|^2_{H_kM} = |phi|^2_{H_k}
// v^T M^{-1} v with v = M_t c_t. Requires every M_t positive definite.
double g_norm(const FinalMapSpec& spec);

namespace detail {
double sphere_surface_area(int d);  // |S^{d-1}|
void validate_output_matrix(const Matrix& m, bool require_diagonal,
                            const char* where);
}

}  // namespace koopbound
