#include "koopbound/kernels.hpp"
#include "koopbound/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace koopbound;

namespace {

ScalarKernelSpec spec_for(double nu, int d, double length_scale = 1.0,
                          double amplitude = 1.0) {
  ScalarKernelSpec s;
  s.input_dim = d;
  s.sobolev_order = 0.5 * d + nu;
  s.length_scale = length_scale;
  s.amplitude = amplitude;
  return s;
}

Vector vec1(double x) {
  Vector v(1);
  v << x;
  return v;
}

}  // namespace

TEST_CASE("kernel_eval closed forms") {
  ScalarKernelSpec half = spec_for(0.5, 2);
  Vector x = Vector::Zero(2), y = Vector::Zero(2);
  CHECK(kernel_eval(half, x, y) == doctest::Approx(1.0));

  y << 1.0, 0.0;
  // exp(-1), frozen from a 40-digit reference
  CHECK(kernel_eval(half, x, y) ==
        doctest::Approx(0.36787944117144232).epsilon(1e-12));

  // Matern 3/2 at rho = 0.7, frozen from a 40-digit reference
  ScalarKernelSpec three = spec_for(1.5, 1);
  CHECK(kernel_eval(three, vec1(0.0), vec1(0.7)) ==
        doctest::Approx(0.65813737631658392).epsilon(1e-12));

  // Matern 5/2 at rho = 0.7
  ScalarKernelSpec five = spec_for(2.5, 1);
  CHECK(kernel_eval(five, vec1(0.0), vec1(0.7)) ==
        doctest::Approx(0.70694268190409771).epsilon(1e-12));
}

TEST_CASE("kernel spec validation") {
  ScalarKernelSpec bad = spec_for(1.0, 2);  // nu = 1 unsupported
  Vector x = Vector::Zero(2);
  CHECK_THROWS_WITH_AS(kernel_eval(bad, x, x), doctest::Contains("nu"),
                       std::invalid_argument);

  ScalarKernelSpec boundary;
  boundary.input_dim = 2;
  boundary.sobolev_order = 1.0;  // s = d/2 violates the embedding
  CHECK_THROWS_WITH_AS(boundary.validate(), doctest::Contains("s > d/2"),
                       std::invalid_argument);

  CHECK_THROWS_AS(kernel_eval(spec_for(0.5, 2), Vector::Zero(3), Vector::Zero(2)),
                  std::invalid_argument);
}

TEST_CASE("kappa_bound") {
  CHECK(kappa_bound(spec_for(0.5, 3)) == 1.0);
  CHECK(kappa_bound(spec_for(1.5, 2, 2.0, 3.5)) == 3.5);

  // consistency: max over sampled diagonal values equals kappa exactly
  ScalarKernelSpec s = spec_for(2.5, 2, 0.7, 1.0);
  Rng rng(31);
  double max_diag = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Vector x(2);
    x << rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0);
    max_diag = std::max(max_diag, kernel_eval(s, x, x));
  }
  CHECK(max_diag == kappa_bound(s));
}

TEST_CASE("gram_matrix") {
  ScalarKernelSpec s = spec_for(0.5, 2);
  Vector p = Vector::Zero(2);
  Matrix g1 = gram_matrix(s, {p});
  CHECK(g1.rows() == 1);
  CHECK(g1(0, 0) == doctest::Approx(1.0));

  Matrix g2 = gram_matrix(s, {p, p});
  CHECK((g2 - Matrix::Ones(2, 2)).cwiseAbs().maxCoeff() <= 1e-15);

  Rng rng(32);
  std::vector<Vector> pts;
  for (int i = 0; i < 5; ++i) {
    Vector x(2);
    x << rng.normal(), rng.normal();
    pts.push_back(x);
  }
  Matrix g = gram_matrix(s, pts);
  CHECK((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("gram_matrix psd and symmetric across random point sets") {
  Rng rng(33);
  double nus[] = {0.5, 1.5, 2.5};
  for (int trial = 0; trial < 50; ++trial) {
    int d = 1 + static_cast<int>(rng.next_u64() % 3);
    ScalarKernelSpec s = spec_for(nus[trial % 3], d, 0.5 + rng.uniform());
    int n = 2 + static_cast<int>(rng.next_u64() % 7);
    std::vector<Vector> pts;
    for (int i = 0; i < n; ++i) {
      Vector x(d);
      for (int j = 0; j < d; ++j) x(j) = 2.0 * rng.normal();
      pts.push_back(x);
    }
    Matrix g = gram_matrix(s, pts);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
    // translation invariance on the diagonal
    for (int i = 0; i < n; ++i)
      CHECK(kernel_eval(s, pts[i], pts[i]) == kappa_bound(s));
  }
}

TEST_CASE("mvk_gram_trace") {
  CHECK(mvk_gram_trace(Matrix::Identity(3, 3), Matrix::Identity(2, 2)) ==
        doctest::Approx(6.0));

  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 1.5;  // Tr = 2.5
  CHECK(mvk_gram_trace(Matrix::Identity(4, 4), m) == doctest::Approx(10.0));

  // random pair vs explicitly materialized Kronecker product
  Rng rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next_u64() % 7);
    Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.next_u64() % 4);
    Matrix g = oracles::random_matrix(n, n, rng);
    Matrix m2 = oracles::random_matrix(k, k, rng);
    Matrix kron(n * k, n * k);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b)
        kron.block(a * k, b * k, k, k) = g(a, b) * m2;
    CHECK(mvk_gram_trace(g, m2) == doctest::Approx(kron.trace()).epsilon(1e-14));
  }
}

TEST_CASE("u0") {
  MultiTaskKernelConfig one;
  one.tasks.push_back({spec_for(0.5, 2), Matrix::Identity(4, 4)});
  CHECK(u0(one) == doctest::Approx(2.0));

  MultiTaskKernelConfig two;
  two.tasks.push_back({spec_for(0.5, 1), Matrix::Identity(4, 4)});
  Matrix nine(1, 1);
  nine << 9.0;
  two.tasks.push_back({spec_for(0.5, 1), nine});
  CHECK(u0(two) == doctest::Approx(5.0));

  Rng rng(35);
  MultiTaskKernelConfig three;
  double expected = 0.0;
  for (int t = 0; t < 3; ++t) {
    Matrix m = Matrix::Zero(3, 3);
    double tr = 0.0;
    for (int i = 0; i < 3; ++i) {
      m(i, i) = rng.uniform(0.1, 4.0);
      tr += m(i, i);
    }
    expected += std::sqrt(tr);
    three.tasks.push_back({spec_for(0.5, 2), m});
  }
  CHECK(u0(three) == doctest::Approx(expected).epsilon(1e-15));

  MultiTaskKernelConfig bad;
  Matrix neg = -Matrix::Identity(2, 2);
  bad.tasks.push_back({spec_for(0.5, 2), neg});
  CHECK_THROWS_WITH_AS(u0(bad), doctest::Contains("negative trace"),
                       std::invalid_argument);
}

TEST_CASE("sobolev_norm_gaussian_bump s=0 Parseval value") {
  // 2 pi sqrt(pi/2), frozen from a 40-digit reference
  CHECK(sobolev_norm_gaussian_bump(1.0, 0.0, 1) ==
        doctest::Approx(7.8748049728612099).epsilon(1e-8));
}

TEST_CASE("sobolev_norm_gaussian_bump monotone in s") {
  double v1 = sobolev_norm_gaussian_bump(1.0, 1.0, 2);
  double v2 = sobolev_norm_gaussian_bump(1.0, 2.0, 2);
  CHECK(v2 > v1);
  // strictly increasing along a denser ladder
  double prev = sobolev_norm_gaussian_bump(2.0, 0.0, 3);
  for (double s = 0.5; s <= 4.0; s += 0.5) {
    double cur = sobolev_norm_gaussian_bump(2.0, s, 3);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("sobolev_norm_gaussian_bump vs brute-force trapezoid") {
  double ours = sobolev_norm_gaussian_bump(1.0, 1.0, 1);
  double reference = oracles::bump_norm_trapezoid(1.0, 1.0, 1, 1000000, 30.0);
  CHECK(ours == doctest::Approx(reference).epsilon(1e-6));
  // closed form for this case: 2 pi sqrt(2 pi)
  CHECK(ours == doctest::Approx(15.749609945722420).epsilon(1e-8));
}

TEST_CASE("sobolev_norm_gaussian_bump deterministic") {
  double a = sobolev_norm_gaussian_bump(3.0, 2.5, 2);
  double b = sobolev_norm_gaussian_bump(3.0, 2.5, 2);
  CHECK(a == b);
}

TEST_CASE("g_norm single-term reduction") {
  FinalMapSpec g;
  g.input_dim = 2;
  g.sobolev_order = 2.0;
  FinalMapSpec::Term term;
  term.rate = 1;
  term.output_matrix = Matrix::Identity(3, 3);
  term.coeffs = Vector::Zero(3);
  term.coeffs(0) = 1.0;
  g.terms.push_back(term);
  CHECK(g_norm(g) ==
        doctest::Approx(std::sqrt(sobolev_norm_gaussian_bump(1.0, 2.0, 2)))
            .epsilon(1e-12));
}

TEST_CASE("g_norm homogeneity and task additivity") {
  Rng rng(36);
  FinalMapSpec g;
  g.input_dim = 2;
  g.sobolev_order = 1.5;
  for (int t = 0; t < 2; ++t) {
    FinalMapSpec::Term term;
    term.rate = t + 1;
    term.output_matrix = Matrix::Zero(2, 2);
    term.output_matrix(0, 0) = rng.uniform(0.5, 2.0);
    term.output_matrix(1, 1) = rng.uniform(0.5, 2.0);
    term.coeffs = Vector(2);
    term.coeffs << rng.normal(), rng.normal();
    g.terms.push_back(term);
  }

  double base = g_norm(g);
  FinalMapSpec doubled = g;
  for (auto& term : doubled.terms) term.coeffs *= 2.0;
  CHECK(g_norm(doubled) == doctest::Approx(2.0 * base).epsilon(1e-12));

  // squared norms add across tasks (orthogonal direct sum)
  FinalMapSpec only0 = g, only1 = g;
  only0.terms = {g.terms[0]};
  only1.terms = {g.terms[1]};
  double sq_sum = g_norm(only0) * g_norm(only0) + g_norm(only1) * g_norm(only1);
  CHECK(base * base == doctest::Approx(sq_sum).epsilon(1e-12));

  // term-by-term hand computation
  double hand = 0.0;
  for (const auto& term : g.terms) {
    double bump = sobolev_norm_gaussian_bump(term.rate, 1.5, 2);
    double quad = term.coeffs(0) * term.coeffs(0) * term.output_matrix(0, 0) +
                  term.coeffs(1) * term.coeffs(1) * term.output_matrix(1, 1);
    hand += bump * quad;
  }
  CHECK(base == doctest::Approx(std::sqrt(hand)).epsilon(1e-10));
}

TEST_CASE("g_norm rejects singular output matrices") {
  FinalMapSpec g;
  g.input_dim = 1;
  g.sobolev_order = 1.0;
  FinalMapSpec::Term term;
  term.rate = 1;
  term.output_matrix = Matrix::Zero(2, 2);
  term.output_matrix(0, 0) = 1.0;  // second eigenvalue 0
  term.coeffs = Vector::Ones(2);
  g.terms.push_back(term);
  CHECK_THROWS_WITH_AS(g_norm(g), doctest::Contains("task 0"), std::invalid_argument);
}
