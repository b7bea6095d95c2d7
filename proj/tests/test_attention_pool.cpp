// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "eq5d/attention_pool.hpp"
#include "eq5d/error.hpp"
#include "eq5d/rng.hpp"

using namespace eq5d;
using nn::Matrix;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Loss with fixed weights on z so every coordinate matters.
double loss(const Matrix& H, const Matrix& V, const Matrix& w, const Matrix& g) {
  return (attention_pool(H, V, w).z.array() * g.array()).sum();
}

double max_rel_error(const Matrix& analytic, Matrix& x, const std::function<double()>& f) {
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double up = f();
    x.data()[i] = keep - h;
    const double down = f();
    x.data()[i] = keep;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic.data()[i]), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic.data()[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_SUITE("attention_pool") {
  TEST_CASE("weights sum to one even with huge scores") {
    Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto n = 1 + static_cast<Eigen::Index>(rng.below(10));
      const double scale = trial % 2 ? 1e3 : 1.0;
      const Matrix H = random_matrix(rng, n, 4);
      const Matrix V = random_matrix(rng, 3, 4);
      const Matrix w = random_matrix(rng, 1, 3, scale);
      const auto out = attention_pool(H, V, w);
      CHECK(std::abs(out.a.sum() - 1.0) < 1e-6);
      CHECK(out.a.allFinite());
      CHECK((out.a.array() >= 0.0).all());
    }
  }

  TEST_CASE("matches a direct evaluation") {
    Rng rng(2);
    const Matrix H = random_matrix(rng, 5, 4), V = random_matrix(rng, 3, 4), w = random_matrix(rng, 1, 3);
    std::vector<double> e(5);
    double norm = 0.0;
    for (int i = 0; i < 5; ++i) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) {
        double u = 0.0;
        for (int j = 0; j < 4; ++j) u += V(k, j) * H(i, j);
        s += w(0, k) * std::tanh(u);
      }
      e[i] = std::exp(s);
      norm += e[i];
    }
    const auto out = attention_pool(H, V, w);
    for (int j = 0; j < 4; ++j) {
      double z = 0.0;
      for (int i = 0; i < 5; ++i) z += e[i] / norm * H(i, j);
      CHECK(out.z(0, j) == doctest::Approx(z).epsilon(1e-12));
    }
  }

  TEST_CASE("pooled vector is permutation invariant") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      const auto n = 2 + static_cast<Eigen::Index>(rng.below(7));
      Matrix H = random_matrix(rng, n, 6);
      const Matrix V = random_matrix(rng, 4, 6), w = random_matrix(rng, 1, 4);
      const Matrix z = attention_pool(H, V, w).z;
      std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(std::span<Eigen::Index>(perm));
      Matrix P(n, 6);
      for (Eigen::Index i = 0; i < n; ++i) P.row(i) = H.row(perm[static_cast<std::size_t>(i)]);
      CHECK((attention_pool(P, V, w).z - z).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("singleton bag returns its instance") {
    Rng rng(4);
    const Matrix H = random_matrix(rng, 1, 5);
    const auto out = attention_pool(H, random_matrix(rng, 3, 5), random_matrix(rng, 1, 3, 1e3));
    CHECK(out.a(0, 0) == 1.0);
    CHECK(out.z == H);
  }

  TEST_CASE("analytic gradients match finite differences") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      Matrix H = random_matrix(rng, 3, 4), V = random_matrix(rng, 3, 4), w = random_matrix(rng, 1, 3);
      const Matrix g = random_matrix(rng, 1, 4);
      const auto fwd = attention_pool(H, V, w);
      const auto grads = attention_pool_backward(H, V, w, fwd, g);
      auto f = [&] { return loss(H, V, w, g); };
      CHECK(max_rel_error(grads.H, H, f) < 1e-4);
      CHECK(max_rel_error(grads.V, V, f) < 1e-4);
      CHECK(max_rel_error(grads.w, w, f) < 1e-4);
    }
  }

  TEST_CASE("module gradients agree with the free functions") {
    Rng rng(6);
    AttentionPool pool(4, 3, rng);
    nn::Var H(random_matrix(rng, 5, 4), true);
    Matrix weights;
    const nn::Var z = pool(H, &weights);
    const Matrix g = random_matrix(rng, 1, 4);
    nn::backward(nn::matmul(z, nn::Var(g.transpose().eval())));
    const auto fwd = attention_pool(H.value(), pool.V.value(), pool.w.value());
    const auto grads = attention_pool_backward(H.value(), pool.V.value(), pool.w.value(), fwd, g);
    CHECK((weights - fwd.a).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((H.grad() - grads.H).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((pool.V.grad() - grads.V).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((pool.w.grad() - grads.w).cwiseAbs().maxCoeff() < 1e-12);
    std::vector<nn::NamedParameter> params;
    pool.append_parameters("mil.attention.", params);
    REQUIRE(params.size() == 2);
    CHECK(params[0].name == "mil.attention.V");
  }

  TEST_CASE("shape errors") {
    const Matrix V = Matrix::Ones(3, 4), w = Matrix::Ones(1, 3);
    CHECK_THROWS_AS(attention_pool(Matrix(0, 4), V, w), ValidationError);
    CHECK_THROWS_AS(attention_pool(Matrix::Ones(2, 5), V, w), ValidationError);
    CHECK_THROWS_AS(attention_pool(Matrix::Ones(2, 4), V, Matrix::Ones(1, 2)), ValidationError);
  }
}
