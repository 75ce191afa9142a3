#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "bilbt/gramians.hpp"

using namespace bilbt;
using testing::rel_err;

TEST_CASE("scalar gramians hit the closed form 4/7") {
  const auto g = gramian_direct(testing::scalar_bilinear());
  CHECK(std::abs(g.P(0, 0) - 4.0 / 7.0) <= 1e-12);
  CHECK(std::abs(g.O(0, 0) - 4.0 / 7.0) <= 1e-12);
  CHECK(g.res_P <= 1e-10);
  CHECK(g.res_O <= 1e-10);
}

TEST_CASE("linear scalar gramians are 1/2") {
  const auto g = gramian_direct(testing::scalar_linear());
  CHECK(std::abs(g.P(0, 0) - 0.5) <= 1e-13);
  CHECK(std::abs(g.O(0, 0) - 0.5) <= 1e-13);
}

TEST_CASE("2d gramians satisfy the equations and match the oracle") {
  const auto sys = testing::example2d();
  const auto g = gramian_direct(sys);
  const Matd BBt = sys.B * sys.B.transpose();
  const Matd CtC = sys.C.transpose() * sys.C;
  CHECK(generalized_residual(sys.A, sys.N, {}, g.P, BBt, false) <= 1e-10);
  CHECK(generalized_residual(sys.A, sys.N, {}, g.O, CtC, true) <= 1e-10);

  const Matd Po = testing::kron_solve_oracle(sys.A, sys.N, {}, BBt, false);
  const Matd Oo = testing::kron_solve_oracle(sys.A, sys.N, {}, CtC, true);
  CHECK((g.P - Po).norm() <= 1e-12 * std::max(1.0, Po.norm()));
  CHECK((g.O - Oo).norm() <= 1e-12 * std::max(1.0, Oo.norm()));
}

TEST_CASE("direct solve refuses a flat-unstable coupling") {
  BilinearSystem s = testing::scalar_bilinear();
  s.N[0](0, 0) = 2.0;  // generator abscissa -2 + 4 = +2
  CHECK_THROWS_AS(gramian_direct(s), NotMSStable);
}

TEST_CASE("scalar series terms and partial sums are exact geometric data") {
  const auto ser = gramian_series(testing::scalar_bilinear(), 8);
  REQUIRE(ser.O_terms.size() == 8);
  for (int i = 0; i < 4; ++i) {
    const double want = 0.5 * std::pow(0.125, i);
    CHECK(std::abs(ser.O_terms[i](0, 0) - want) <= 1e-13);
    CHECK(std::abs(ser.P_terms[i](0, 0) - want) <= 1e-13);
  }
  CHECK(std::abs(ser.partial_O(1)(0, 0) - 0.5) <= 1e-13);
  CHECK(std::abs(ser.partial_O(2)(0, 0) - 0.5625) <= 1e-13);
  CHECK(std::abs(ser.partial_O(3)(0, 0) - 0.5703125) <= 1e-13);
}

TEST_CASE("series truncation error is the exact geometric tail") {
  const auto ser = gramian_series(testing::scalar_bilinear(), 10);
  const double limit = 4.0 / 7.0;
  for (int k = 1; k <= 6; ++k) {
    const double err = std::abs(limit - ser.partial_O(size_t(k))(0, 0));
    CHECK(std::abs(err - limit * std::pow(0.125, k)) <= 1e-12);
  }
}

TEST_CASE("linear system series stops changing after the first term") {
  const auto ser = gramian_series(testing::scalar_linear(), 5);
  for (size_t i = 1; i < ser.O_terms.size(); ++i) {
    CHECK(ser.O_terms[i].norm() == 0.0);
    CHECK(ser.P_terms[i].norm() == 0.0);
  }
}

TEST_CASE("term decay follows the certificate contraction") {
  for (const auto& sys : {testing::scalar_bilinear(), testing::example2d()}) {
    const auto cert = stability_certificate(sys);
    REQUIRE(cert.method == CertMethod::log_norm);
    const auto ser = gramian_series(sys, 7);
    for (size_t i = 0; i + 1 < ser.O_terms.size(); ++i) {
      CHECK(operator_norm(ser.O_terms[i + 1]) <=
            cert.theta * operator_norm(ser.O_terms[i]) * (1.0 + 1e-8));
      CHECK(operator_norm(ser.P_terms[i + 1]) <=
            cert.theta * operator_norm(ser.P_terms[i]) * (1.0 + 1e-8));
    }
  }
}

TEST_CASE("partial sums increase in the semidefinite order") {
  const auto sys = testing::example2d();
  const auto ser = gramian_series(sys, 6);
  for (size_t k = 1; k < ser.O_terms.size(); ++k) {
    Eigen::SelfAdjointEigenSolver<Matd> es(
        Matd(ser.partial_O(k + 1) - ser.partial_O(k)), Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-14);
  }
}

TEST_CASE("series limit agrees with the direct solve") {
  const auto sys = testing::example2d();
  const auto g = gramian_direct(sys);
  const auto ser = gramian_series(sys, 40);
  CHECK((ser.partial_P(40) - g.P).norm() <= 1e-11 * std::max(1.0, g.P.norm()));
  CHECK((ser.partial_O(40) - g.O).norm() <= 1e-11 * std::max(1.0, g.O.norm()));
}

TEST_CASE("fitted series decay ratio tracks theta on the scalar system") {
  const auto ser = gramian_series(testing::scalar_bilinear(), 9);
  const double limit = 4.0 / 7.0;
  double logsum = 0.0;
  int count = 0;
  for (int k = 2; k <= 6; ++k) {
    const double ek = std::abs(limit - ser.partial_O(size_t(k))(0, 0));
    const double ekm = std::abs(limit - ser.partial_O(size_t(k - 1))(0, 0));
    logsum += std::log(ek / ekm);
    ++count;
  }
  const double fitted = std::exp(logsum / count);
  CHECK(std::abs(fitted / 0.125 - 1.0) <= 0.10);
}

TEST_CASE("transposing the system swaps the gramian pair") {
  const auto sys = testing::example2d();
  BilinearSystem t;
  t.A = sys.A.transpose();
  t.N = {Matd(sys.N[0].transpose())};
  t.B = sys.C.transpose();
  t.C = sys.B.transpose();
  const auto g = gramian_direct(sys);
  const auto gt = gramian_direct(t);
  CHECK((gt.P - g.O).norm() <= 1e-13 * std::max(1.0, g.O.norm()));
  CHECK((gt.O - g.P).norm() <= 1e-13 * std::max(1.0, g.P.norm()));
}

TEST_CASE("automatic series depth reaches the direct solution") {
  const auto sys = testing::scalar_bilinear();
  const auto ser = gramian_series(sys);  // depth from the certificate
  const auto g = gramian_direct(sys);
  CHECK((ser.partial_O(ser.O_terms.size()) - g.O).norm() <= 1e-11);
}

TEST_CASE("h2 norm closed forms and consistency") {
  const auto h = h2_norm(testing::scalar_bilinear());
  CHECK(std::abs(h.via_O - 4.0 / 7.0) <= 1e-12);
  CHECK(std::abs(h.via_P - 4.0 / 7.0) <= 1e-12);

  BilinearSystem z = testing::scalar_bilinear();
  z.B.setZero();
  const auto hz = h2_norm(z);
  CHECK(hz.via_O == 0.0);
  CHECK(hz.via_P == 0.0);

  const auto h2 = h2_norm(testing::example2d());
  CHECK(rel_err(h2.via_O, h2.via_P) <= 1e-10);
}

TEST_CASE("weighted generator shifts the scalar gramian to 2/3") {
  // weight 2 on N = 0.5 gives the balance -2 p + 2 (1/4) p + 1 = 0
  const auto sys = testing::scalar_bilinear();
  const auto g = gramian_direct(sys, {2.0});
  CHECK(std::abs(g.P(0, 0) - 2.0 / 3.0) <= 1e-12);
  CHECK(std::abs(g.O(0, 0) - 2.0 / 3.0) <= 1e-12);
}
