#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "bilbt/system.hpp"

using namespace bilbt;
using testing::rel_err;

TEST_CASE("validate_system accepts the scalar fixture") {
  CHECK(validate_system(testing::scalar_bilinear()).empty());
}

TEST_CASE("validate_system reports a coupling-count mismatch against A") {
  BilinearSystem s = testing::scalar_bilinear();
  s.N.push_back(Matd::Zero(1, 1));
  s.N.push_back(Matd::Zero(1, 1));  // three N for one input
  const auto v = validate_system(s);
  REQUIRE(!v.empty());
  bool named = false;
  for (const auto& item : v) named = named || item.field.find('N') != std::string::npos;
  CHECK(named);
}

TEST_CASE("validate_system reports non-finite entries") {
  BilinearSystem s = testing::scalar_bilinear();
  s.A(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const auto v = validate_system(s);
  REQUIRE(!v.empty());
  CHECK_THROWS_AS(require_valid(s), DimMismatch);
}

TEST_CASE("stability certificate of the scalar system") {
  const auto cert = stability_certificate(testing::scalar_bilinear());
  CHECK(cert.method == CertMethod::log_norm);
  CHECK(rel_err(cert.M, 1.0) <= 1e-14);
  CHECK(rel_err(cert.nu, 1.0) <= 1e-14);
  CHECK(rel_err(cert.Gamma, 0.5) <= 1e-14);
  CHECK(rel_err(cert.Xi, 0.5) <= 1e-14);
  CHECK(rel_err(cert.theta, 0.125) <= 1e-14);
}

TEST_CASE("linear system has a vanishing coupling certificate") {
  const auto cert = stability_certificate(testing::scalar_linear());
  CHECK(cert.Gamma == 0.0);
  CHECK(cert.Xi == 0.0);
  CHECK(cert.theta == 0.0);
}

TEST_CASE("non-normal A falls back to the grid estimate with M above one") {
  BilinearSystem s = testing::scalar_bilinear();
  s.A = Matd(2, 2);
  s.A << -1.0, 10.0, 0.0, -1.0;
  s.N = {Matd::Zero(2, 2)};
  s.B = Matd::Ones(2, 1);
  s.C = Matd::Ones(1, 2);
  const auto cert = stability_certificate(s);
  CHECK(cert.method == CertMethod::grid_estimate);
  CHECK(cert.M > 1.0);
  CHECK(cert.nu > 0.0);
}

TEST_CASE("unstable A is rejected") {
  BilinearSystem s = testing::scalar_bilinear();
  s.A(0, 0) = 0.25;
  CHECK_THROWS_AS(stability_certificate(s), NotStable);
}

TEST_CASE("Gamma never exceeds Xi") {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = testing::random_stable(4, 3, 3, 2, rng);
    const auto cert = stability_certificate(s);
    CHECK(cert.Gamma <= cert.Xi * (1.0 + 1e-12));
  }
}

TEST_CASE("normal stable A gets the sharp log-norm certificate") {
  std::mt19937 rng(78);
  std::normal_distribution<double> g;
  Matd W(3, 3);
  for (Index i = 0; i < W.size(); ++i) W(i) = g(rng);
  const Matd Q = Eigen::HouseholderQR<Matd>(W).householderQ();
  Matd D = Matd::Zero(3, 3);
  D.diagonal() << -0.4, -1.1, -2.5;
  BilinearSystem s;
  s.A = Q * D * Q.transpose();  // normal by construction
  s.N = {Matd::Zero(3, 3)};
  s.B = Matd::Ones(3, 1);
  s.C = Matd::Ones(1, 3);
  const auto cert = stability_certificate(s);
  CHECK(cert.method == CertMethod::log_norm);
  CHECK(rel_err(cert.M, 1.0) <= 1e-12);
  CHECK(std::abs(cert.nu - 0.4) <= 1e-10);
}

TEST_CASE("control norms of a decaying exponential") {
  ControlSignal u;
  u.kind = ControlSignal::Kind::decaying_exp;
  u.amplitude = Vecd::Ones(1);
  u.rate = 1.0;
  const auto n = control_norms(u);
  CHECK(rel_err(n.l2_supnorm, 1.0 / std::sqrt(2.0)) <= 1e-12);
  CHECK(rel_err(n.linf_max, 1.0) <= 1e-14);
  CHECK(rel_err(n.linf_eucl, 1.0) <= 1e-14);
}

TEST_CASE("admissibility threshold of the scalar certificate") {
  const auto cert = stability_certificate(testing::scalar_bilinear());
  // min(1/sqrt(1), sqrt(2)/(1 * 0.5)) = min(1, 2 sqrt(2)) = 1
  CHECK(rel_err(admissible_threshold(cert, 1), 1.0) <= 1e-14);

  ControlSignal u;
  u.kind = ControlSignal::Kind::decaying_exp;
  u.amplitude = Vecd::Ones(1);
  u.rate = 1.0;
  CHECK(control_norms(u).l2_supnorm < admissible_threshold(cert, 1));
}

TEST_CASE("window norms have closed forms") {
  ControlSignal u;
  u.kind = ControlSignal::Kind::windowed_const;
  u.amplitude = Vecd::Constant(1, -1.5);
  u.t0 = 0.5;
  u.t1 = 2.5;
  const auto n = control_norms(u);
  CHECK(rel_err(n.l2_supnorm, 1.5 * std::sqrt(2.0)) <= 1e-12);
  CHECK(rel_err(n.linf_max, 1.5) <= 1e-14);
  CHECK(u.value(0.4)(0) == 0.0);
  CHECK(u.value(0.5)(0) == -1.5);
  CHECK(u.value(2.5)(0) == 0.0);
}

TEST_CASE("multichannel norms take the channel sup inside the time integral") {
  ControlSignal u;
  u.kind = ControlSignal::Kind::decaying_exp;
  u.amplitude = Vecd(2);
  u.amplitude << 0.3, -0.8;
  u.rate = 2.0;
  const auto n = control_norms(u);
  CHECK(rel_err(n.l2_supnorm, 0.8 / std::sqrt(4.0)) <= 1e-12);
  CHECK(rel_err(n.linf_max, 0.8) <= 1e-14);
  CHECK(rel_err(n.linf_eucl, u.amplitude.norm()) <= 1e-14);
}

TEST_CASE("lp_norm_euclid closed forms") {
  ControlSignal u;
  u.kind = ControlSignal::Kind::decaying_exp;
  u.amplitude = Vecd(2);
  u.amplitude << 1.0, 2.0;
  u.rate = 0.5;
  const double a = u.amplitude.norm();
  CHECK(rel_err(lp_norm_euclid(u, 2.0), a / std::sqrt(2.0 * 0.5)) <= 1e-12);
  CHECK(rel_err(lp_norm_euclid(u, std::numeric_limits<double>::infinity()), a) <= 1e-14);

  ControlSignal w;
  w.kind = ControlSignal::Kind::windowed_const;
  w.amplitude = Vecd::Constant(1, 2.0);
  w.t0 = 0.0;
  w.t1 = 4.0;
  CHECK(rel_err(lp_norm_euclid(w, 2.0), 2.0 * 2.0) <= 1e-12);
}

TEST_CASE("sampled controls interpolate linearly and vanish beyond the grid") {
  ControlSignal u;
  u.kind = ControlSignal::Kind::sampled;
  u.h = 0.5;
  u.samples = Matd(1, 3);
  u.samples << 0.0, 1.0, 0.0;
  CHECK(u.value(0.25)(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(u.value(0.75)(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(u.value(5.0)(0) == 0.0);

  // sampled triangle vs its exact L2 norm sqrt(1/3): trapezoid converges
  ControlSignal fine;
  fine.kind = ControlSignal::Kind::sampled;
  fine.h = 1e-4;
  const int m = 20001;
  fine.samples = Matd(1, m);
  for (int j = 0; j < m; ++j) {
    const double t = j * fine.h;
    fine.samples(0, j) = t <= 1.0 ? t : (t <= 2.0 ? 2.0 - t : 0.0);
  }
  CHECK(rel_err(control_norms(fine).l2_supnorm, std::sqrt(2.0 / 3.0)) <= 1e-6);
}
