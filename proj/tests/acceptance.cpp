// Acceptance gate: twelve scripted checks, one line of output each, exit
// code = number of failures. Each check carries the time budget it must
// finish inside; going over the budget fails the check even when the
// numbers agree.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

#include "bilbt/balancing.hpp"
#include "bilbt/cli.hpp"
#include "bilbt/error_bound.hpp"
#include "bilbt/gramians.hpp"
#include "bilbt/hankel_fock.hpp"
#include "bilbt/io.hpp"
#include "bilbt/stochastic.hpp"
#include "bilbt/system.hpp"
#include "bilbt/transfer.hpp"
#include "bilbt/volterra.hpp"

using namespace bilbt;

namespace {

constexpr double kSevenths4 = 4.0 / 7.0;
const double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool ok = true;
  std::string detail;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void require(Outcome& out, bool cond, const std::string& on_fail) {
  if (!cond) {
    out.ok = false;
    if (!out.detail.empty()) out.detail += "; ";
    out.detail += on_fail;
  }
}

ControlSignal decexp_control(double amp, double rate) {
  ControlSignal u;
  u.kind = ControlSignal::Kind::decaying_exp;
  u.amplitude = Vecd::Constant(1, amp);
  u.rate = rate;
  return u;
}

ControlSignal window_control(double amp, double t0, double t1) {
  ControlSignal u;
  u.kind = ControlSignal::Kind::windowed_const;
  u.amplitude = Vecd::Constant(1, amp);
  u.t0 = t0;
  u.t1 = t1;
  return u;
}

// ---- criterion 1: scalar closed forms ------------------------------------

Outcome criterion1() {
  Outcome out;
  const auto sys = testing::scalar_bilinear();
  const GramianPair g = gramian_direct(sys);
  require(out, std::abs(g.P(0, 0) - kSevenths4) <= 1e-12, "P != 4/7");
  require(out, std::abs(g.O(0, 0) - kSevenths4) <= 1e-12, "O != 4/7");
  const Vecd s = hankel_singular_values(g.P, g.O);
  require(out, s.size() == 1 && std::abs(s(0) - kSevenths4) <= 1e-12, "hsv != [4/7]");
  const auto h = h2_norm(sys);
  require(out, std::abs(h.via_O - kSevenths4) <= 1e-12, "h2 via O != 4/7");
  require(out, std::abs(h.via_P - kSevenths4) <= 1e-12, "h2 via P != 4/7");
  if (out.ok)
    out.detail = "P = O = sigma = h2 = 4/7, max gap " +
                 num(std::max({std::abs(g.P(0, 0) - kSevenths4),
                               std::abs(s(0) - kSevenths4),
                               std::abs(h.via_O - kSevenths4)}));
  return out;
}

// ---- criterion 2: level truncation decay rate ----------------------------

Outcome criterion2() {
  Outcome out;
  {
    FockGrid grid;
    grid.a = 1.0;
    grid.modes = 1;
    grid.depth = 17;
    const HankelMatrix H = assemble_hankel(testing::scalar_bilinear(), grid);
    const double s1 = hankel_svd(H)(0);
    double worst = 0.0;
    for (int k = 1; k <= 6; ++k) {
      const double sk = hankel_svd(truncated_hankel(H, k))(0);
      const double want = kSevenths4 * std::pow(0.125, k);
      worst = std::max(worst, std::abs(std::abs(s1 - sk) - want));
    }
    require(out, worst <= 1e-12, "scalar truncation gap off by " + num(worst));
    if (out.ok) out.detail = "scalar |s1 - s1^(k)| matches (4/7) 8^-k to " + num(worst);
  }
  {
    const auto sys = testing::example2d();
    const double theta = stability_certificate(sys).theta;
    FockGrid grid;
    grid.a = 1.0;
    grid.modes = 25;
    grid.depth = 6;
    const HankelMatrix H = assemble_hankel(sys, grid);
    const double t1 = hankel_tail_hs(H, 1);
    const double t5 = hankel_tail_hs(H, 5);
    require(out, t1 > 0 && t5 > 0, "degenerate tails");
    // squared tails are geometric in the truncation level; the fitted ratio
    // is the 4-step geometric mean from level 1 to level 5
    const double ratio = std::sqrt(t5 / t1);
    require(out, ratio <= theta * 1.15,
            "tail ratio " + num(ratio) + " above " + num(theta * 1.15));
    out.detail += ", squared-tail ratio " + num(ratio) + " vs cap " + num(theta * 1.15);
  }
  return out;
}

// ---- criterion 3: spectral consistency across routes ---------------------

Outcome criterion3() {
  Outcome out;
  {
    FockGrid grid;
    grid.a = 1.0;
    grid.modes = 30;
    grid.depth = 4;
    const double s1 = hankel_svd(assemble_hankel(testing::scalar_bilinear(), grid))(0);
    require(out, std::abs(s1 - kSevenths4) <= 1e-3,
            "scalar sigma1 off by " + num(std::abs(s1 - kSevenths4)));
    out.detail = "scalar sigma1 gap " + num(std::abs(s1 - kSevenths4));
  }
  {
    FockGrid grid;
    grid.a = 1.0;
    grid.modes = 1;
    grid.depth = 1;
    const double s1 = hankel_svd(assemble_hankel(testing::scalar_linear(), grid))(0);
    require(out, std::abs(s1 - 0.5) <= 1e-14,
            "single-mode linear sigma " + num(s1) + " != 1/2");
    out.detail += ", linear gap " + num(std::abs(s1 - 0.5));
  }
  return out;
}

// ---- criterion 4: invariant-subspace comparison --------------------------

Outcome criterion4() {
  Outcome out;
  const auto sys = testing::blockdiag2();
  FockGrid grid;
  grid.a = 1.0;
  grid.modes = 20;
  grid.depth = 3;

  Matd V1 = Matd::Zero(2, 1);
  V1(0, 0) = 1.0;
  const auto e1 = subspace_error(sys, grid, V1);
  const auto e2 = subspace_error(sys, grid, Matd(Matd::Identity(2, 2)));
  require(out, e2.trace_norm <= 1e-10, "full-space defect " + num(e2.trace_norm));
  require(out, e1.trace_norm > e2.trace_norm, "proper subspace not worse");

  BilinearSystem proj = sys;
  proj.B = V1 * (V1.transpose() * sys.B);
  const double delta = delta_hankel_trace_norm(sys, proj).value;
  require(out, std::abs(delta - e1.trace_norm) <= 0.05 * delta,
          "gramian " + num(delta) + " vs grid " + num(e1.trace_norm));
  if (out.ok)
    out.detail = "defects " + num(e1.trace_norm) + " > " + num(e2.trace_norm) +
                 ", gramian route " + num(delta);
  return out;
}

// ---- criterion 5: output bound over random admissible controls -----------

Outcome criterion5() {
  Outcome out;
  const auto full = testing::example2d();
  const auto red = truncate(balance(full), 1).sys;

  const ControlSignal probe = decexp_control(1e-3, 1.0);
  const BoundReport base = bound_report(full, red, &probe, kInf);
  require(out, base.admissibility_radius.has_value(), "no admissibility radius");
  if (!out.ok) return out;
  const double radius = *base.admissibility_radius;

  std::mt19937 rng(42);
  std::uniform_real_distribution<double> frac(0.2, 0.95);
  std::uniform_real_distribution<double> rate(0.5, 2.0);
  std::uniform_real_distribution<double> start(0.0, 1.0);
  std::uniform_real_distribution<double> len(0.5, 3.0);

  int violations = 0;
  double worst_margin = kInf;
  for (int i = 0; i < 100; ++i) {
    // amplitude scaled so the time-L2 admissibility norm lands at frac * radius
    const double sign = (i % 4 < 2) ? 1.0 : -1.0;
    ControlSignal u;
    if (i % 2 == 0) {
      const double r = rate(rng);
      u = decexp_control(sign * frac(rng) * radius * std::sqrt(2.0 * r), r);
    } else {
      const double t0 = start(rng), L = len(rng);
      u = window_control(sign * frac(rng) * radius / std::sqrt(L), t0, t0 + L);
    }
    const BoundReport rep = bound_report(full, red, &u, kInf);
    if (!rep.bound_output) {
      ++violations;
      continue;
    }
    const double measured = output_error(full, red, u, 30.0, 1500);
    if (measured > *rep.bound_output * (1.0 + 1e-9)) ++violations;
    worst_margin = std::min(worst_margin, *rep.bound_output - measured);
  }
  require(out, violations == 0, std::to_string(violations) + " violations");
  if (out.ok)
    out.detail = "0 violations in 100 controls, radius " + num(radius) +
                 ", slimmest margin " + num(worst_margin);
  return out;
}

// ---- criterion 6: summed kernel norms against the trace-norm bound -------

Outcome criterion6() {
  Outcome out;
  const auto scalar_chk = transfer_bound_check(testing::scalar_bilinear(),
                                          testing::scalar_linear(), 2, FrequencyGrid{});
  require(out, scalar_chk.converged, "scalar norms did not converge");
  require(out, scalar_chk.ok && scalar_chk.partial_sum < scalar_chk.bound,
          "scalar pair not strict: " + num(scalar_chk.partial_sum) + " vs " +
              num(scalar_chk.bound));

  const auto full = testing::example2d();
  const auto red = truncate(balance(full), 1).sys;
  const auto chk2 = transfer_bound_check(full, red, 2, FrequencyGrid{});
  require(out, chk2.converged, "2d norms did not converge");
  require(out, chk2.ok && chk2.partial_sum < chk2.bound,
          "2d pair not strict: " + num(chk2.partial_sum) + " vs " + num(chk2.bound));
  if (out.ok)
    out.detail = "scalar " + num(scalar_chk.partial_sum) + " < " + num(scalar_chk.bound) +
                 ", 2d " + num(chk2.partial_sum) + " < " + num(chk2.bound);
  return out;
}

// ---- criterion 7: generalized Lyapunov residuals and oracle agreement ----

Outcome criterion7() {
  Outcome out;
  std::mt19937 rng(7);
  double worst_res = 0.0, worst_gap = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index d = (t == 0) ? 30 : Index(2 + rng() % 29);
    const int channels = 1 + int(t % 2);
    const Index n_in = channels;
    const Index n_out = 1 + Index((t + 1) % 2);
    const auto sys = testing::random_stable(d, channels, n_in, n_out, rng);
    const GramianPair g = gramian_direct(sys);

    const Matd BBt = sys.B * sys.B.transpose();
    const Matd CtC = sys.C.transpose() * sys.C;
    Matd rp = sys.A * g.P + g.P * sys.A.transpose() + BBt;
    Matd ro = sys.A.transpose() * g.O + g.O * sys.A + CtC;
    for (const auto& Nc : sys.N) {
      rp += Nc * g.P * Nc.transpose();
      ro += Nc.transpose() * g.O * Nc;
    }
    worst_res = std::max(worst_res, rp.norm() / BBt.norm());
    worst_res = std::max(worst_res, ro.norm() / CtC.norm());

    const std::vector<double> w(size_t(channels), 1.0);
    const Matd Po = testing::kron_solve_oracle(sys.A, sys.N, w, BBt, false);
    const Matd Oo = testing::kron_solve_oracle(sys.A, sys.N, w, CtC, true);
    worst_gap = std::max(worst_gap, (g.P - Po).norm() / std::max(1.0, Po.norm()));
    worst_gap = std::max(worst_gap, (g.O - Oo).norm() / std::max(1.0, Oo.norm()));
  }
  require(out, worst_res <= 1e-10, "residual " + num(worst_res));
  require(out, worst_gap <= 1e-8, "oracle gap " + num(worst_gap));
  if (out.ok)
    out.detail = "20 systems to dim 30: max residual " + num(worst_res) +
                 ", max oracle gap " + num(worst_gap);
  return out;
}

// ---- criterion 8: gramian kernel and range under the flow ----------------

Outcome criterion8() {
  Outcome out;
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> amp(-0.5, 0.5);
  std::uniform_real_distribution<double> rate(0.5, 2.0);

  {
    const auto sys = testing::kernel_diag();
    const Matd O = gramian_direct(sys).O;
    require(out, (O * Vecd::Unit(2, 1)).norm() <= 1e-12, "e2 not in ker(O)");
    double sup = 0.0;
    for (int i = 0; i < 4; ++i) {
      const ControlSignal u = (i % 2 == 0)
                                  ? decexp_control(amp(rng), rate(rng))
                                  : window_control(amp(rng), 0.2, 0.2 + 2.0 * rate(rng));
      const auto tr = integrate_rk4(sys, u, Vecd::Unit(2, 1), 12.0, 1200);
      sup = std::max(sup, sup_output_norm(tr));
    }
    require(out, sup <= 1e-9, "kernel state visible at " + num(sup));
    out.detail = "ker output sup " + num(sup);
  }
  {
    const auto sys = testing::blockdiag2_rangeB();
    const Matd P = gramian_direct(sys).P;
    require(out, (P * Vecd::Unit(2, 1)).norm() <= 1e-12, "range(P) not confined");
    double leak = 0.0;
    for (int i = 0; i < 4; ++i) {
      const ControlSignal u = (i % 2 == 0)
                                  ? decexp_control(amp(rng), rate(rng))
                                  : window_control(amp(rng), 0.1, 0.1 + 2.0 * rate(rng));
      const auto tr = integrate_rk4(sys, u, Vecd::Zero(2), 12.0, 1200);
      leak = std::max(leak, tr.x.row(1).cwiseAbs().maxCoeff());
    }
    require(out, leak <= 1e-9, "range leakage " + num(leak));
    out.detail += ", range leakage " + num(leak);
  }
  return out;
}

// ---- criterion 9: stochastic gramians and the Monte-Carlo flow -----------

Outcome criterion9() {
  Outcome out;
  {
    const auto sys = testing::example2d();
    const auto gs = stochastic_gramians(testing::wiener_model(sys));
    const auto gb = gramian_direct(sys);
    const double gap = std::max((gs.P - gb.P).norm(), (gs.O - gb.O).norm());
    require(out, gap <= 1e-14 * std::max(1.0, gb.P.norm()), "wiener gap " + num(gap));
    out.detail = "wiener gap " + num(gap);
  }
  {
    const auto g = stochastic_gramians(testing::cpoisson_model(testing::scalar_bilinear(), 2.0));
    const double gap =
        std::max(std::abs(g.P(0, 0) - 2.0 / 3.0), std::abs(g.O(0, 0) - 2.0 / 3.0));
    require(out, gap <= 1e-12, "cpoisson gap " + num(gap));
    out.detail += ", cpoisson gap " + num(gap);
  }
  {
    const auto mw = testing::wiener_model(testing::scalar_bilinear());
    const auto ew = flow_gramian_estimate(mw, Vecd::Ones(1), 8.0, 1600, 10000, 2024);
    require(out, std::abs(ew.value - kSevenths4) <= 3.0 * ew.stderr_,
            "wiener flow " + num(ew.value) + " +- " + num(ew.stderr_));
    const auto mc = testing::cpoisson_model(testing::scalar_bilinear(), 2.0);
    const auto ec = flow_gramian_estimate(mc, Vecd::Ones(1), 8.0, 1600, 10000, 2025);
    require(out, std::abs(ec.value - 2.0 / 3.0) <= 3.0 * ec.stderr_,
            "cpoisson flow " + num(ec.value) + " +- " + num(ec.stderr_));
    out.detail += ", flow z-scores " + num(std::abs(ew.value - kSevenths4) / ew.stderr_) +
                  " and " + num(std::abs(ec.value - 2.0 / 3.0) / ec.stderr_);
  }
  return out;
}

// ---- criterion 10: stochastic output bounds, independent flows -----------

Outcome criterion10() {
  Outcome out;
  struct Pair {
    StochasticModel full, red;
  };
  std::vector<Pair> pairs;
  pairs.push_back({testing::wiener_model(testing::scalar_bilinear()),
                   testing::wiener_model(testing::scalar_linear())});
  {
    const auto m = testing::wiener_model(testing::example2d());
    pairs.push_back({m, stochastic_reduce(m, 1).model});
  }

  std::mt19937 rng(10);
  std::uniform_real_distribution<double> amp(0.1, 0.6);
  std::uniform_real_distribution<double> rate(0.5, 2.0);
  std::uniform_real_distribution<double> start(0.0, 1.0);
  std::uniform_real_distribution<double> len(0.5, 2.0);

  int violations = 0, checks = 0;
  double slimmest = kInf;
  for (size_t pi = 0; pi < pairs.size(); ++pi) {
    for (int i = 0; i < 10; ++i) {
      const double a = (i % 2 ? -1.0 : 1.0) * amp(rng);
      ControlSignal u;
      if (i % 2 == 0) {
        u = decexp_control(a, rate(rng));
      } else {
        const double t0 = start(rng);
        u = window_control(a, t0, t0 + len(rng));
      }
      const int sel = i % 3;
      const double p = sel == 0 ? 2.0 : kInf;
      const auto mode =
          sel == 2 ? StochasticBoundMode::sup_mean : StochasticBoundMode::mean_lp;
      const auto chk = stochastic_bound_check(pairs[pi].full, pairs[pi].red, u, p, 12.0,
                                              500, 10000, 1000 + 100 * pi + i, mode,
                                              NoiseCoupling::independent);
      ++checks;
      if (!chk.ok) ++violations;
      slimmest = std::min(slimmest, chk.bound + 3.0 * chk.stderr_ - chk.estimate);
    }
  }
  require(out, violations == 0,
          std::to_string(violations) + " of " + std::to_string(checks) + " checks failed");
  if (out.ok)
    out.detail = "0 violations in " + std::to_string(checks) +
                 " checks at 10000 paths, slimmest margin " + num(slimmest);
  return out;
}

// ---- criterion 11: finite-horizon energies -------------------------------

Outcome criterion11() {
  Outcome out;
  {
    const Matd A = Matd::Constant(1, 1, -1.0);
    const Matd B = Matd::Constant(1, 1, 1.0);
    const auto res = minimum_energy_steering(A, B, Vecd::Ones(1), 1.0, 2000);
    require(out, std::abs(res.energy - 2.3130352854993312) <= 1e-6,
            "steering energy " + num(res.energy));
    require(out, res.terminal_error <= 1e-6, "terminal error " + num(res.terminal_error));
    out.detail = "steering energy gap " + num(std::abs(res.energy - 2.3130352854993312)) +
                 ", terminal " + num(res.terminal_error);
  }
  {
    std::mt19937 rng(11);
    std::normal_distribution<double> gauss;
    int bad = 0;
    for (const auto& m : {testing::wiener_model(testing::scalar_bilinear()),
                          testing::wiener_model(testing::example2d())}) {
      const Matd G = finite_horizon_obs_energy(m, 1.0);
      const Matd O = stochastic_gramians(m).O;
      for (int i = 0; i < 25; ++i) {
        Vecd x(m.state_dim());
        for (Index j = 0; j < x.size(); ++j) x(j) = gauss(rng);
        if (x.dot(G * x) > x.dot(O * x) * (1.0 + 1e-10) + 1e-12) ++bad;
      }
    }
    require(out, bad == 0, std::to_string(bad) + " energy dominations failed");
    if (out.ok) out.detail += ", 50/50 outputs below the gramian form";
  }
  return out;
}

// ---- criterion 12: determinism and byte-exact round trips ----------------

Outcome criterion12() {
  Outcome out;
  const auto dir = std::filesystem::temp_directory_path() / "bilbt_acceptance";
  std::filesystem::create_directories(dir);

  {
    std::ofstream f(dir / "model.bsys");
    save_model(f, testing::cpoisson_model(testing::scalar_bilinear(), 2.0));
  }
  {
    std::ofstream f(dir / "sys.bsys");
    save_system(f, testing::example2d());
  }

  auto run = [&](const std::vector<std::string>& args) {
    std::ostringstream o, e;
    const int rc = cli_run(args, o, e);
    return std::make_pair(rc, o.str());
  };

  const std::vector<std::string> stoch_args{
      "stochastic", "-i", (dir / "model.bsys").string(), "--simulate", "--control",
      "decexp:0.3", "--tend", "2", "--steps", "256", "--seed", "11"};
  const auto s1 = run(stoch_args);
  const auto s2 = run(stoch_args);
  require(out, s1.first == 0 && s1.second == s2.second && !s1.second.empty(),
          "stochastic rerun differs");

  const std::vector<std::string> sim_args{
      "simulate", "-i", (dir / "sys.bsys").string(), "--control", "decexp:0.4",
      "--tend", "2", "--steps", "200", "--state"};
  const auto d1 = run(sim_args);
  const auto d2 = run(sim_args);
  require(out, d1.first == 0 && d1.second == d2.second, "simulate rerun differs");

  {
    std::ostringstream a;
    save_system(a, testing::example2d());
    std::istringstream in(a.str());
    const BilinearSystem sys = load_system(in);
    std::ostringstream b;
    save_system(b, sys);
    require(out, a.str() == b.str(), "system file round trip not byte-exact");
  }
  {
    std::ostringstream a;
    save_model(a, testing::cpoisson_model(testing::example2d(), 0.75));
    std::istringstream in(a.str());
    const StochasticModel m = load_model(in);
    std::ostringstream b;
    save_model(b, m);
    require(out, a.str() == b.str(), "model file round trip not byte-exact");
  }
  {
    Matd M(2, 3);
    M << 4.0 / 7.0, 1e-300, -0.1, 2.0 / 3.0, 123456.789, -0.0625;
    std::ostringstream a;
    write_csv(a, {"u", "v", "w"}, M, {"note"});
    std::istringstream in(a.str());
    const CsvTable tab = read_csv(in);
    std::ostringstream b;
    write_csv(b, tab.columns, tab.rows, {"note"});
    require(out, a.str() == b.str(), "csv round trip not byte-exact");
  }
  if (out.ok) out.detail = "reruns and round trips byte-identical";
  return out;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> entries{
      {1, 1.0, criterion1},   {2, 30.0, criterion2},  {3, 60.0, criterion3},
      {4, 60.0, criterion4},  {5, 300.0, criterion5}, {6, 300.0, criterion6},
      {7, 120.0, criterion7}, {8, 30.0, criterion8},  {9, 300.0, criterion9},
      {10, 600.0, criterion10}, {11, 60.0, criterion11}, {12, 600.0, criterion12},
  };

  int failures = 0;
  for (const auto& entry : entries) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = entry.run();
    } catch (const std::exception& e) {
      out.ok = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > entry.budget_s) {
      out.ok = false;
      out.detail += (out.detail.empty() ? "" : "; ") + std::string("over the ") +
                    num(entry.budget_s) + "s budget";
    }
    if (!out.ok) ++failures;
    std::printf("criterion %d %s (%.1fs) %s\n", entry.id, out.ok ? "PASS" : "FAIL", secs,
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(entries.size()) - failures,
              entries.size());
  return failures;
}
