#include "bilbt/cli.hpp"

#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "bilbt/balancing.hpp"
#include "bilbt/error_bound.hpp"
#include "bilbt/gramians.hpp"
#include "bilbt/hankel_fock.hpp"
#include "bilbt/io.hpp"
#include "bilbt/stochastic.hpp"
#include "bilbt/system.hpp"
#include "bilbt/transfer.hpp"
#include "bilbt/volterra.hpp"

namespace bilbt {
namespace {

void print_kv(std::ostream& os, const std::string& key, double v) {
  os << key << " " << fmt_double(v) << "\n";
}

void print_matrix(std::ostream& os, const std::string& name, const Matd& M) {
  os << name << "\n";
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) os << (j ? " " : "") << fmt_double(M(i, j));
    os << "\n";
  }
}

std::string join_values(const Vecd& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += " ";
    s += fmt_double(v(i));
  }
  return s;
}

Vecd parse_vec(const std::string& spec) {
  std::vector<double> vals;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) throw ParseError("empty entry in vector spec", 1);
    char* end = nullptr;
    const double v = std::strtod(cur.c_str(), &end);
    if (end == cur.c_str() || *end != '\0')
      throw ParseError("not a number: '" + cur + "'", 1);
    vals.push_back(v);
    cur.clear();
  };
  for (char c : spec) {
    if (c == ',')
      flush();
    else
      cur += c;
  }
  flush();
  Vecd v(Index(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) v(Index(i)) = vals[i];
  return v;
}

// Routes "-" (or empty) to the default stream, anything else to a file.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& dflt) : dflt_(dflt) {
    if (!path.empty() && path != "-") {
      file_.emplace(path);
      if (!*file_) throw ParseError("cannot open '" + path + "' for writing", 0);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : dflt_; }
  bool is_file() const { return file_.has_value(); }

 private:
  std::ostream& dflt_;
  std::optional<std::ofstream> file_;
};

struct CsvOf {
  static void matrix(std::ostream& os, const Matd& M, const std::string& stem,
                     const std::vector<std::string>& comments = {}) {
    std::vector<std::string> cols;
    for (Index j = 0; j < M.cols(); ++j) cols.push_back(stem + std::to_string(j + 1));
    write_csv(os, cols, M, comments);
  }
};

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"balanced truncation of bilinear and stochastic control systems"};
  app.require_subcommand(1);

  // Metadata header for written artifacts: version, config echo, seed.
  auto meta = [&args](std::optional<std::uint64_t> seed = std::nullopt) {
    std::vector<std::string> c{"bsys-cli v1"};
    std::string cmd = "cmd: bsys";
    for (const auto& a : args) cmd += " " + a;
    c.push_back(cmd);
    if (seed) c.push_back("seed: " + std::to_string(*seed));
    return c;
  };
  auto comment_block = [&](std::ostream& os, std::optional<std::uint64_t> seed = std::nullopt) {
    for (const auto& line : meta(seed)) os << "# " << line << "\n";
  };

  // ---- gramian ----------------------------------------------------------
  struct {
    std::string input, outdir;
    std::string method = "direct";
    int depth = 0;
  } gr;
  auto* c_gramian = app.add_subcommand("gramian", "solve for the gramian pair");
  c_gramian->add_option("-i,--input", gr.input, "system file")->required();
  c_gramian->add_option("--method", gr.method, "direct or series")
      ->check(CLI::IsMember({"direct", "series"}));
  c_gramian->add_option("--depth", gr.depth, "series depth (0 = automatic)");
  c_gramian->add_option("--outdir", gr.outdir, "write P.csv and O.csv into this directory");
  c_gramian->callback([&] {
    const BilinearSystem sys = load_system_file(gr.input);
    try {
      const StabilityCertificate cert = stability_certificate(sys);
      out << "certificate_method "
          << (cert.method == CertMethod::log_norm ? "log-norm" : "grid-estimate") << "\n";
      print_kv(out, "M", cert.M);
      print_kv(out, "nu", cert.nu);
      print_kv(out, "Gamma", cert.Gamma);
      print_kv(out, "Xi", cert.Xi);
      print_kv(out, "theta", cert.theta);
    } catch (const NotStable&) {
      out << "certificate unavailable\n";
    }
    Matd P, O;
    if (gr.method == "direct") {
      const GramianPair g = gramian_direct(sys);
      print_kv(out, "res_P", g.res_P);
      print_kv(out, "res_O", g.res_O);
      print_matrix(out, "P", g.P);
      print_matrix(out, "O", g.O);
      P = g.P;
      O = g.O;
    } else {
      const auto series = gramian_series(sys, gr.depth);
      out << "terms " << series.P_terms.size() << "\n";
      P = series.partial_P(series.P_terms.size());
      O = series.partial_O(series.O_terms.size());
      print_matrix(out, "P", P);
      print_matrix(out, "O", O);
    }
    if (!gr.outdir.empty()) {
      Sink ps(gr.outdir + "/P.csv", out);
      CsvOf::matrix(ps.stream(), P, "c", meta());
      Sink os_(gr.outdir + "/O.csv", out);
      CsvOf::matrix(os_.stream(), O, "c", meta());
    }
  });

  // ---- hsv --------------------------------------------------------------
  struct {
    std::string input, output = "-";
  } hs;
  auto* c_hsv = app.add_subcommand("hsv", "Hankel singular values");
  c_hsv->add_option("-i,--input", hs.input, "system file")->required();
  c_hsv->add_option("-o,--output", hs.output, "CSV destination (- for stdout)");
  c_hsv->callback([&] {
    const BilinearSystem sys = load_system_file(hs.input);
    const GramianPair g = gramian_direct(sys);
    const Vecd s = hankel_singular_values(g.P, g.O);
    Matd rows(s.size(), 2);
    for (Index i = 0; i < s.size(); ++i) {
      rows(i, 0) = double(i + 1);
      rows(i, 1) = s(i);
    }
    Sink sink(hs.output, out);
    write_csv(sink.stream(), {"index", "sigma"}, rows, meta());
  });

  // ---- balance ----------------------------------------------------------
  struct {
    std::string input, output = "-";
  } ba;
  auto* c_balance = app.add_subcommand("balance", "balanced realization");
  c_balance->add_option("-i,--input", ba.input, "system file")->required();
  c_balance->add_option("-o,--output", ba.output, "balanced system destination");
  c_balance->callback([&] {
    const BilinearSystem sys = load_system_file(ba.input);
    const auto bal = balance(sys);
    Sink sink(ba.output, out);
    comment_block(sink.stream());
    sink.stream() << "# sigma: " << join_values(bal.sigma) << "\n";
    save_system(sink.stream(), bal.sys);
    if (sink.is_file()) out << "sigma: " << join_values(bal.sigma) << "\n";
  });

  // ---- reduce -----------------------------------------------------------
  struct {
    std::string input, output = "-";
    Index order = 1;
    bool force = false;
  } re;
  auto* c_reduce = app.add_subcommand("reduce", "balanced truncation to a smaller order");
  c_reduce->add_option("-i,--input", re.input, "system file")->required();
  c_reduce->add_option("-r,--order", re.order, "states kept")->required();
  c_reduce->add_flag("--force", re.force, "cut through a near-equal singular pair");
  c_reduce->add_option("-o,--output", re.output, "reduced system destination");
  c_reduce->callback([&] {
    const BilinearSystem sys = load_system_file(re.input);
    const auto red = truncate(balance(sys), re.order, re.force);
    Sink sink(re.output, out);
    comment_block(sink.stream());
    sink.stream() << "# sigma_kept: " << join_values(red.sigma_kept) << "\n";
    sink.stream() << "# sigma_discarded: " << join_values(red.sigma_discarded) << "\n";
    save_system(sink.stream(), red.sys);
    if (sink.is_file()) {
      out << "sigma_kept: " << join_values(red.sigma_kept) << "\n";
      out << "sigma_discarded: " << join_values(red.sigma_discarded) << "\n";
    }
  });

  // ---- bound ------------------------------------------------------------
  struct {
    std::string input, reduced, control;
    double lp = 0;  // 0 selects the sup norm
  } bo;
  auto* c_bound = app.add_subcommand("bound", "truncation error bounds");
  c_bound->add_option("-i,--input", bo.input, "full system file")->required();
  c_bound->add_option("-R,--reduced", bo.reduced, "reduced system file")->required();
  c_bound->add_option("--control", bo.control, "control spec for signal-dependent bounds");
  c_bound->add_option("--lp", bo.lp, "p for the L^p control norm (0 = sup)");
  c_bound->callback([&] {
    const BilinearSystem full = load_system_file(bo.input);
    const BilinearSystem red = load_system_file(bo.reduced);
    std::optional<ControlSignal> u;
    if (!bo.control.empty()) u = parse_control_spec(bo.control, full.input_dim());
    const double p = bo.lp <= 0 ? std::numeric_limits<double>::infinity() : bo.lp;
    const BoundReport rep = bound_report(full, red, u ? &*u : nullptr, p);
    print_kv(out, "delta_h_tc", rep.delta_h_tc);
    print_kv(out, "bound_transfer", rep.bound_transfer);
    out << "certificate_ok " << (rep.certificate_ok ? 1 : 0) << "\n";
    if (rep.composite_cert) print_kv(out, "theta_composite", rep.composite_cert->theta);
    if (rep.control_l2_supnorm) print_kv(out, "control_l2_supnorm", *rep.control_l2_supnorm);
    if (rep.admissibility_radius)
      print_kv(out, "admissibility_radius", *rep.admissibility_radius);
    if (rep.bound_output)
      print_kv(out, "bound_output", *rep.bound_output);
    else if (u)
      out << "bound_output unavailable\n";
    if (rep.bound_stoch_mean) print_kv(out, "bound_stoch_mean", *rep.bound_stoch_mean);
    if (rep.bound_stoch_sup) print_kv(out, "bound_stoch_sup", *rep.bound_stoch_sup);
  });

  // ---- hankel -----------------------------------------------------------
  struct {
    std::string input, dense, svd;
    double scale = 1;
    int modes = 20, depth = 3;
    Index budget = 20000;
    bool require_dense = false;
    int tail = -1;
    std::vector<int> block;
  } ha;
  auto* c_hankel = app.add_subcommand("hankel", "Galerkin Hankel operator on the Fock space");
  c_hankel->add_option("-i,--input", ha.input, "system file")->required();
  c_hankel->add_option("--scale", ha.scale, "Laguerre scale");
  c_hankel->add_option("--modes", ha.modes, "Laguerre modes per variable");
  c_hankel->add_option("--depth", ha.depth, "kernel levels per side");
  c_hankel->add_option("--budget", ha.budget, "dense row+column budget");
  c_hankel->add_flag("--require-dense", ha.require_dense, "fail instead of skipping dense");
  c_hankel->add_option("--dense", ha.dense, "write the dense matrix as CSV here");
  c_hankel->add_option("--svd", ha.svd, "write singular values as CSV here");
  c_hankel->add_option("--tail", ha.tail, "print the HS tail beyond this level");
  c_hankel->add_option("--block", ha.block, "print one block Frobenius norm (two levels)")
      ->expected(2);
  c_hankel->callback([&] {
    const BilinearSystem sys = load_system_file(ha.input);
    FockGrid grid;
    grid.a = ha.scale;
    grid.modes = ha.modes;
    grid.depth = ha.depth;
    HankelOptions opts;
    opts.dense_budget = ha.budget;
    opts.require_dense = ha.require_dense;
    const HankelMatrix H = assemble_hankel(sys, grid, opts);
    out << "row_dims " << [&] {
      std::string s;
      for (Index r : H.row_dims) s += (s.empty() ? "" : " ") + std::to_string(r);
      return s;
    }() << "\n";
    out << "col_dims " << [&] {
      std::string s;
      for (Index r : H.col_dims) s += (s.empty() ? "" : " ") + std::to_string(r);
      return s;
    }() << "\n";
    out << "dense " << (H.dense ? 1 : 0) << "\n";
    print_kv(out, "trace_norm", hankel_trace_norm(H));
    print_kv(out, "hs_norm", hankel_hs_norm(H));
    const Vecd s = hankel_svd(H);
    out << "sigma: " << join_values(s) << "\n";
    if (ha.tail >= 0) print_kv(out, "tail_hs", hankel_tail_hs(H, ha.tail));
    if (ha.block.size() == 2)
      print_kv(out, "block_frobenius", hankel_block_frobenius(H, ha.block[0], ha.block[1]));
    if (!ha.svd.empty()) {
      Matd rows(s.size(), 2);
      for (Index i = 0; i < s.size(); ++i) {
        rows(i, 0) = double(i + 1);
        rows(i, 1) = s(i);
      }
      Sink sink(ha.svd, out);
      write_csv(sink.stream(), {"index", "sigma"}, rows, meta());
    }
    if (!ha.dense.empty()) {
      Sink sink(ha.dense, out);
      CsvOf::matrix(sink.stream(), dense_matrix(H), "c", meta());
    }
  });

  // ---- simulate ---------------------------------------------------------
  struct {
    std::string input, control, output = "-", x0;
    std::string method = "rk4";
    double tend = 10;
    int steps = 1000;
    int volterra = -1;
    bool with_state = false;
  } si;
  auto* c_simulate = app.add_subcommand("simulate", "integrate the controlled system");
  c_simulate->add_option("-i,--input", si.input, "system file")->required();
  c_simulate->add_option("--control", si.control, "control spec")->required();
  c_simulate->add_option("--method", si.method, "rk4 or volterra:<depth>");
  c_simulate->add_option("--tend", si.tend, "time horizon");
  c_simulate->add_option("--steps", si.steps, "integration steps");
  c_simulate->add_option("--x0", si.x0, "initial state, comma separated (default 0)");
  c_simulate->add_option("--volterra", si.volterra,
                         "also sum the Volterra cascade to this order");
  c_simulate->add_flag("--state", si.with_state, "include state columns");
  c_simulate->add_option("-o,--output", si.output, "trace CSV destination");
  c_simulate->callback([&] {
    const BilinearSystem sys = load_system_file(si.input);
    const ControlSignal u = parse_control_spec(si.control, sys.input_dim());
    const Vecd x0 = si.x0.empty() ? Vecd(Vecd::Zero(sys.state_dim())) : parse_vec(si.x0);
    int depth = si.volterra;
    bool emit_volterra = false;
    if (si.method != "rk4") {
      if (si.method.rfind("volterra:", 0) != 0)
        throw ParseError("--method must be rk4 or volterra:<depth>", 1);
      depth = int(parse_vec(si.method.substr(9))(0));
      if (depth < 0) throw ParseError("volterra depth must be nonnegative", 1);
      emit_volterra = true;
    }
    const SimulationTrace tr = integrate_rk4(sys, u, x0, si.tend, si.steps);
    SimulationTrace emitted = tr;
    if (depth >= 0) {
      const auto vs = volterra_series(sys, u, x0, si.tend, si.steps, depth);
      if (emit_volterra) emitted = vs.partial_sum;
      print_kv(out, "volterra_gap", sup_output_error(tr, vs.partial_sum));
      try {
        print_kv(out, "contraction",
                 volterra_contraction(stability_certificate(sys), control_norms(u)));
      } catch (const NotStable&) {
        out << "contraction unavailable\n";
      }
    }
    Sink sink(si.output, out);
    write_trace_csv(sink.stream(), emitted, si.with_state, meta());
  });

  // ---- stochastic -------------------------------------------------------
  struct {
    std::string input, reduced, control = "zero", output = "-";
    std::string check, flow_probe, obs_probe, steer_target;
    std::string coupling = "independent";
    bool gramians = false, simulate = false, with_state = false;
    Index reduce_order = 0;
    double lp = 0, tend = 10, horizon = 1;
    int steps = 1000, paths = 200;
    std::uint64_t seed = 1, stream = 0;
  } st;
  auto* c_stoch = app.add_subcommand("stochastic", "stochastic model tools");
  c_stoch->add_option("-i,--input", st.input, "model file")->required();
  c_stoch->add_flag("--gramians", st.gramians, "print the gramian pair");
  c_stoch->add_option("--reduce", st.reduce_order, "balanced truncation to this order");
  c_stoch->add_option("-R,--reduced", st.reduced, "reduced model file for --check");
  c_stoch->add_option("--check", st.check, "output error bound check: mean or sup")
      ->check(CLI::IsMember({"mean", "sup"}));
  c_stoch->add_option("--coupling", st.coupling,
                      "noise wiring for --check: independent draws separate streams "
                      "per system, shared reuses one")
      ->check(CLI::IsMember({"independent", "shared"}));
  c_stoch->add_option("--control", st.control, "control spec");
  c_stoch->add_option("--lp", st.lp, "p for the L^p control norm (0 = sup)");
  c_stoch->add_flag("--simulate", st.simulate, "write one Euler-Maruyama path");
  c_stoch->add_flag("--state", st.with_state, "include state columns in the path CSV");
  c_stoch->add_option("--tend", st.tend, "time horizon");
  c_stoch->add_option("--steps", st.steps, "time steps");
  c_stoch->add_option("--paths", st.paths, "Monte-Carlo paths");
  c_stoch->add_option("--seed", st.seed, "random seed");
  c_stoch->add_option("--stream", st.stream, "path stream for --simulate");
  c_stoch->add_option("--flow-probe", st.flow_probe,
                      "estimate <x,Px> through the matrix flow for this state");
  c_stoch->add_option("--obs-probe", st.obs_probe,
                      "expected output energy on [0, horizon] for this state");
  c_stoch->add_option("--steer-target", st.steer_target,
                      "minimum-energy mean steering to this state");
  c_stoch->add_option("--horizon", st.horizon, "finite horizon tau");
  c_stoch->add_option("-o,--output", st.output, "destination of the selected artifact");
  c_stoch->callback([&] {
    const StochasticModel m = load_model_file(st.input);
    print_kv(out, "ms_abscissa", ms_abscissa(m));
    out << "ms_stable " << (ms_stable(m) ? 1 : 0) << "\n";
    if (st.gramians) {
      const GramianPair g = stochastic_gramians(m);
      print_kv(out, "res_P", g.res_P);
      print_kv(out, "res_O", g.res_O);
      print_matrix(out, "P", g.P);
      print_matrix(out, "O", g.O);
    }
    if (st.reduce_order > 0) {
      const auto red = stochastic_reduce(m, st.reduce_order);
      Sink sink(st.output, out);
      comment_block(sink.stream());
      sink.stream() << "# sigma_kept: " << join_values(red.sigma_kept) << "\n";
      sink.stream() << "# sigma_discarded: " << join_values(red.sigma_discarded) << "\n";
      save_model(sink.stream(), red.model);
      if (sink.is_file()) out << "sigma_kept: " << join_values(red.sigma_kept) << "\n";
    }
    if (!st.check.empty()) {
      if (st.reduced.empty()) throw ParseError("--check needs -R", 1);
      const StochasticModel red = load_model_file(st.reduced);
      const ControlSignal u = parse_control_spec(st.control, m.control_dim());
      const double p = st.lp <= 0 ? std::numeric_limits<double>::infinity() : st.lp;
      const auto mode = st.check == "mean" ? StochasticBoundMode::mean_lp
                                           : StochasticBoundMode::sup_mean;
      const auto wiring = st.coupling == "shared" ? NoiseCoupling::shared
                                                  : NoiseCoupling::independent;
      const auto chk = stochastic_bound_check(m, red, u, p, st.tend, st.steps, st.paths,
                                              st.seed, mode, wiring);
      out << "coupling " << st.coupling << "\n";
      print_kv(out, "delta_tc", chk.delta_tc);
      print_kv(out, "estimate", chk.estimate);
      print_kv(out, "stderr", chk.stderr_);
      print_kv(out, "bound", chk.bound);
      out << "ok " << (chk.ok ? 1 : 0) << "\n";
    }
    if (st.simulate) {
      const ControlSignal u = parse_control_spec(st.control, m.control_dim());
      const auto tr = simulate_sde(m, u, Vecd(Vecd::Zero(m.state_dim())), st.tend, st.steps,
                                   st.seed, st.stream);
      Sink sink(st.output, out);
      write_trace_csv(sink.stream(), tr, st.with_state, meta(st.seed));
    }
    if (!st.flow_probe.empty()) {
      const Vecd x = parse_vec(st.flow_probe);
      const auto est = flow_gramian_estimate(m, x, st.tend, st.steps, st.paths, st.seed);
      const GramianPair g = stochastic_gramians(m);
      print_kv(out, "flow_estimate", est.value);
      print_kv(out, "flow_stderr", est.stderr_);
      print_kv(out, "flow_direct", x.dot(g.P * x));
    }
    if (!st.obs_probe.empty()) {
      const Vecd x = parse_vec(st.obs_probe);
      const Matd G = finite_horizon_obs_energy(m, st.horizon);
      print_kv(out, "obs_energy", x.dot(G * x));
    }
    if (!st.steer_target.empty()) {
      const Vecd target = parse_vec(st.steer_target);
      const auto res = minimum_energy_steering(m, target, st.horizon, st.steps);
      print_kv(out, "steer_energy", res.energy);
      print_kv(out, "steer_range_residual", res.range_residual);
      print_kv(out, "steer_terminal_error", res.terminal_error);
      if (st.output != "-") {
        Sink sink(st.output, out);
        write_trace_csv(sink.stream(), res.mean_trace, true, meta());
      }
    }
  });

  // ---- h2 ---------------------------------------------------------------
  struct {
    std::string input;
  } h2o;
  auto* c_h2 = app.add_subcommand("h2", "squared H2-type norm both ways");
  c_h2->add_option("-i,--input", h2o.input, "system file")->required();
  c_h2->callback([&] {
    const BilinearSystem sys = load_system_file(h2o.input);
    const auto h = h2_norm(sys);
    print_kv(out, "via_O", h.via_O);
    print_kv(out, "via_P", h.via_P);
    print_kv(out, "gap", std::abs(h.via_O - h.via_P));
  });

  // ---- transfer ---------------------------------------------------------
  struct {
    std::string input, reduced;
    int order = 0, kmax = 2, sup_index = 0;
    bool check = false;
    FrequencyGrid grid;
  } tro;
  auto* c_transfer = app.add_subcommand("transfer", "frequency-domain kernels and norms");
  c_transfer->add_option("-i,--input", tro.input, "system file")->required();
  c_transfer->add_option("--order,--k", tro.order, "kernel order for the norm");
  c_transfer->add_option("-R,--reduced", tro.reduced, "reduced system for --check");
  c_transfer->add_flag("--check,--check13", tro.check,
                       "verify the summed norms against the bound");
  c_transfer->add_option("--kmax", tro.kmax, "highest order in the check");
  c_transfer->add_option("--sup-index", tro.sup_index,
                         "frequency slot taken in sup (0 = order default)");
  c_transfer->add_option("--sup-max", tro.grid.sup_max, "sup variable range");
  c_transfer->add_option("--sup-points", tro.grid.sup_points, "sup samples");
  c_transfer->add_option("--int-max", tro.grid.int_max, "integration truncation");
  c_transfer->add_option("--int-points", tro.grid.int_points0, "initial integration intervals");
  c_transfer->add_option("--refine-tol", tro.grid.refine_tol, "refinement stop tolerance");
  c_transfer->add_option("--max-refine", tro.grid.max_refine, "refinement cap");
  c_transfer->callback([&] {
    const BilinearSystem sys = load_system_file(tro.input);
    if (tro.check) {
      if (tro.reduced.empty()) throw ParseError("--check needs -R", 1);
      const BilinearSystem red = load_system_file(tro.reduced);
      const auto chk = transfer_bound_check(sys, red, tro.kmax, tro.grid);
      print_kv(out, "delta_tc", chk.delta_tc);
      for (size_t g = 0; g < chk.per_order.size(); ++g)
        print_kv(out, "order_" + std::to_string(g), chk.per_order[g].value);
      print_kv(out, "partial_sum", chk.partial_sum);
      print_kv(out, "bound", chk.bound);
      out << "converged " << (chk.converged ? 1 : 0) << "\n";
      out << "ok " << (chk.ok ? 1 : 0) << "\n";
    } else {
      const auto est = tro.sup_index > 0
                           ? mixed_hardy_norm(sys, tro.order, tro.sup_index, tro.grid)
                           : mixed_hardy_norm(sys, tro.order, tro.grid);
      print_kv(out, "value", est.value);
      out << "converged " << (est.converged ? 1 : 0) << "\n";
      out << "levels " << est.levels << "\n";
    }
  });

  std::vector<const char*> argv;
  argv.push_back("bsys");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(int(argv.size()), argv.data());
    return 0;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 1;
  } catch (const bilbt::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const bilbt::Error& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace bilbt
