#include "bilbt/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace bilbt {

std::string fmt_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

namespace {

// Line-oriented reader tracking positions for error reports. Blank lines
// and # comments are transparent.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& out) {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++line_;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (!raw.empty() && raw.back() == '\r') raw.pop_back();
      out = raw;
      return true;
    }
    return false;
  }

  std::string require(const std::string& what) {
    std::string s;
    if (!next(s)) throw ParseError("unexpected end of file, expected " + what, line_ + 1);
    return s;
  }

  int line() const { return line_; }

 private:
  std::istream& in_;
  int line_ = 0;
};

std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> t;
  std::istringstream iss(s);
  std::string w;
  while (iss >> w) t.push_back(w);
  return t;
}

double parse_number(const std::string& tok, int line, int col) {
  const char* p = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(p, &end);
  if (end == p || *end != '\0')
    throw ParseError("not a number: '" + tok + "'", line, col);
  return v;
}

long parse_int(const std::string& tok, int line, int col) {
  const char* p = tok.c_str();
  char* end = nullptr;
  const long v = std::strtol(p, &end, 10);
  if (end == p || *end != '\0')
    throw ParseError("not an integer: '" + tok + "'", line, col);
  return v;
}

long keyword_count(LineReader& rd, const std::string& key) {
  const std::string s = rd.require("'" + key + " <count>'");
  const auto t = tokens(s);
  if (t.size() != 2 || t[0] != key)
    throw ParseError("expected '" + key + " <count>'", rd.line());
  const long v = parse_int(t[1], rd.line(), 2);
  if (v < 0) throw ParseError(key + " count must be nonnegative", rd.line(), 2);
  return v;
}

Matd read_matrix_rows(LineReader& rd, const std::string& name, Index rows, Index cols) {
  Matd M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const std::string s = rd.require("row " + std::to_string(i + 1) + " of " + name);
    const auto t = tokens(s);
    if (Index(t.size()) != cols)
      throw ParseError(name + " row has " + std::to_string(t.size()) + " entries, expected " +
                           std::to_string(cols),
                       rd.line());
    for (Index j = 0; j < cols; ++j) M(i, j) = parse_number(t[j], rd.line(), int(j) + 1);
  }
  return M;
}

Matd read_matrix(LineReader& rd, const std::string& name, Index rows, Index cols) {
  const std::string s = rd.require("matrix header '" + name + "'");
  if (tokens(s) != tokens(name))
    throw ParseError("expected matrix header '" + name + "', got '" + s + "'", rd.line());
  return read_matrix_rows(rd, name, rows, cols);
}

void write_matrix(std::ostream& out, const std::string& name, const Matd& M) {
  out << name << "\n";
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) out << (j ? " " : "") << fmt_double(M(i, j));
    out << "\n";
  }
}

}  // namespace

SystemFile parse_system_file(std::istream& in) {
  LineReader rd(in);
  {
    const std::string s = rd.require("'bsys v1' header");
    if (tokens(s) != std::vector<std::string>{"bsys", "v1"})
      throw ParseError("expected 'bsys v1' header, got '" + s + "'", std::max(rd.line(), 1));
  }
  const long d = keyword_count(rd, "n_state");
  const long nin = keyword_count(rd, "n_in");
  const long nout = keyword_count(rd, "n_out");
  if (d < 1) throw ParseError("n_state must be at least 1", rd.line());
  if (nin < 1) throw ParseError("n_in must be at least 1", rd.line());
  if (nout < 1) throw ParseError("n_out must be at least 1", rd.line());

  SystemFile f;
  {
    const std::string head = rd.require("matrix header 'A'");
    if (tokens(head) != std::vector<std::string>{"A"})
      throw ParseError("expected matrix header 'A', got '" + head + "'", rd.line());
  }
  f.A = read_matrix_rows(rd, "A", d, d);

  // N sections run while headers keep the form 'N <index>'; the first
  // non-matching line is handed on to the B section.
  std::string pending = rd.require("matrix header 'N 1' or 'B'");
  while (true) {
    const auto t = tokens(pending);
    if (t.size() != 2 || t[0] != "N") break;
    if (parse_int(t[1], rd.line(), 2) != long(f.N.size()) + 1)
      throw ParseError("N sections must be numbered consecutively from 1", rd.line(), 2);
    f.N.push_back(read_matrix_rows(rd, pending, d, d));
    pending = rd.require("matrix header 'N " + std::to_string(f.N.size() + 1) + "' or 'B'");
  }

  if (tokens(pending) != std::vector<std::string>{"B"})
    throw ParseError("expected matrix header 'B', got '" + pending + "'", rd.line());
  f.B = read_matrix_rows(rd, "B", d, nin);
  f.C = read_matrix(rd, "C", nout, d);

  // optional trailing noise declarations, one channel per line
  std::string extra;
  std::vector<NoiseChannel> noise;
  while (rd.next(extra)) {
    const auto t = tokens(extra);
    if (t.empty() || t[0] != "noise")
      throw ParseError("unexpected trailing content: '" + extra + "'", rd.line());
    if (t.size() != 4)
      throw ParseError("expected 'noise <index> wiener|cpoisson <rate>'", rd.line());
    if (parse_int(t[1], rd.line(), 2) != long(noise.size()) + 1)
      throw ParseError("noise lines must be numbered consecutively from 1", rd.line(), 2);
    NoiseChannel ch;
    if (t[2] == "wiener") {
      ch.kind = NoiseKind::wiener;
    } else if (t[2] == "cpoisson") {
      ch.kind = NoiseKind::cpoisson;
    } else {
      throw ParseError("unknown noise kind '" + t[2] + "'", rd.line(), 3);
    }
    ch.rate = parse_number(t[3], rd.line(), 4);
    if (!(ch.rate > 0)) throw ParseError("noise rate must be positive", rd.line(), 4);
    noise.push_back(ch);
  }
  if (!noise.empty()) f.noise = std::move(noise);

  const long want_n = f.noise ? long(f.noise->size()) : nin;
  const char* against = f.noise ? "the noise channel count" : "n_in";
  if (long(f.N.size()) != want_n)
    throw ParseError("file has " + std::to_string(f.N.size()) + " N sections but " + against +
                         " is " + std::to_string(want_n),
                     rd.line());
  return f;
}

BilinearSystem load_system(std::istream& in) {
  SystemFile f = parse_system_file(in);
  if (f.noise)
    throw ParseError("file declares noise channels; load it as a stochastic model", 1);
  BilinearSystem sys;
  sys.A = std::move(f.A);
  sys.N = std::move(f.N);
  sys.B = std::move(f.B);
  sys.C = std::move(f.C);
  require_valid(sys);
  return sys;
}

StochasticModel load_model(std::istream& in) {
  SystemFile f = parse_system_file(in);
  if (!f.noise)
    throw ParseError("file declares no noise channels; load it as a deterministic system", 1);
  StochasticModel m;
  m.A = std::move(f.A);
  m.N = std::move(f.N);
  m.B = std::move(f.B);
  m.C = std::move(f.C);
  m.noise = std::move(*f.noise);
  require_valid(m);
  return m;
}

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing", 0);
  return out;
}

}  // namespace

BilinearSystem load_system_file(const std::string& path) {
  auto in = open_input(path);
  return load_system(in);
}

StochasticModel load_model_file(const std::string& path) {
  auto in = open_input(path);
  return load_model(in);
}

void save_system(std::ostream& out, const BilinearSystem& sys) {
  require_valid(sys);
  out << "bsys v1\n";
  out << "n_state " << sys.state_dim() << "\n";
  out << "n_in " << sys.input_dim() << "\n";
  out << "n_out " << sys.output_dim() << "\n";
  write_matrix(out, "A", sys.A);
  for (size_t k = 0; k < sys.N.size(); ++k)
    write_matrix(out, "N " + std::to_string(k + 1), sys.N[k]);
  write_matrix(out, "B", sys.B);
  write_matrix(out, "C", sys.C);
}

void save_model(std::ostream& out, const StochasticModel& m) {
  require_valid(m);
  out << "bsys v1\n";
  out << "n_state " << m.state_dim() << "\n";
  out << "n_in " << m.control_dim() << "\n";
  out << "n_out " << m.output_dim() << "\n";
  write_matrix(out, "A", m.A);
  for (size_t k = 0; k < m.N.size(); ++k)
    write_matrix(out, "N " + std::to_string(k + 1), m.N[k]);
  write_matrix(out, "B", m.B);
  write_matrix(out, "C", m.C);
  for (size_t j = 0; j < m.noise.size(); ++j) {
    out << "noise " << (j + 1) << " "
        << (m.noise[j].kind == NoiseKind::wiener ? "wiener" : "cpoisson") << " "
        << fmt_double(m.noise[j].rate) << "\n";
  }
}

void save_system_file(const std::string& path, const BilinearSystem& sys) {
  auto out = open_output(path);
  save_system(out, sys);
}

void save_model_file(const std::string& path, const StochasticModel& m) {
  auto out = open_output(path);
  save_model(out, m);
}

void write_csv(std::ostream& out, const std::vector<std::string>& columns, const Matd& rows,
               const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << "\n";
  for (size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << "\n";
  if (Index(columns.size()) != rows.cols() && rows.size() != 0)
    throw DimMismatch("write_csv: header width does not match data");
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index j = 0; j < rows.cols(); ++j)
      out << (j ? "," : "") << fmt_double(rows(i, j));
    out << "\n";
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& s) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable tab;
  std::string raw;
  int line = 0;
  std::vector<std::vector<double>> data;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.empty() || raw[0] == '#') continue;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(raw);
    if (!have_header) {
      tab.columns = cells;
      have_header = true;
      continue;
    }
    if (cells.size() != tab.columns.size())
      throw ParseError("row has " + std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(tab.columns.size()),
                       line);
    std::vector<double> row;
    for (size_t j = 0; j < cells.size(); ++j)
      row.push_back(parse_number(cells[j], line, int(j) + 1));
    data.push_back(std::move(row));
  }
  if (!have_header) throw ParseError("empty table", std::max(line, 1));
  tab.rows.resize(Index(data.size()), Index(tab.columns.size()));
  for (size_t i = 0; i < data.size(); ++i)
    for (size_t j = 0; j < data[i].size(); ++j) tab.rows(Index(i), Index(j)) = data[i][j];
  return tab;
}

void write_trace_csv(std::ostream& out, const SimulationTrace& tr, bool with_state,
                     const std::vector<std::string>& comments) {
  std::vector<std::string> cols{"t"};
  for (Index i = 0; i < tr.y.rows(); ++i) cols.push_back("y" + std::to_string(i + 1));
  if (with_state)
    for (Index i = 0; i < tr.x.rows(); ++i) cols.push_back("x" + std::to_string(i + 1));
  Matd rows(tr.t.size(), Index(cols.size()));
  rows.col(0) = tr.t;
  rows.middleCols(1, tr.y.rows()) = tr.y.transpose();
  if (with_state) rows.rightCols(tr.x.rows()) = tr.x.transpose();
  write_csv(out, cols, rows, comments);
}

ControlSignal load_control_csv(std::istream& in) {
  const CsvTable tab = read_csv(in);
  if (tab.columns.empty() || tab.columns[0] != "t")
    throw ParseError("first column must be 't'", 1);
  if (tab.columns.size() < 2) throw ParseError("need at least one control column", 1);
  if (tab.rows.rows() < 2) throw ParseError("need at least two sample rows", 1);
  const Vecd t = tab.rows.col(0);
  if (std::abs(t(0)) > 1e-12) throw ParseError("time grid must start at 0", 2);
  const double h = t(1) - t(0);
  if (!(h > 0)) throw ParseError("time grid must be increasing", 3);
  for (Index i = 1; i < t.size(); ++i)
    if (std::abs(t(i) - double(i) * h) > 1e-9 * std::max(1.0, std::abs(t(t.size() - 1))))
      throw ParseError("time grid is not uniform at row " + std::to_string(i + 1),
                       int(i) + 2);
  ControlSignal u;
  u.kind = ControlSignal::Kind::sampled;
  u.samples = tab.rows.rightCols(tab.rows.cols() - 1).transpose();
  u.h = h;
  return u;
}

ControlSignal load_control_csv_file(const std::string& path) {
  auto in = open_input(path);
  return load_control_csv(in);
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

Vecd parse_amplitudes(const std::string& s) {
  const auto parts = split_on(s, ',');
  Vecd a(Index(parts.size()));
  for (size_t i = 0; i < parts.size(); ++i) a(Index(i)) = parse_number(parts[i], 1, int(i) + 1);
  return a;
}

}  // namespace

ControlSignal parse_control_spec(const std::string& spec, Index channels) {
  if (spec == "zero") {
    if (channels < 0)
      throw ParseError("'zero' needs a channel count from the surrounding context", 1);
    return ControlSignal::zero(channels);
  }
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw ParseError("control spec must be zero, decexp:..., window:..., or csv:...", 1);
  const std::string family = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);

  ControlSignal u;
  if (family == "decexp") {
    const auto parts = split_on(rest, ';');
    if (parts.size() > 2) throw ParseError("decexp takes amplitudes and an optional rate", 1);
    u.kind = ControlSignal::Kind::decaying_exp;
    u.amplitude = parse_amplitudes(parts[0]);
    u.rate = parts.size() == 2 ? parse_number(parts[1], 1, 1) : 1.0;
    if (!(u.rate > 0)) throw ParseError("decexp rate must be positive", 1);
  } else if (family == "window") {
    const auto parts = split_on(rest, ';');
    if (parts.size() != 3) throw ParseError("window needs amplitudes;t0;t1", 1);
    u.kind = ControlSignal::Kind::windowed_const;
    u.amplitude = parse_amplitudes(parts[0]);
    u.t0 = parse_number(parts[1], 1, 1);
    u.t1 = parse_number(parts[2], 1, 1);
    if (!(u.t1 > u.t0)) throw ParseError("window needs t1 > t0", 1);
  } else if (family == "csv") {
    u = load_control_csv_file(rest);
  } else {
    throw ParseError("unknown control family '" + family + "'", 1);
  }
  if (channels >= 0 && u.channels() != channels)
    throw ParseError("control has " + std::to_string(u.channels()) +
                         " channels, the system expects " + std::to_string(channels),
                     1);
  return u;
}

}  // namespace bilbt
