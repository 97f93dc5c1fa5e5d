#pragma once

// Text serialisation: points CSV, plan COO, potentials, JSON records.
// Numbers go through to_chars/from_chars, so output is locale independent
// and round-trips exactly.

#include "qrot/baselines.hpp"
#include "qrot/core.hpp"
#include "qrot/datasets.hpp"
#include "qrot/qot.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>
#include <system_error>

namespace qrot {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace io_detail {

inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

inline bool blank(const std::string& s) { return trim(s).empty(); }

}  // namespace io_detail

// ---------------------------------------------------------------- points

/// One row per point. Writes `header` as the first line when nonempty.
inline void write_points_csv(std::ostream& out, const Matrix& points, const std::string& header = {}) {
  if (!header.empty()) out << header << '\n';
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index k = 0; k < points.cols(); ++k) {
      if (k) out << ',';
      out << io_detail::format_double(points(i, k));
    }
    out << '\n';
  }
}

inline void write_points_csv(const std::string& path, const Matrix& points, const std::string& header = {}) {
  auto out = io_detail::open_out(path);
  write_points_csv(out, points, header);
}

/// Reads a numeric CSV; a first line with any non-numeric field is a header.
inline LabeledCloud read_points_csv(const std::string& path) {
  const auto lines = io_detail::read_lines(path);
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (io_detail::blank(lines[ln])) continue;
    const auto fields = io_detail::split(lines[ln]);
    std::vector<double> row;
    bool numeric = true;
    for (auto f : fields) {
      const auto v = io_detail::parse_double(f);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && width == 0) {
        width = fields.size();  // header
        continue;
      }
      throw ParseError(path, ln + 1, "non-numeric field");
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw ParseError(path, ln + 1, "non-finite value");
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw ParseError(path, ln + 1,
                       "expected " + std::to_string(width) + " fields, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no points");
  LabeledCloud cloud;
  cloud.points.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < width; ++k) cloud.points(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
  }
  cloud.info.name = "csv";
  return cloud;
}

/// Square numeric matrix from CSV (used for --cost input).
inline Matrix read_matrix_csv(const std::string& path) {
  const auto cloud = read_points_csv(path);
  return cloud.points;
}

/// One integer label per line.
inline void write_labels_csv(const std::string& path, const Labels& labels) {
  auto out = io_detail::open_out(path);
  for (int a : labels.assignments) out << a << '\n';
}

inline Labels read_labels_csv(const std::string& path) {
  const auto lines = io_detail::read_lines(path);
  std::vector<int> a;
  int k = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (io_detail::blank(lines[ln])) continue;
    const auto v = io_detail::parse_int(lines[ln]);
    if (!v || *v < 0) {
      if (a.empty() && !v) continue;  // header
      throw ParseError(path, ln + 1, "expected a nonnegative integer label");
    }
    a.push_back(static_cast<int>(*v));
    k = std::max(k, static_cast<int>(*v) + 1);
  }
  if (a.empty()) throw std::runtime_error(path + ": no labels");
  return Labels(std::move(a), k);
}

/// Generator name, parameters and seed as a JSON object.
inline nlohmann::json to_json(const GeneratorInfo& info) {
  nlohmann::json j;
  j["generator"] = info.name;
  j["params"] = info.params;
  j["seed"] = info.seed;
  return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = io_detail::open_out(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(in);
}

// ---------------------------------------------------------------- plans

inline std::string coo_header(Index n, double epsilon, bool hollow) {
  std::string h = "# n=" + std::to_string(n) + " eps=" + io_detail::format_double(epsilon) + " symmetric";
  if (hollow) h += " hollow";
  return h;
}

inline void write_plan_coo(std::ostream& out, const SparsePlan& plan, double epsilon) {
  out << coo_header(plan.n(), epsilon, true) << '\n';
  for (const auto& e : plan.entries()) {
    out << e.i << ',' << e.j << ',' << io_detail::format_double(e.value) << '\n';
  }
}

inline void write_plan_coo(const std::string& path, const SparsePlan& plan, double epsilon) {
  auto out = io_detail::open_out(path);
  write_plan_coo(out, plan, epsilon);
}

/// Upper triangle of the nonzeros. Non-hollow affinities also store i == j.
inline void write_affinity_coo(const std::string& path, const DenseAffinity& w, double parameter) {
  auto out = io_detail::open_out(path);
  const Index n = w.n();
  out << coo_header(n, parameter, w.hollow()) << '\n';
  for (Index i = 0; i < n; ++i) {
    for (Index j = w.hollow() ? i + 1 : i; j < n; ++j) {
      const double v = w.entries()(i, j);
      if (v != 0.0) out << i << ',' << j << ',' << io_detail::format_double(v) << '\n';
    }
  }
}

struct CooFile {
  Index n = 0;
  double epsilon = 0.0;
  bool hollow = true;
  std::vector<PlanEntry> entries;  // i <= j, sorted
};

inline CooFile read_coo(const std::string& path) {
  const auto lines = io_detail::read_lines(path);
  if (lines.empty()) throw std::runtime_error(path + ": empty file");
  CooFile f;
  {
    std::istringstream hs(lines[0]);
    std::string hash, tok;
    hs >> hash;
    bool have_n = false, have_eps = false, symmetric = false;
    f.hollow = false;
    while (hs >> tok) {
      if (tok.rfind("n=", 0) == 0) {
        const auto v = io_detail::parse_int(std::string_view(tok).substr(2));
        if (!v || *v < 0) throw ParseError(path, 1, "bad n in header");
        f.n = static_cast<Index>(*v);
        have_n = true;
      } else if (tok.rfind("eps=", 0) == 0) {
        const auto v = io_detail::parse_double(std::string_view(tok).substr(4));
        if (!v) throw ParseError(path, 1, "bad eps in header");
        f.epsilon = *v;
        have_eps = true;
      } else if (tok == "symmetric") {
        symmetric = true;
      } else if (tok == "hollow") {
        f.hollow = true;
      }
    }
    if (hash != "#" || !have_n || !have_eps || !symmetric) {
      throw ParseError(path, 1, "expected header '# n=<N> eps=<eps> symmetric [hollow]'");
    }
  }
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (io_detail::blank(lines[ln])) continue;
    const auto fields = io_detail::split(lines[ln]);
    if (fields.size() != 3) throw ParseError(path, ln + 1, "expected i,j,value");
    const auto i = io_detail::parse_int(fields[0]);
    const auto j = io_detail::parse_int(fields[1]);
    const auto v = io_detail::parse_double(fields[2]);
    if (!i || !j || !v) throw ParseError(path, ln + 1, "malformed triplet");
    if (*i < 0 || *j >= f.n) throw ParseError(path, ln + 1, "index outside [0, n)");
    if (f.hollow ? *j <= *i : *j < *i) {
      throw ParseError(path, ln + 1, f.hollow ? "expected i < j" : "expected i <= j");
    }
    if (!(*v > 0.0) || !std::isfinite(*v)) throw ParseError(path, ln + 1, "value must be finite and positive");
    PlanEntry e{static_cast<Index>(*i), static_cast<Index>(*j), *v};
    if (!f.entries.empty() && std::pair(f.entries.back().i, f.entries.back().j) >= std::pair(e.i, e.j)) {
      throw ParseError(path, ln + 1, "rows must be sorted by (i, j) without duplicates");
    }
    f.entries.push_back(e);
  }
  return f;
}

struct PlanFile {
  SparsePlan plan;
  double epsilon = 0.0;
};

inline PlanFile read_plan_coo(const std::string& path) {
  auto f = read_coo(path);
  if (!f.hollow) throw ParseError(path, 1, "plan file must be hollow");
  return {SparsePlan(f.n, std::move(f.entries)), f.epsilon};
}

/// Dense symmetric affinity from either kind of COO file.
inline DenseAffinity read_affinity_coo(const std::string& path) {
  const auto f = read_coo(path);
  Matrix w = Matrix::Zero(f.n, f.n);
  for (const auto& e : f.entries) {
    w(e.i, e.j) = e.value;
    w(e.j, e.i) = e.value;
  }
  return DenseAffinity(std::move(w), f.hollow);
}

// ---------------------------------------------------------------- potentials

inline void write_potential_csv(const std::string& path, const DualPotential& u) {
  auto out = io_detail::open_out(path);
  for (Index i = 0; i < u.size(); ++i) out << io_detail::format_double(u[i]) << '\n';
}

inline DualPotential read_potential_csv(const std::string& path) {
  const auto lines = io_detail::read_lines(path);
  std::vector<double> v;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (io_detail::blank(lines[ln])) continue;
    const auto x = io_detail::parse_double(lines[ln]);
    if (!x || !std::isfinite(*x)) throw ParseError(path, ln + 1, "expected one finite number");
    v.push_back(*x);
  }
  if (v.empty()) throw std::runtime_error(path + ": empty potential");
  return {Eigen::Map<Vector>(v.data(), static_cast<Index>(v.size()))};
}

// ---------------------------------------------------------------- records

inline nlohmann::json to_json(const SolveDiagnostics& d) {
  nlohmann::json j;
  j["newton_iters"] = d.newton_iters;
  j["final_row_violation"] = d.final_row_violation;
  j["dual_objective"] = d.dual_objective;
  j["line_search_backtracks"] = d.line_search_backtracks;
  j["support_size"] = d.support_size;
  j["outer_iters"] = d.outer_iters;
  j["converged"] = d.converged;
  j["residual_history"] = d.residual_history;
  j["objective_history"] = d.objective_history;
  j["cg_iterations"] = d.cg_iterations;
  j["cg_failures"] = d.cg_failures;
  return j;
}

inline void write_diagnostics_json(const std::string& path, const SolveDiagnostics& d) {
  write_json(path, to_json(d));
}

struct ExperimentRecord {
  std::string experiment;
  std::map<std::string, nlohmann::json> params;
  std::map<std::string, double> metrics;
  std::uint64_t seed = 0;
  double runtime_ms = 0.0;
  std::vector<std::string> artifact_paths;

  void validate() const {
    if (experiment.empty()) throw std::invalid_argument("experiment name must be nonempty");
    for (const auto& [k, v] : metrics) {
      if (!std::isfinite(v)) throw std::invalid_argument("metric '" + k + "' is not finite");
    }
  }
};

inline nlohmann::json to_json(const ExperimentRecord& r) {
  r.validate();
  nlohmann::json j;
  j["experiment"] = r.experiment;
  j["params"] = r.params;
  j["metrics"] = r.metrics;
  j["seed"] = r.seed;
  j["runtime_ms"] = r.runtime_ms;
  j["artifact_paths"] = r.artifact_paths;
  return j;
}

inline ExperimentRecord record_from_json(const nlohmann::json& j) {
  ExperimentRecord r;
  r.experiment = j.at("experiment").get<std::string>();
  for (const auto& [k, v] : j.at("params").items()) r.params[k] = v;
  r.metrics = j.at("metrics").get<std::map<std::string, double>>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.runtime_ms = j.at("runtime_ms").get<double>();
  r.artifact_paths = j.at("artifact_paths").get<std::vector<std::string>>();
  r.validate();
  return r;
}

inline void write_record_json(const std::string& path, const ExperimentRecord& r) { write_json(path, to_json(r)); }

inline ExperimentRecord read_record_json(const std::string& path) { return record_from_json(read_json(path)); }

/// Plain CSV table: header row then rows of preformatted cells.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  CsvTable& row() {
    rows_.emplace_back();
    return *this;
  }
  CsvTable& cell(const std::string& s) {
    rows_.back().push_back(s);
    return *this;
  }
  CsvTable& cell(double x) { return cell(io_detail::format_double(x)); }
  CsvTable& cell(long long x) { return cell(std::to_string(x)); }
  CsvTable& cell(int x) { return cell(std::to_string(x)); }
  CsvTable& cell(std::uint64_t x) { return cell(std::to_string(x)); }

  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  void write(std::ostream& out) const {
    for (std::size_t k = 0; k < columns_.size(); ++k) out << (k ? "," : "") << columns_[k];
    out << '\n';
    for (const auto& r : rows_) {
      if (r.size() != columns_.size()) throw std::logic_error("CSV row width mismatch");
      for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "," : "") << r[k];
      out << '\n';
    }
  }

  void write(const std::string& path) const {
    auto out = io_detail::open_out(path);
    write(out);
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace qrot
