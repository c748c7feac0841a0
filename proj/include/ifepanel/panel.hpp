#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ifepanel/errors.hpp"
#include "ifepanel/linalg.hpp"

namespace ifepanel {

// Balanced N x T panel: outcomes Y plus K regressor matrices, each stored with
// unit time series contiguous (row-major) for the per-unit spectral sums.
struct Panel {
  PanelMat y;                        // N x T
  std::vector<PanelMat> x;           // K matrices, N x T each
  std::vector<std::string> unit_labels;
  std::vector<double> time_labels;   // strictly increasing

  int n_units() const { return static_cast<int>(y.rows()); }
  int n_periods() const { return static_cast<int>(y.cols()); }
  int n_regressors() const { return static_cast<int>(x.size()); }

  void validate_shape() const {
    int n = n_units(), t = n_periods();
    if (n < 1 || t < 1) throw panel_error("panel must have N >= 1 and T >= 1");
    for (const auto& xk : x)
      if (xk.rows() != n || xk.cols() != t)
        throw panel_error("regressor matrix shape does not match outcomes");
    if (!unit_labels.empty() && static_cast<int>(unit_labels.size()) != n)
      throw panel_error("unit label count mismatch");
    if (!time_labels.empty()) {
      if (static_cast<int>(time_labels.size()) != t)
        throw panel_error("time label count mismatch");
      for (size_t j = 1; j < time_labels.size(); ++j)
        if (!(time_labels[j] > time_labels[j - 1]))
          throw panel_error("time labels must be strictly increasing");
    }
    if (!y.allFinite()) throw panel_error("non-finite outcome value");
    for (const auto& xk : x)
      if (!xk.allFinite()) throw panel_error("non-finite regressor value");
  }

  static Panel make(PanelMat y, std::vector<PanelMat> x = {}) {
    Panel p;
    p.y = std::move(y);
    p.x = std::move(x);
    p.unit_labels.resize(p.n_units());
    for (int i = 0; i < p.n_units(); ++i) p.unit_labels[i] = "u" + std::to_string(i + 1);
    p.time_labels.resize(p.n_periods());
    for (int t = 0; t < p.n_periods(); ++t) p.time_labels[t] = t + 1;
    p.validate_shape();
    return p;
  }
};

struct PanelDiagnostics {
  double noncolinearity_min_eigenvalue = 0.0;
  VectorXd noncolinearity_eigenvalues;            // ascending
  std::vector<bool> within_unit_variation;        // per regressor
  std::vector<bool> within_period_variation;      // per regressor
  std::vector<bool> degenerate_regressor;         // flagged by the eigen check
  double outcome_min = 0.0, outcome_max = 0.0;
  bool outcome_binary = false;
  bool outcome_counts = false;                    // non-negative integers
};

struct CsvSchema {
  std::string unit = "unit";
  std::string time = "time";
  std::string outcome = "y";
  std::vector<std::string> regressors;  // empty: every x1..xK style leftover column, in header order
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim whitespace and CR
    size_t a = field.find_first_not_of(" \t\r");
    size_t b = field.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_number(const std::string& s, size_t row, const std::string& col) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw panel_error("row " + std::to_string(row) + ": non-numeric value '" + s +
                      "' in column '" + col + "'");
  }
}

}  // namespace detail

// Long-format CSV: header row, columns unit,time,y,x1..xK (names overridable
// via the schema).  Fails on any missing or duplicated (unit,time) cell.
inline Panel load_panel(std::istream& in, const CsvSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw panel_error("empty input");
  std::vector<std::string> header = detail::split_csv_line(line);

  auto col_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw panel_error("missing column '" + name + "'");
    return static_cast<int>(it - header.begin());
  };
  int ci_unit = col_index(schema.unit);
  int ci_time = col_index(schema.time);
  int ci_y = col_index(schema.outcome);

  std::vector<int> ci_x;
  std::vector<std::string> x_names;
  if (!schema.regressors.empty()) {
    for (const auto& name : schema.regressors) {
      ci_x.push_back(col_index(name));
      x_names.push_back(name);
    }
  } else {
    for (int j = 0; j < static_cast<int>(header.size()); ++j) {
      if (j == ci_unit || j == ci_time || j == ci_y) continue;
      ci_x.push_back(j);
      x_names.push_back(header[j]);
    }
  }
  const int K = static_cast<int>(ci_x.size());

  struct Row {
    std::string unit;
    double time;
    double y;
    std::vector<double> x;
  };
  std::vector<Row> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw panel_error("row " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    Row r;
    r.unit = fields[ci_unit];
    r.time = detail::parse_number(fields[ci_time], lineno, schema.time);
    r.y = detail::parse_number(fields[ci_y], lineno, schema.outcome);
    r.x.resize(K);
    for (int k = 0; k < K; ++k)
      r.x[k] = detail::parse_number(fields[ci_x[k]], lineno, x_names[k]);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw panel_error("no data rows");

  std::set<std::string> unit_set;
  std::set<double> time_set;
  for (const auto& r : rows) {
    unit_set.insert(r.unit);
    time_set.insert(r.time);
  }
  std::vector<std::string> units(unit_set.begin(), unit_set.end());
  std::vector<double> times(time_set.begin(), time_set.end());
  const int N = static_cast<int>(units.size());
  const int T = static_cast<int>(times.size());

  std::map<std::string, int> unit_of;
  for (int i = 0; i < N; ++i) unit_of[units[i]] = i;
  std::map<double, int> period_of;
  for (int t = 0; t < T; ++t) period_of[times[t]] = t;

  Panel p;
  p.y = PanelMat::Zero(N, T);
  p.x.assign(K, PanelMat::Zero(N, T));
  p.unit_labels = units;
  p.time_labels = times;
  std::vector<char> seen(static_cast<size_t>(N) * T, 0);
  for (const auto& r : rows) {
    int i = unit_of[r.unit];
    int t = period_of[r.time];
    size_t cell = static_cast<size_t>(i) * T + t;
    if (seen[cell]) {
      std::ostringstream msg;
      msg << "duplicate cell (" << r.unit << ", " << r.time << ")";
      throw panel_error(msg.str());
    }
    seen[cell] = 1;
    p.y(i, t) = r.y;
    for (int k = 0; k < K; ++k) p.x[k](i, t) = r.x[k];
  }
  for (int i = 0; i < N; ++i)
    for (int t = 0; t < T; ++t)
      if (!seen[static_cast<size_t>(i) * T + t]) {
        std::ostringstream msg;
        msg << "unbalanced panel: missing cell (" << units[i] << ", " << times[t] << ")";
        throw panel_error(msg.str());
      }
  p.validate_shape();
  return p;
}

inline Panel load_panel_file(const std::string& path, const CsvSchema& schema = {});

// Restriction to a unit subset and a contiguous period range [t_begin, t_end).
inline Panel subpanel(const Panel& p, const std::vector<int>& units, int t_begin, int t_end) {
  if (units.empty()) throw argument_error("subpanel: empty unit selection");
  if (t_begin < 0 || t_end > p.n_periods() || t_begin >= t_end)
    throw argument_error("subpanel: bad period range");
  for (int i : units)
    if (i < 0 || i >= p.n_units()) throw argument_error("subpanel: unit index out of range");
  const int n = static_cast<int>(units.size());
  const int t = t_end - t_begin;
  Panel out;
  out.y = PanelMat::Zero(n, t);
  out.x.assign(p.x.size(), PanelMat::Zero(n, t));
  for (int r = 0; r < n; ++r) {
    out.y.row(r) = p.y.row(units[r]).segment(t_begin, t);
    for (size_t k = 0; k < p.x.size(); ++k)
      out.x[k].row(r) = p.x[k].row(units[r]).segment(t_begin, t);
    out.unit_labels.push_back(p.unit_labels[units[r]]);
  }
  out.time_labels.assign(p.time_labels.begin() + t_begin, p.time_labels.begin() + t_end);
  out.validate_shape();
  return out;
}

inline std::vector<int> all_units(const Panel& p) {
  std::vector<int> u(p.n_units());
  for (int i = 0; i < p.n_units(); ++i) u[i] = i;
  return u;
}

// D(gamma) of the generalized-noncolinearity condition: the K x K matrix
// D_{k1 k2} = Tr(M_alpha X_{k1} M_gamma X_{k2}') / (NT) with coprojections
// M_v = I - v (v'v)^{-1} v'.
inline PanelDiagnostics noncolinearity_diagnostic(const Panel& p, const VectorXd& alpha,
                                                  const VectorXd& gamma) {
  const int K = p.n_regressors();
  if (K < 1) throw argument_error("noncolinearity diagnostic needs K >= 1 regressors");
  if (alpha.size() != p.n_units() || gamma.size() != p.n_periods())
    throw argument_error("noncolinearity diagnostic: vector length mismatch");
  double na = alpha.squaredNorm(), ng = gamma.squaredNorm();
  if (na <= 0.0 || ng <= 0.0) throw argument_error("noncolinearity diagnostic: zero vector");

  const double nt = static_cast<double>(p.n_units()) * p.n_periods();
  // M_alpha X M_gamma computed without materializing the projectors
  std::vector<MatrixXd> proj(K);
  for (int k = 0; k < K; ++k) {
    MatrixXd m = p.x[k];
    m -= alpha * (alpha.transpose() * m) / na;
    m -= (m * gamma) * gamma.transpose() / ng;
    proj[k] = m;
  }
  MatrixXd d(K, K);
  for (int k1 = 0; k1 < K; ++k1)
    for (int k2 = k1; k2 < K; ++k2) {
      // M projectors are idempotent, so Tr(M X1 M X2') = <M X1 M, M X2 M>_F
      double v = (proj[k1].array() * proj[k2].array()).sum() / nt;
      d(k1, k2) = v;
      d(k2, k1) = v;
    }

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(d);
  PanelDiagnostics out;
  out.noncolinearity_eigenvalues = es.eigenvalues();
  out.noncolinearity_min_eigenvalue = es.eigenvalues().minCoeff();
  out.degenerate_regressor.assign(K, false);
  for (int k = 0; k < K; ++k)
    out.degenerate_regressor[k] = proj[k].norm() * proj[k].norm() / nt < 1e-12;
  return out;
}

// Variation flags and outcome support summary.
inline PanelDiagnostics validate(const Panel& p) {
  PanelDiagnostics d;
  const int K = p.n_regressors();
  d.within_unit_variation.assign(K, false);
  d.within_period_variation.assign(K, false);
  for (int k = 0; k < K; ++k) {
    const PanelMat& xk = p.x[k];
    for (int i = 0; i < p.n_units() && !d.within_unit_variation[k]; ++i)
      if ((xk.row(i).array() != xk(i, 0)).any()) d.within_unit_variation[k] = true;
    for (int t = 0; t < p.n_periods() && !d.within_period_variation[k]; ++t)
      if ((xk.col(t).array() != xk(0, t)).any()) d.within_period_variation[k] = true;
  }
  d.outcome_min = p.y.minCoeff();
  d.outcome_max = p.y.maxCoeff();
  d.outcome_binary = ((p.y.array() == 0.0) || (p.y.array() == 1.0)).all();
  d.outcome_counts = (p.y.array() >= 0.0).all() &&
                     ((p.y.array() - p.y.array().round()).abs() < 1e-9).all();
  return d;
}

}  // namespace ifepanel
