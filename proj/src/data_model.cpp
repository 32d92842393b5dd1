#include "auxeff/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace auxeff {

Stratum stratum_from_pair(int s0, int s1) {
  if ((s0 != 0 && s0 != 1) || (s1 != 0 && s1 != 1))
    throw ValidationError("stratum_from_pair: s0/s1 must be 0 or 1");
  if (s0 == 0 && s1 == 0) return Stratum::Immune;
  if (s0 == 1 && s1 == 0) return Stratum::TreatPrevented;
  if (s0 == 0 && s1 == 1) return Stratum::TreatCaused;
  return Stratum::Doomed;
}

std::pair<int, int> stratum_to_pair(Stratum k) {
  switch (k) {
    case Stratum::Immune: return {0, 0};
    case Stratum::TreatPrevented: return {1, 0};
    case Stratum::TreatCaused: return {0, 1};
    case Stratum::Doomed: return {1, 1};
  }
  throw ValidationError("stratum_to_pair: invalid stratum");
}

const char* stratum_name(Stratum k) {
  switch (k) {
    case Stratum::Immune: return "immune";
    case Stratum::TreatPrevented: return "treat_prevented";
    case Stratum::TreatCaused: return "treat_caused";
    case Stratum::Doomed: return "doomed";
  }
  return "?";
}

Eigen::MatrixXd ObservedDataset::x_matrix() const {
  Eigen::MatrixXd X(n(), n_x());
  for (std::size_t i = 0; i < n(); ++i) X.row(i) = units[i].x.transpose();
  return X;
}

Eigen::VectorXd ObservedDataset::a_vector() const {
  Eigen::VectorXd v(n());
  for (std::size_t i = 0; i < n(); ++i) v[i] = units[i].a;
  return v;
}

Eigen::VectorXd ObservedDataset::s_vector() const {
  Eigen::VectorXd v(n());
  for (std::size_t i = 0; i < n(); ++i) v[i] = units[i].s;
  return v;
}

Eigen::VectorXd ObservedDataset::y_vector() const {
  Eigen::VectorXd v(n());
  for (std::size_t i = 0; i < n(); ++i) v[i] = units[i].y;
  return v;
}

Eigen::MatrixXd CompleteDataset::x_matrix() const {
  Eigen::MatrixXd X(n(), x_names.size());
  for (std::size_t i = 0; i < n(); ++i) X.row(i) = units[i].x.transpose();
  return X;
}

namespace {

std::string row_msg(std::size_t row, const std::string& what) {
  return "row " + std::to_string(row) + ": " + what;
}

void check_binary(int v, std::size_t row, const char* name) {
  if (v != 0 && v != 1)
    throw ValidationError(row_msg(row, std::string(name) + " must be 0 or 1, got " + std::to_string(v)));
}

void check_finite(double v, std::size_t row, const std::string& name) {
  if (!std::isfinite(v)) throw ValidationError(row_msg(row, name + " is not finite"));
}

}  // namespace

void ObservedDataset::validate() const {
  for (std::size_t i = 0; i < n(); ++i) {
    const auto& u = units[i];
    std::size_t row = i + 1;
    check_binary(u.a, row, "a");
    check_binary(u.s, row, "s");
    check_finite(u.y, row, "y");
    if (static_cast<std::size_t>(u.x.size()) != n_x())
      throw ValidationError(row_msg(row, "x has wrong length"));
    for (int j = 0; j < u.x.size(); ++j) check_finite(u.x[j], row, x_names[j]);
  }
}

void CompleteDataset::validate() const {
  for (std::size_t i = 0; i < n(); ++i) {
    const auto& u = units[i];
    std::size_t row = i + 1;
    check_binary(u.s0, row, "s0");
    check_binary(u.s1, row, "s1");
    check_finite(u.y0, row, "y0");
    check_finite(u.y1, row, "y1");
    if (static_cast<std::size_t>(u.x.size()) != x_names.size())
      throw ValidationError(row_msg(row, "x has wrong length"));
    for (int j = 0; j < u.x.size(); ++j) check_finite(u.x[j], row, x_names[j]);
  }
}

void SurvivalDataset::validate() const {
  for (std::size_t i = 0; i < n(); ++i) {
    const auto& u = units[i];
    std::size_t row = i + 1;
    check_binary(u.a, row, "a");
    check_binary(u.s, row, "s");
    check_finite(u.time, row, "time");
    if (u.time <= 0.0) throw ValidationError(row_msg(row, "time must be positive"));
    check_finite(u.censor_horizon, row, "censor_horizon");
    if (u.censor_horizon <= 0.0)
      throw ValidationError(row_msg(row, "censor_horizon must be positive"));
    if (static_cast<std::size_t>(u.x.size()) != x_names.size())
      throw ValidationError(row_msg(row, "x has wrong length"));
    for (int j = 0; j < u.x.size(); ++j) check_finite(u.x[j], row, x_names[j]);
  }
  for (const auto& col : aux_cols)
    if (col.size() != n()) throw ValidationError("auxiliary column length mismatch");
  for (std::size_t c = 0; c < aux_cols.size(); ++c)
    for (std::size_t i = 0; i < aux_cols[c].size(); ++i)
      check_binary(aux_cols[c][i], i + 1, aux_names[c].c_str());
}

std::vector<int> SurvivalDataset::aux_column(const std::string& name) const {
  if (name == "s") {
    std::vector<int> out(n());
    for (std::size_t i = 0; i < n(); ++i) out[i] = units[i].s;
    return out;
  }
  for (std::size_t c = 0; c < aux_names.size(); ++c)
    if (aux_names[c] == name) return aux_cols[c];
  throw ValidationError("unknown auxiliary column '" + name + "'");
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  t.header = split_csv_line(line);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw ValidationError(row_msg(row, "expected " + std::to_string(t.header.size()) +
                                             " fields, got " + std::to_string(cells.size())));
    std::vector<double> vals(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string& c = cells[j];
      double v = 0.0;
      auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || p != c.data() + c.size())
        throw ValidationError(row_msg(row, "cannot parse '" + c + "' in column '" + t.header[j] + "'"));
      vals[j] = v;
    }
    t.rows.push_back(std::move(vals));
  }
  return t;
}

int as_int(double v, std::size_t row, const std::string& name) {
  if (v != std::floor(v))
    throw ValidationError(row_msg(row, name + " must be an integer"));
  return static_cast<int>(v);
}

int find_col(const CsvTable& t, const std::string& name) {
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (t.header[j] == name) return static_cast<int>(j);
  return -1;
}

int require_col(const CsvTable& t, const std::string& name, const std::string& path) {
  int j = find_col(t, name);
  if (j < 0) throw ValidationError("'" + path + "': missing required column '" + name + "'");
  return j;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ObservedDataset load_observed_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int ja = require_col(t, "a", path);
  int js = require_col(t, "s", path);
  int jy = require_col(t, "y", path);
  ObservedDataset d;
  std::vector<int> jx;
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (static_cast<int>(j) != ja && static_cast<int>(j) != js && static_cast<int>(j) != jy) {
      jx.push_back(static_cast<int>(j));
      d.x_names.push_back(t.header[j]);
    }
  d.units.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    ObservedUnit u;
    u.a = as_int(r[ja], i + 1, "a");
    u.s = as_int(r[js], i + 1, "s");
    u.y = r[jy];
    u.x.resize(jx.size());
    for (std::size_t k = 0; k < jx.size(); ++k) u.x[k] = r[jx[k]];
    d.units.push_back(std::move(u));
  }
  d.validate();
  return d;
}

CompleteDataset load_complete_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int j0 = require_col(t, "s0", path);
  int j1 = require_col(t, "s1", path);
  int jy0 = require_col(t, "y0", path);
  int jy1 = require_col(t, "y1", path);
  CompleteDataset d;
  std::vector<int> jx;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    int ji = static_cast<int>(j);
    if (ji != j0 && ji != j1 && ji != jy0 && ji != jy1) {
      jx.push_back(ji);
      d.x_names.push_back(t.header[j]);
    }
  }
  d.units.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    CompleteUnit u;
    u.s0 = as_int(r[j0], i + 1, "s0");
    u.s1 = as_int(r[j1], i + 1, "s1");
    u.y0 = r[jy0];
    u.y1 = r[jy1];
    u.x.resize(jx.size());
    for (std::size_t k = 0; k < jx.size(); ++k) u.x[k] = r[jx[k]];
    d.units.push_back(std::move(u));
  }
  d.validate();
  return d;
}

SurvivalDataset load_survival_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int ja = require_col(t, "a", path);
  int js = require_col(t, "s", path);
  int jt = require_col(t, "time", path);
  int je = require_col(t, "event", path);
  int jc = require_col(t, "censor_horizon", path);
  SurvivalDataset d;
  std::vector<int> jx, jaux;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    int ji = static_cast<int>(j);
    if (ji == ja || ji == js || ji == jt || ji == je || ji == jc) continue;
    if (t.header[j].rfind("s_", 0) == 0) {
      jaux.push_back(ji);
      d.aux_names.push_back(t.header[j]);
    } else {
      jx.push_back(ji);
      d.x_names.push_back(t.header[j]);
    }
  }
  d.aux_cols.resize(jaux.size());
  d.units.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    SurvivalUnit u;
    u.a = as_int(r[ja], i + 1, "a");
    u.s = as_int(r[js], i + 1, "s");
    u.time = r[jt];
    int ev = as_int(r[je], i + 1, "event");
    if (ev < 0 || ev > 2)
      throw ValidationError(row_msg(i + 1, "event must be 0 (admin), 1 (main) or 2 (competing)"));
    u.event = static_cast<EventType>(ev);
    u.censor_horizon = r[jc];
    u.x.resize(jx.size());
    for (std::size_t k = 0; k < jx.size(); ++k) u.x[k] = r[jx[k]];
    d.units.push_back(std::move(u));
    for (std::size_t k = 0; k < jaux.size(); ++k)
      d.aux_cols[k].push_back(as_int(r[jaux[k]], i + 1, d.aux_names[k]));
  }
  d.validate();
  return d;
}

void write_observed_csv(const ObservedDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  for (const auto& nm : d.x_names) out << nm << ",";
  out << "a,s,y\n";
  for (const auto& u : d.units) {
    for (int j = 0; j < u.x.size(); ++j) out << fmt(u.x[j]) << ",";
    out << u.a << "," << u.s << "," << fmt(u.y) << "\n";
  }
}

void write_complete_csv(const CompleteDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  for (const auto& nm : d.x_names) out << nm << ",";
  out << "s0,s1,y0,y1\n";
  for (const auto& u : d.units) {
    for (int j = 0; j < u.x.size(); ++j) out << fmt(u.x[j]) << ",";
    out << u.s0 << "," << u.s1 << "," << fmt(u.y0) << "," << fmt(u.y1) << "\n";
  }
}

void write_survival_csv(const SurvivalDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  for (const auto& nm : d.x_names) out << nm << ",";
  out << "a,s,time,event,censor_horizon";
  for (const auto& nm : d.aux_names) out << "," << nm;
  out << "\n";
  for (std::size_t i = 0; i < d.units.size(); ++i) {
    const auto& u = d.units[i];
    for (int j = 0; j < u.x.size(); ++j) out << fmt(u.x[j]) << ",";
    out << u.a << "," << u.s << "," << fmt(u.time) << "," << static_cast<int>(u.event) << ","
        << fmt(u.censor_horizon);
    for (const auto& col : d.aux_cols) out << "," << col[i];
    out << "\n";
  }
}

}  // namespace auxeff
