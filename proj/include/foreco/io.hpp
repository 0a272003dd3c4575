#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "foreco/error.hpp"
#include "foreco/ls_reconciliation.hpp"
#include "foreco/series_tools.hpp"
#include "foreco/structures.hpp"

namespace foreco::io {

using Json = nlohmann::json;

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  if (v == 0.0) v = 0.0;  // drops the sign of negative zero
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  if (s == "NA" || s == "NaN" || s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "Inf" || s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-Inf" || s == "-inf") return -std::numeric_limits<double>::infinity();
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

struct CsvTable {
  Matrix values;
  std::vector<std::string> header;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      cur += c;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

/// Dense numeric CSV; a first row that does not parse as numbers is taken as a header.
inline CsvTable parse_csv(std::istream& in, const std::string& name) {
  CsvTable t;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    std::vector<double> row;
    bool numeric = true;
    for (const auto& c : cells) {
      const auto v = parse_double(c);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && t.header.empty()) {
        for (auto c : cells) {
          c.erase(std::remove(c.begin(), c.end(), '"'), c.end());
          t.header.push_back(c);
        }
        continue;
      }
      throw ValidationError(name + ": line " + std::to_string(lineno) + " has a non-numeric value");
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ValidationError(name + ": line " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                            " values, expected " + std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(name + ": no numeric rows");
  if (!t.header.empty() && t.header.size() != rows.front().size())
    throw ValidationError(name + ": header has " + std::to_string(t.header.size()) + " fields, data has " +
                          std::to_string(rows.front().size()));
  t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) t.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path);
  return parse_csv(in, path);
}

inline Matrix read_matrix(const std::string& path) { return read_csv(path).values; }

inline void write_csv(std::ostream& out, const Matrix& m, const std::vector<std::string>& header = {}) {
  if (!header.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
  }
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const Matrix& m, const std::vector<std::string>& header = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  write_csv(out, m, header);
  if (!out) throw ValidationError("failed writing " + path);
}

/// Column names `k<order>_<j>` of the forecast layout.
inline std::vector<std::string> forecast_header(const Layout& layout) {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < layout.orders.size(); ++l)
    for (Index j = 0; j < layout.level_width(l); ++j)
      out.push_back("k" + std::to_string(layout.orders[l]) + "_" + std::to_string(j + 1));
  return out;
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError(path + ": invalid JSON (" + e.what() + ")");
  }
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Structures as {labels, agg_mat, orders, tew}

inline Json structure_to_json(const CrossTemporalStructure& s) {
  Json j;
  j["labels"] = s.cs().labels();
  Json rows = Json::array();
  const Matrix& A = s.cs().agg_mat();
  for (Index r = 0; r < A.rows(); ++r) {
    std::vector<double> row;
    for (Index c = 0; c < A.cols(); ++c) row.push_back(A(r, c));
    rows.push_back(row);
  }
  j["agg_mat"] = rows;
  j["orders"] = s.te().orders();
  j["tew"] = to_string(s.te().tew());
  j["framework"] = to_string(s.framework());
  return j;
}

inline CrossTemporalStructure structure_from_json(const Json& j, const std::string& name = "structure") {
  try {
    std::optional<CrossSectionalStructure> cs;
    if (j.contains("agg_mat") && !j.at("agg_mat").empty()) {
      const auto rows = j.at("agg_mat").get<std::vector<std::vector<double>>>();
      Matrix A(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size()) throw ValidationError(name + ": agg_mat rows differ in length");
        for (std::size_t c = 0; c < rows[r].size(); ++c) A(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
      }
      std::vector<std::string> labels;
      if (j.contains("labels")) labels = j.at("labels").get<std::vector<std::string>>();
      cs = CrossSectionalStructure::from_agg(A, labels);
    }
    std::optional<TemporalStructure> te;
    if (j.contains("orders") && !j.at("orders").empty()) {
      const Tew tew = j.contains("tew") ? parse_tew(j.at("tew").get<std::string>()) : Tew::Sum;
      te = TemporalStructure::from_orders(j.at("orders").get<std::vector<int>>(), tew);
      if (te->m() == 1) te.reset();
    }
    if (cs && te) return CrossTemporalStructure::cross_temporal(*cs, *te);
    if (cs) return CrossTemporalStructure::cross_sectional(*cs);
    if (te) return CrossTemporalStructure::temporal(*te);
    throw ValidationError(name + ": needs agg_mat, orders or both");
  } catch (const Json::exception& e) {
    throw ValidationError(name + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Immutable cells and bounds: series, order, step[, lower, upper], 1-based,
// step 0 meaning every step of that order.

inline Cell cell_from_row(const Eigen::Ref<const Eigen::RowVectorXd>& r, const std::string& name, Index line) {
  for (Index c = 0; c < 3; ++c)
    if (!std::isfinite(r(c)) || r(c) != std::floor(r(c)))
      throw ValidationError(name + ": row " + std::to_string(line) + " needs integer series, order and step");
  if (r(0) < 1 || r(1) < 1 || r(2) < 0)
    throw ValidationError(name + ": row " + std::to_string(line) + " has an out-of-range series, order or step");
  return Cell{static_cast<Index>(r(0)) - 1, static_cast<int>(r(1)), static_cast<Index>(r(2)) - 1};
}

inline std::vector<Cell> read_cells(const std::string& path) {
  const Matrix m = read_matrix(path);
  if (m.cols() < 2 || m.cols() > 3) throw ValidationError(path + ": expected columns series, order[, step]");
  std::vector<Cell> out;
  for (Index r = 0; r < m.rows(); ++r) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(3);
    row.head(m.cols()) = m.row(r);
    if (m.cols() == 2) row(2) = 0;
    out.push_back(cell_from_row(row, path, r + 1));
  }
  return out;
}

inline std::vector<Bound> read_bounds(const std::string& path) {
  const Matrix m = read_matrix(path);
  if (m.cols() != 5) throw ValidationError(path + ": expected columns series, order, step, lower, upper");
  std::vector<Bound> out;
  for (Index r = 0; r < m.rows(); ++r) {
    Bound b;
    b.cell = cell_from_row(m.row(r), path, r + 1);
    b.lower = std::isnan(m(r, 3)) ? -std::numeric_limits<double>::infinity() : m(r, 3);
    b.upper = std::isnan(m(r, 4)) ? std::numeric_limits<double>::infinity() : m(r, 4);
    out.push_back(b);
  }
  return out;
}

}  // namespace foreco::io
