#ifndef IQALS_REPORT_HPP
#define IQALS_REPORT_HPP

// Strategy x test-set accuracy grids in delimited (CSV) and markdown form.
// Both renderings print four decimals, and both parse back to the same grid.

#include <array>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "iqals/dataset.hpp"
#include "iqals/error.hpp"
#include "iqals/trainer.hpp"

namespace iqals {

struct GridRow {
  int strategy = 0;
  std::string regularization;
  std::string training_set;
  std::array<double, 10> accuracy{};  // kTestSetNames order
};

struct Grid {
  std::vector<std::string> provenance;
  std::vector<GridRow> rows;

  std::size_t cell_count() const { return rows.size() * kTestSetNames.size(); }
};

inline GridRow grid_row(const EvalReport& r) {
  const auto s = Strategy::from_id(r.strategy);
  GridRow row{s.id(), std::string(to_string(s.regularization())),
              std::string(to_string(s.training_set())), {}};
  for (std::size_t i = 0; i < kTestSetNames.size(); ++i) {
    const auto it = r.accuracy.find(kTestSetNames[i]);
    if (it == r.accuracy.end()) {
      throw DataError("evaluation of strategy " + std::to_string(r.strategy) + " lacks set " +
                      kTestSetNames[i]);
    }
    row.accuracy[i] = it->second;
  }
  return row;
}

namespace detail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline GridRow parse_row(const std::vector<std::string>& cells, std::string_view format) {
  if (cells.size() != 3 + kTestSetNames.size()) {
    throw DataError(std::string(format) + " grid row has " + std::to_string(cells.size()) +
                    " cells, expected 13");
  }
  GridRow row;
  row.strategy = std::stoi(trim(cells[0]));
  row.regularization = trim(cells[1]);
  row.training_set = trim(cells[2]);
  for (std::size_t i = 0; i < kTestSetNames.size(); ++i) row.accuracy[i] = std::stod(trim(cells[3 + i]));
  return row;
}

}  // namespace detail

inline std::string to_delimited(const Grid& g) {
  std::string out;
  for (const auto& p : g.provenance) out += "# " + p + "\n";
  out += "strategy,regularization,training_set";
  for (const auto& name : kTestSetNames) out += "," + name;
  out += "\n";
  for (const auto& r : g.rows) {
    out += std::to_string(r.strategy) + "," + r.regularization + "," + r.training_set;
    for (double a : r.accuracy) out += "," + detail::fixed4(a);
    out += "\n";
  }
  return out;
}

inline std::string to_markdown(const Grid& g) {
  std::string out;
  for (const auto& p : g.provenance) out += "<!-- " + p + " -->\n";
  out += "| Strategy | Regularization | Training set |";
  for (const auto& name : kTestSetNames) out += " " + name + " |";
  out += "\n|---|---|---|";
  for (std::size_t i = 0; i < kTestSetNames.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& r : g.rows) {
    out += "| " + std::to_string(r.strategy) + " | " + r.regularization + " | " + r.training_set + " |";
    for (double a : r.accuracy) out += " " + detail::fixed4(a) + " |";
    out += "\n";
  }
  return out;
}

inline Grid parse_delimited(std::string_view text) {
  Grid g;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.starts_with("# ")) {
      g.provenance.push_back(line.substr(2));
    } else if (!header) {
      header = true;
    } else {
      g.rows.push_back(detail::parse_row(detail::split(line, ','), "delimited"));
    }
  }
  return g;
}

inline Grid parse_markdown(std::string_view text) {
  Grid g;
  std::istringstream in{std::string(text)};
  std::string line;
  int table_line = 0;
  while (std::getline(in, line)) {
    if (line.starts_with("<!-- ") && line.ends_with(" -->")) {
      g.provenance.push_back(line.substr(5, line.size() - 9));
      continue;
    }
    if (!line.starts_with("|")) continue;
    if (table_line++ < 2) continue;  // header and separator
    auto cells = detail::split(std::string_view(line).substr(1, line.size() - 2), '|');
    g.rows.push_back(detail::parse_row(cells, "markdown"));
  }
  return g;
}

}  // namespace iqals

#endif  // IQALS_REPORT_HPP
