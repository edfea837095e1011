// Licensed under the Apache License 2.0 (see LICENSE file).

#include "data/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "common/errors.hpp"

namespace neuralsurv::data {
namespace {

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), issp));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), issp).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool is_missing(const std::string& cell) {
  std::string lower = cell;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower.empty() || lower == "na" || lower == "nan" || lower == "null";
}

// NaN for missing cells; throws on garbage.
double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
  if (is_missing(cell)) return std::numeric_limits<double>::quiet_NaN();
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0' || errno == ERANGE)
    throw InputError("line " + std::to_string(line_no) + ", column '" + column + "': non-numeric value '" + cell +
                     "'");
  return v;
}

}  // namespace

std::vector<std::string> parse_feature_list(const std::string& list) {
  if (list.empty() || list == "rest") return {};
  std::vector<std::string> out;
  for (auto& c : split_line(list))
    if (!c.empty()) out.push_back(c);
  return out;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path + "' has no header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  const auto column_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError("missing column '" + name + "' in '" + path + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t tcol = column_of(schema.time_col);
  const std::size_t ecol = column_of(schema.event_col);
  std::vector<std::string> features = schema.feature_cols;
  if (features.empty())
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != tcol && c != ecol) features.push_back(header[c]);
  std::vector<std::size_t> fcols;
  for (const auto& f : features) fcols.push_back(column_of(f));

  std::vector<double> times;
  std::vector<int> events;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " cells, found " + std::to_string(cells.size()));
    const double t = parse_cell(cells[tcol], line_no, schema.time_col);
    const double e = parse_cell(cells[ecol], line_no, schema.event_col);
    std::vector<double> x;
    bool missing = std::isnan(t) || std::isnan(e);
    for (std::size_t j = 0; j < fcols.size(); ++j) {
      x.push_back(parse_cell(cells[fcols[j]], line_no, features[j]));
      missing = missing || std::isnan(x.back());
    }
    if (missing) continue;
    if (e != 0.0 && e != 1.0)
      throw InputError("line " + std::to_string(line_no) + ": event flag must be 0 or 1");
    if (!(t > 0.0))
      throw InputError("line " + std::to_string(line_no) + ": observed time must be > 0 (zero-duration rows are rejected)");
    times.push_back(t);
    events.push_back(static_cast<int>(e));
    rows.push_back(std::move(x));
  }
  if (times.empty()) throw InputError("'" + path + "' has no complete rows");

  Dataset ds;
  ds.feature_names = features;
  ds.time = std::move(times);
  ds.event = std::move(events);
  ds.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < features.size(); ++j)
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << schema.time_col << ',' << schema.event_col;
  for (std::size_t j = 0; j < ds.covariate_count(); ++j)
    out << ',' << (j < ds.feature_names.size() ? ds.feature_names[j] : "x" + std::to_string(j + 1));
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.time[i] << ',' << ds.event[i];
    for (std::size_t j = 0; j < ds.covariate_count(); ++j)
      out << ',' << ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    out << '\n';
  }
  if (!out) throw InputError("failed writing '" + path + "'");
}

}  // namespace neuralsurv::data
