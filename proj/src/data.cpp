#include "bscen/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "bscen/errors.hpp"

namespace bscen {

TransformCode transform_code_from_int(int code) {
  if (code < 0 || code > 3) {
    throw InputError("transform code must be 0, 1, 2 or 3 (got " + std::to_string(code) + ")");
  }
  return static_cast<TransformCode>(code);
}

bool is_differenced(TransformCode code) {
  return code == TransformCode::AnnLogDiff || code == TransformCode::LogDiff;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

int parse_int(std::string_view s, std::string_view context) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InputError("cannot parse date '" + std::string(context) + "'");
  }
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.emplace_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == ".";
}

}  // namespace

Quarter Quarter::parse(std::string_view text) {
  text = trim(text);
  if (const auto qpos = text.find_first_of("Qq"); qpos != std::string_view::npos) {
    Quarter q{parse_int(text.substr(0, qpos), text), parse_int(text.substr(qpos + 1), text)};
    if (q.quarter < 1 || q.quarter > 4) throw InputError("quarter out of range in '" + std::string(text) + "'");
    return q;
  }
  // ISO date: YYYY-MM or YYYY-MM-DD
  const auto dash = text.find('-');
  if (dash == std::string_view::npos) throw InputError("cannot parse date '" + std::string(text) + "'");
  const int year = parse_int(text.substr(0, dash), text);
  auto rest = text.substr(dash + 1);
  const auto dash2 = rest.find('-');
  const int month = parse_int(rest.substr(0, dash2), text);
  if (month < 1 || month > 12) throw InputError("month out of range in '" + std::string(text) + "'");
  return Quarter{year, (month - 1) / 3 + 1};
}

Quarter Quarter::next() const {
  return quarter == 4 ? Quarter{year + 1, 1} : Quarter{year, quarter + 1};
}

std::string Quarter::str() const { return std::to_string(year) + "Q" + std::to_string(quarter); }

Eigen::VectorXd Panel::lag_stack(Eigen::Index t) const {
  const Eigen::Index n_vars = n();
  Eigen::VectorXd out(n_vars * p);
  const Eigen::MatrixXd all = full_y();
  // row t of y is row t + p of full_y
  for (int j = 0; j < p; ++j) {
    const Eigen::Index row = t + p - j;
    if (row < 0 || row >= all.rows()) throw InputError("lag stack requested outside the sample");
    out.segment(j * n_vars, n_vars) = all.row(row).transpose();
  }
  return out;
}

Eigen::MatrixXd Panel::full_y() const {
  Eigen::MatrixXd all(presample.rows() + y.rows(), y.cols());
  all << presample, y;
  return all;
}

Eigen::Index Panel::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Eigen::Index>(i);
  }
  throw InputError("unknown variable '" + std::string(name) + "'");
}

RawSeries apply_transform(const RawSeries& series, TransformCode code) {
  if (series.dates.size() != series.values.size()) {
    throw InputError("series '" + series.name + "': dates and values differ in length");
  }
  if (code == TransformCode::Level) return series;

  for (std::size_t t = 0; t < series.values.size(); ++t) {
    if (!(series.values[t] > 0.0)) {
      throw DomainError("series '" + series.name + "': non-positive value " + std::to_string(series.values[t]) +
                        " at index " + std::to_string(t) + " under a log transform");
    }
  }

  RawSeries out{series.name, {}, {}};
  if (code == TransformCode::Log) {
    out.dates = series.dates;
    out.values.reserve(series.values.size());
    for (double v : series.values) out.values.push_back(std::log(v));
    return out;
  }

  const double scale = code == TransformCode::AnnLogDiff ? 400.0 : 100.0;
  for (std::size_t t = 1; t < series.values.size(); ++t) {
    out.dates.push_back(series.dates[t]);
    out.values.push_back(scale * std::log(series.values[t] / series.values[t - 1]));
  }
  return out;
}

Panel build_panel(const std::vector<RawSeries>& series, const std::vector<TransformCode>& codes, int p) {
  if (series.empty()) throw InputError("no series supplied");
  if (series.size() != codes.size()) throw InputError("one transform code is required per series");
  if (p < 1) throw InputError("lag order must be positive");

  std::vector<RawSeries> transformed;
  transformed.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    transformed.push_back(apply_transform(series[i], codes[i]));
    const auto& d = transformed.back().dates;
    for (std::size_t t = 1; t < d.size(); ++t) {
      if (!(d[t - 1] < d[t])) {
        throw InputError("series '" + series[i].name + "': dates not strictly increasing at " + d[t].str());
      }
    }
  }

  std::set<int> common;
  for (const auto& d : transformed.front().dates) common.insert(d.ordinal());
  for (std::size_t i = 1; i < transformed.size(); ++i) {
    std::set<int> mine;
    for (const auto& d : transformed[i].dates) mine.insert(d.ordinal());
    std::set<int> both;
    std::set_intersection(common.begin(), common.end(), mine.begin(), mine.end(),
                          std::inserter(both, both.begin()));
    common = std::move(both);
  }
  if (common.empty()) throw InputError("series have no overlapping dates");
  for (auto it = std::next(common.begin()); it != common.end(); ++it) {
    if (*it != *std::prev(it) + 1) throw InputError("aligned sample has a gap in its quarterly dates");
  }

  const auto total = static_cast<Eigen::Index>(common.size());
  if (p >= total) {
    throw InputError("insufficient data: lag order " + std::to_string(p) + " needs more than " +
                     std::to_string(total) + " aligned observations");
  }

  const auto n = static_cast<Eigen::Index>(transformed.size());
  Eigen::MatrixXd y_all(total, n);
  const int first = *common.begin();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = transformed[static_cast<std::size_t>(i)];
    for (std::size_t t = 0; t < s.dates.size(); ++t) {
      const int row = s.dates[t].ordinal() - first;
      if (row >= 0 && row < total) y_all(row, i) = s.values[t];
    }
  }

  std::vector<std::string> names;
  for (const auto& s : transformed) names.push_back(s.name);
  Quarter start{first / 4, first % 4 + 1};
  return panel_from_matrix(y_all, p, std::move(names), start);
}

Panel panel_from_matrix(const Eigen::MatrixXd& y_all, int p, std::vector<std::string> names, Quarter first) {
  if (p < 1) throw InputError("lag order must be positive");
  if (p >= y_all.rows()) throw InputError("insufficient data: lag order exceeds sample length");
  const Eigen::Index n = y_all.cols();
  if (names.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) names.push_back("y" + std::to_string(i + 1));
  }
  if (static_cast<Eigen::Index>(names.size()) != n) throw InputError("one name is required per column");

  Panel panel;
  panel.p = p;
  panel.names = std::move(names);
  panel.presample = y_all.topRows(p);
  const Eigen::Index T = y_all.rows() - p;
  panel.y = y_all.bottomRows(T);
  panel.x.resize(T, n * p);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int j = 1; j <= p; ++j) {
      panel.x.block(t, (j - 1) * n, 1, n) = y_all.row(t + p - j);
    }
  }
  Quarter d = first;
  for (int j = 0; j < p; ++j) d = d.next();
  panel.dates.reserve(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    panel.dates.push_back(d);
    d = d.next();
  }
  return panel;
}

std::vector<RawSeries> read_csv_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw InputError("data file '" + path.string() + "' is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_line(line);
  if (header.size() < 2) throw InputError("data file needs a date column and at least one variable");
  const std::size_t n = header.size() - 1;

  struct Row {
    Quarter date;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(cells.size()));
    }
    Row row;
    try {
      row.date = Quarter::parse(cells[0]);
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(line_no) + ", column 1: " + e.what());
    }
    row.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::string& cell = cells[j + 1];
      if (is_missing(cell)) {
        row.values[j] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw InputError("line " + std::to_string(line_no) + ", column " + std::to_string(j + 2) +
                         " ('" + header[j + 1] + "'): cannot parse '" + cell + "'");
      }
      row.values[j] = v;
    }
    rows.push_back(std::move(row));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t t = 1; t < rows.size(); ++t) {
    if (rows[t].date == rows[t - 1].date) throw InputError("duplicate date " + rows[t].date.str());
  }

  std::vector<RawSeries> out;
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t lo = 0;
    std::size_t hi = rows.size();
    while (lo < hi && std::isnan(rows[lo].values[j])) ++lo;
    while (hi > lo && std::isnan(rows[hi - 1].values[j])) --hi;
    if (lo == hi) throw InputError("variable '" + header[j + 1] + "' has no observations");
    RawSeries s{header[j + 1], {}, {}};
    for (std::size_t t = lo; t < hi; ++t) {
      if (std::isnan(rows[t].values[j])) {
        throw InputError("variable '" + header[j + 1] + "' has an interior missing value at " + rows[t].date.str());
      }
      s.dates.push_back(rows[t].date);
      s.values.push_back(rows[t].values[j]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Panel load_csv(const std::filesystem::path& path, const std::map<std::string, int>& transforms, int p) {
  auto series = read_csv_series(path);
  for (const auto& [name, code] : transforms) {
    const bool known = std::any_of(series.begin(), series.end(), [&](const RawSeries& s) { return s.name == name; });
    if (!known) throw InputError("transform spec names unknown variable '" + name + "'");
  }
  std::vector<TransformCode> codes;
  for (const auto& s : series) {
    const auto it = transforms.find(s.name);
    codes.push_back(it == transforms.end() ? TransformCode::Level : transform_code_from_int(it->second));
  }
  return build_panel(series, codes, p);
}

}  // namespace bscen
