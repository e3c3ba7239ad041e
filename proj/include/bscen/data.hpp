#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace bscen {

// Series transformations applied before estimation.
enum class TransformCode : int {
  Level = 0,       // x_t
  AnnLogDiff = 1,  // 400 * ln(x_t / x_{t-1})
  LogDiff = 2,     // 100 * ln(x_t / x_{t-1})
  Log = 3,         // ln(x_t)
};

TransformCode transform_code_from_int(int code);
bool is_differenced(TransformCode code);

// Quarterly period label. Parses "YYYYQq" and ISO dates "YYYY-MM-DD" (the
// latter mapped to the quarter containing the month).
struct Quarter {
  int year = 0;
  int quarter = 1;

  static Quarter parse(std::string_view text);
  int ordinal() const { return year * 4 + (quarter - 1); }
  Quarter next() const;
  std::string str() const;

  friend bool operator==(const Quarter&, const Quarter&) = default;
  friend auto operator<=>(const Quarter& a, const Quarter& b) { return a.ordinal() <=> b.ordinal(); }
};

struct RawSeries {
  std::string name;
  std::vector<Quarter> dates;
  std::vector<double> values;
};

// Transformed, aligned data with the lag design attached.
//
// Row t of `y` is y_t and row t of `x` is x_t = (y_{t-1}', ..., y_{t-p}')'.
// The p observations consumed as initial conditions are kept in `presample`
// (oldest first) so that lag stacks can be formed at any origin.
struct Panel {
  Eigen::MatrixXd y;
  Eigen::MatrixXd x;
  Eigen::MatrixXd presample;
  std::vector<std::string> names;
  std::vector<Quarter> dates;
  int p = 1;

  Eigen::Index T() const { return y.rows(); }
  Eigen::Index n() const { return y.cols(); }
  Eigen::Index k() const { return x.cols(); }

  // Lag stack for the period after row t: (y_t', y_{t-1}', ..., y_{t-p+1}')'.
  // t = -1 gives x_0 built entirely from the presample.
  Eigen::VectorXd lag_stack(Eigen::Index t) const;

  // Presample rows followed by y.
  Eigen::MatrixXd full_y() const;

  Eigen::Index index_of(std::string_view name) const;
};

RawSeries apply_transform(const RawSeries& series, TransformCode code);

Panel build_panel(const std::vector<RawSeries>& series, const std::vector<TransformCode>& codes, int p);

// Build a panel directly from an already transformed matrix (rows are time).
Panel panel_from_matrix(const Eigen::MatrixXd& y_all, int p, std::vector<std::string> names = {},
                        Quarter first = Quarter{2000, 1});

// First column holds dates, every other column a variable. Missing cells
// ("", NA, NaN, .) are allowed only at the start or end of a column.
std::vector<RawSeries> read_csv_series(const std::filesystem::path& path);

// Columns absent from `transforms` enter untransformed (code 0).
Panel load_csv(const std::filesystem::path& path, const std::map<std::string, int>& transforms, int p);

}  // namespace bscen
