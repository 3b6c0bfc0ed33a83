#pragma once

// Discrete classification datasets: CSV ingestion, quantile discretization
// and stratified fold plans.
//
// All states are stored 0-based internally. The CSV surface is 1-based for
// integer columns (values 1..sp), matching the usual convention for discrete
// benchmark files.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace mmbn {

/// Raised for malformed CSV input; carries the 1-based file row and column.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, std::size_t column, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ", column " +
                           std::to_string(column) + ": " + what),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

/// Raised when data violates declared cardinalities or dataset invariants.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ColumnKind { integer, categorical, discretized };

inline const char* to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::integer: return "integer";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::discretized: return "discretized";
  }
  return "?";
}

/// Provenance of one dataset column. `labels[v]` is the original token of
/// state v for categorical columns; `cut_points` are the quantile cuts of a
/// discretized column.
struct ColumnInfo {
  std::string name;
  ColumnKind kind = ColumnKind::integer;
  std::vector<std::string> labels;
  std::vector<double> cut_points;
  /// 0-based column position in the source file.
  std::size_t source = 0;
};

/// Discrete samples over variables X_0..X_{N-1}; X_0 is always the class.
class Dataset {
 public:
  static constexpr std::size_t class_index = 0;

  Dataset() = default;

  Dataset(std::vector<int> cardinalities, std::vector<int> values,
          std::vector<ColumnInfo> columns = {})
      : cards_(std::move(cardinalities)),
        values_(std::move(values)),
        columns_(std::move(columns)) {
    const std::size_t n = cards_.size();
    if (n < 2) throw ValidationError("dataset needs at least 2 variables");
    for (std::size_t i = 0; i < n; ++i) {
      if (cards_[i] < 2) {
        throw ValidationError("variable " + std::to_string(i) +
                              " has cardinality < 2");
      }
    }
    if (values_.empty() || values_.size() % n != 0) {
      throw ValidationError("dataset needs at least one complete sample");
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const int v = values_[k];
      if (v < 0 || v >= cards_[k % n]) {
        throw ValidationError("sample " + std::to_string(k / n) +
                              ", variable " + std::to_string(k % n) +
                              ": value out of range");
      }
    }
    if (columns_.empty()) {
      columns_.resize(n);
      columns_[0].name = "C";
      for (std::size_t i = 1; i < n; ++i) columns_[i].name = "Z" + std::to_string(i);
      for (std::size_t i = 0; i < n; ++i) columns_[i].source = i;
    }
    if (columns_.size() != n) throw ValidationError("column info size mismatch");
  }

  std::size_t num_vars() const noexcept { return cards_.size(); }
  std::size_t num_samples() const noexcept {
    return cards_.empty() ? 0 : values_.size() / cards_.size();
  }
  int cardinality(std::size_t i) const { return cards_[i]; }
  const std::vector<int>& cardinalities() const noexcept { return cards_; }
  int num_classes() const { return cards_[class_index]; }

  std::span<const int> row(std::size_t m) const {
    return {values_.data() + m * num_vars(), num_vars()};
  }
  int at(std::size_t m, std::size_t i) const { return values_[m * num_vars() + i]; }
  int label(std::size_t m) const { return at(m, class_index); }

  const std::vector<int>& values() const noexcept { return values_; }
  const std::vector<ColumnInfo>& columns() const noexcept { return columns_; }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(num_classes(), 0);
    for (std::size_t m = 0; m < num_samples(); ++m) ++counts[label(m)];
    return counts;
  }

  /// Rows `indices` (in the given order), keeping cardinalities and metadata.
  Dataset subset(std::span<const std::size_t> indices) const {
    std::vector<int> vals;
    vals.reserve(indices.size() * num_vars());
    for (std::size_t m : indices) {
      auto r = row(m);
      vals.insert(vals.end(), r.begin(), r.end());
    }
    return Dataset(cards_, std::move(vals), columns_);
  }

  /// Same samples with the class relabeled by `map` (old class -> new class)
  /// and the class cardinality replaced.
  Dataset relabel_classes(std::span<const int> map, int new_num_classes) const {
    std::vector<int> cards = cards_;
    cards[class_index] = new_num_classes;
    std::vector<int> vals = values_;
    for (std::size_t m = 0; m < num_samples(); ++m) {
      int& c = vals[m * num_vars() + class_index];
      c = map[c];
    }
    std::vector<ColumnInfo> cols = columns_;
    cols[class_index].labels.clear();
    return Dataset(std::move(cards), std::move(vals), std::move(cols));
  }

  /// Equality on the statistical content (names, cardinalities, samples).
  friend bool operator==(const Dataset& a, const Dataset& b) {
    if (a.cards_ != b.cards_ || a.values_ != b.values_) return false;
    for (std::size_t i = 0; i < a.columns_.size(); ++i) {
      if (a.columns_[i].name != b.columns_[i].name) return false;
    }
    return true;
  }

 private:
  std::vector<int> cards_;
  std::vector<int> values_;
  std::vector<ColumnInfo> columns_;
};

/// Throws unless every class value occurs at least once.
inline void require_all_classes(const Dataset& ds) {
  auto counts = ds.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw ValidationError("class value " + std::to_string(c + 1) +
                            " never occurs in the data");
    }
  }
}

// ---------------------------------------------------------------------------
// Quantile discretization

struct Discretization {
  std::vector<int> values;  // 0-based bin per input value
  int bins = 1;
  std::vector<double> cut_points;
  bool constant = false;
};

namespace detail {

// Linear-interpolation empirical quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline int bin_of(double v, std::span<const double> cuts) {
  return static_cast<int>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
}

}  // namespace detail

/// Bins values at the empirical quantiles 1/B..(B-1)/B. A value equal to a
/// cut point falls into the lower bin. Cut points that would leave a bin
/// empty are dropped, so every emitted bin is populated.
inline Discretization discretize_quantile(std::span<const double> raw, int bins) {
  if (bins < 2) throw std::invalid_argument("discretize_quantile: bins must be >= 2");
  if (raw.empty()) throw std::invalid_argument("discretize_quantile: empty column");
  std::vector<double> sorted(raw.begin(), raw.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> cuts;
  for (int b = 1; b < bins; ++b) {
    cuts.push_back(detail::quantile_sorted(sorted, static_cast<double>(b) / bins));
  }
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  // Drop cuts bounding empty bins until all bins are populated.
  for (;;) {
    std::vector<std::size_t> occupancy(cuts.size() + 1, 0);
    for (double v : raw) ++occupancy[detail::bin_of(v, cuts)];
    auto empty = std::find(occupancy.begin(), occupancy.end(), 0u);
    if (empty == occupancy.end()) break;
    const auto b = static_cast<std::size_t>(empty - occupancy.begin());
    cuts.erase(cuts.begin() + static_cast<std::ptrdiff_t>(b < cuts.size() ? b : b - 1));
  }

  Discretization out;
  out.cut_points = cuts;
  out.bins = static_cast<int>(cuts.size()) + 1;
  out.constant = out.bins < 2;
  out.values.reserve(raw.size());
  for (double v : raw) out.values.push_back(detail::bin_of(v, cuts));
  return out;
}

// ---------------------------------------------------------------------------
// CSV

enum class HeaderMode { detect, present, absent };

struct LoadOptions {
  /// Per-column cardinalities in file column order; 0 means "infer".
  std::optional<std::vector<int>> schema;
  /// Bin count for continuous (non-integer numeric) columns.
  int bins = 3;
  HeaderMode header = HeaderMode::detect;
  /// File column holding the class (0-based); moved to index 0.
  std::size_t class_column = 0;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      cells.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) throw ParseError(row, cells.size() + 1, "unterminated quote");
  cells.push_back(was_quoted ? cur : trim(cur));
  return cells;
}

inline bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoll(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

inline bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stod(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size() && std::isfinite(out);
}

inline bool is_numeric(const std::string& s) {
  double d;
  return parse_real(s, d);
}

inline bool is_missing(const std::string& s) {
  return s.empty() || s == "?" || s == "NA" || s == "N/A" || s == "nan" || s == "NaN";
}

}  // namespace detail

/// Parses a CSV table of discrete (or continuous, to be discretized) columns.
///
/// Integer columns keep their 1-based values; categorical columns are mapped
/// to states in first-appearance order; numeric columns with non-integer
/// values are quantile-discretized with `options.bins`. Rows with missing
/// cells are rejected. Warnings (e.g. dropped constant columns) are appended
/// to `warnings` when given.
inline Dataset parse_csv(std::istream& in, const LoadOptions& options = {},
                         std::vector<std::string>* warnings = nullptr) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    rows.push_back(detail::split_csv_line(line, line_no));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw ParseError(1, 1, "empty file");

  const std::size_t width = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw ParseError(line_numbers[r], std::min(rows[r].size(), width) + 1,
                       "expected " + std::to_string(width) + " cells, got " +
                           std::to_string(rows[r].size()));
    }
  }
  if (width < 2) throw ParseError(line_numbers[0], 1, "need a class column and at least one feature");
  if (options.class_column >= width) {
    throw std::invalid_argument("class column " + std::to_string(options.class_column) +
                                " out of range");
  }

  bool has_header = options.header == HeaderMode::present;
  if (options.header == HeaderMode::detect && rows.size() > 1) {
    // Header if some column is numeric below the first row but not in it, or,
    // for all-categorical files, if no first-row token recurs in its column.
    bool numeric_below_text = false;
    bool any_numeric_column = false;
    bool first_tokens_unique = true;
    for (std::size_t c = 0; c < width; ++c) {
      bool col_numeric = true;
      bool recurs = false;
      for (std::size_t r = 1; r < rows.size(); ++r) {
        if (!detail::is_missing(rows[r][c]) && !detail::is_numeric(rows[r][c])) col_numeric = false;
        if (rows[r][c] == rows[0][c]) recurs = true;
      }
      if (col_numeric) {
        any_numeric_column = true;
        if (!detail::is_numeric(rows[0][c])) numeric_below_text = true;
      }
      if (recurs || detail::is_numeric(rows[0][c])) first_tokens_unique = false;
    }
    has_header = numeric_below_text || (!any_numeric_column && first_tokens_unique);
  }

  std::vector<std::string> names(width);
  std::size_t first_data = 0;
  if (has_header) {
    names = rows[0];
    first_data = 1;
  } else {
    for (std::size_t c = 0; c < width; ++c) names[c] = "X" + std::to_string(c + 1);
  }
  const std::size_t num_rows = rows.size() - first_data;
  if (num_rows == 0) throw ParseError(line_numbers[0], 1, "no data rows");

  for (std::size_t r = first_data; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      if (detail::is_missing(rows[r][c])) {
        throw ParseError(line_numbers[r], c + 1, "missing value '" + rows[r][c] + "'");
      }
    }
  }
  if (options.schema && options.schema->size() != width) {
    throw ValidationError("schema lists " + std::to_string(options.schema->size()) +
                          " cardinalities for " + std::to_string(width) + " columns");
  }

  // Column order: class first, then the remaining columns in file order.
  std::vector<std::size_t> order{options.class_column};
  for (std::size_t c = 0; c < width; ++c) {
    if (c != options.class_column) order.push_back(c);
  }

  std::vector<std::vector<int>> columns;
  std::vector<ColumnInfo> infos;
  std::vector<int> cards;
  for (std::size_t c : order) {
    const bool is_class = c == options.class_column;
    bool all_int = true;
    bool all_real = true;
    for (std::size_t r = first_data; r < rows.size(); ++r) {
      long long iv;
      double dv;
      if (!detail::parse_int(rows[r][c], iv)) all_int = false;
      if (!detail::parse_real(rows[r][c], dv)) all_real = false;
    }
    const int declared = options.schema ? (*options.schema)[c] : 0;
    ColumnInfo info;
    info.name = names[c];
    info.source = c;
    std::vector<int> col(num_rows);

    if (all_int) {
      info.kind = ColumnKind::integer;
      int max_seen = 0;
      for (std::size_t r = first_data; r < rows.size(); ++r) {
        long long v = 0;
        detail::parse_int(rows[r][c], v);
        if (v < 1) throw ParseError(line_numbers[r], c + 1, "integer values must be >= 1");
        if (declared > 0 && v > declared) {
          throw ValidationError("row " + std::to_string(line_numbers[r]) + ", column " +
                                std::to_string(c + 1) + ": value " + std::to_string(v) +
                                " exceeds declared cardinality " + std::to_string(declared));
        }
        if (v > std::numeric_limits<int>::max() / 2) {
          throw ParseError(line_numbers[r], c + 1, "value too large");
        }
        col[r - first_data] = static_cast<int>(v) - 1;
        max_seen = std::max(max_seen, static_cast<int>(v));
      }
      int card = declared > 0 ? declared : max_seen;
      if (card < 2) {
        if (warnings) {
          warnings->push_back("column '" + info.name + "' has a single observed state; cardinality set to 2");
        }
        card = 2;
      }
      cards.push_back(card);
    } else if (all_real && !is_class) {
      info.kind = ColumnKind::discretized;
      std::vector<double> raw(num_rows);
      for (std::size_t r = first_data; r < rows.size(); ++r) {
        detail::parse_real(rows[r][c], raw[r - first_data]);
      }
      Discretization d = discretize_quantile(raw, options.bins);
      if (d.constant) {
        if (warnings) warnings->push_back("column '" + info.name + "' is constant; dropped");
        continue;
      }
      col = std::move(d.values);
      info.cut_points = std::move(d.cut_points);
      cards.push_back(declared > 0 ? std::max(declared, d.bins) : d.bins);
    } else {
      info.kind = ColumnKind::categorical;
      std::unordered_map<std::string, int> index;
      for (std::size_t r = first_data; r < rows.size(); ++r) {
        const std::string& tok = rows[r][c];
        auto [it, inserted] = index.emplace(tok, static_cast<int>(info.labels.size()));
        if (inserted) info.labels.push_back(tok);
        col[r - first_data] = it->second;
      }
      int card = static_cast<int>(info.labels.size());
      if (declared > 0) {
        if (declared < card) {
          throw ValidationError("column " + std::to_string(c + 1) + " has " +
                                std::to_string(card) + " labels but declared cardinality " +
                                std::to_string(declared));
        }
        card = declared;
      }
      if (card < 2) {
        if (warnings) {
          warnings->push_back("column '" + info.name + "' has a single observed state; cardinality set to 2");
        }
        card = 2;
      }
      cards.push_back(card);
    }
    columns.push_back(std::move(col));
    infos.push_back(std::move(info));
  }

  const std::size_t n = columns.size();
  std::vector<int> values(num_rows * n);
  for (std::size_t r = 0; r < num_rows; ++r) {
    for (std::size_t i = 0; i < n; ++i) values[r * n + i] = columns[i][r];
  }
  Dataset ds(std::move(cards), std::move(values), std::move(infos));
  require_all_classes(ds);
  return ds;
}

inline Dataset load_csv(const std::string& path, const LoadOptions& options = {},
                        std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_csv(in, options, warnings);
}

/// Reads a CSV with the encoding of an existing dataset: `columns` and
/// `cards` come from the training data (class first). Labels, cut points and
/// integer ranges are applied as recorded; unknown labels and out-of-range
/// integers are errors. With HeaderMode::detect the first row is a header
/// when its cells equal the recorded column names.
inline Dataset encode_csv(std::istream& in, const std::vector<ColumnInfo>& columns, const std::vector<int>& cards,
                          HeaderMode header = HeaderMode::detect) {
  if (columns.size() != cards.size() || columns.empty()) throw std::invalid_argument("encode_csv: bad encoding");
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    rows.push_back(detail::split_csv_line(line, line_no));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw ParseError(1, 1, "empty file");
  std::size_t width = 0;
  for (const auto& c : columns) width = std::max(width, c.source + 1);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() < width) {
      throw ParseError(line_numbers[r], rows[r].size() + 1, "expected at least " + std::to_string(width) + " cells");
    }
  }
  bool has_header = header == HeaderMode::present;
  if (header == HeaderMode::detect) {
    has_header = true;
    for (const auto& c : columns) has_header = has_header && rows[0][c.source] == c.name;
  }
  const std::size_t first = has_header ? 1 : 0;
  if (rows.size() <= first) throw ParseError(line_numbers[0], 1, "no data rows");

  std::vector<int> values;
  values.reserve((rows.size() - first) * columns.size());
  for (std::size_t r = first; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      const ColumnInfo& c = columns[i];
      const std::string& tok = rows[r][c.source];
      const std::size_t col = c.source + 1;
      if (detail::is_missing(tok)) throw ParseError(line_numbers[r], col, "missing value '" + tok + "'");
      int v = 0;
      if (c.kind == ColumnKind::categorical) {
        auto it = std::find(c.labels.begin(), c.labels.end(), tok);
        if (it == c.labels.end()) throw ParseError(line_numbers[r], col, "unknown label '" + tok + "'");
        v = static_cast<int>(it - c.labels.begin());
      } else if (c.kind == ColumnKind::discretized) {
        double d;
        if (!detail::parse_real(tok, d)) throw ParseError(line_numbers[r], col, "expected a number");
        v = detail::bin_of(d, c.cut_points);
      } else {
        long long iv;
        if (!detail::parse_int(tok, iv)) throw ParseError(line_numbers[r], col, "expected an integer");
        if (iv < 1 || iv > cards[i]) {
          throw ValidationError("row " + std::to_string(line_numbers[r]) + ", column " + std::to_string(col) +
                                ": value " + std::to_string(iv) + " outside 1.." + std::to_string(cards[i]));
        }
        v = static_cast<int>(iv) - 1;
      }
      values.push_back(v);
    }
  }
  return Dataset(cards, std::move(values), columns);
}

/// Writes a header row of column names, then one row per sample. Categorical
/// columns are written with their labels, all others as 1-based integers.
inline void write_csv(const Dataset& ds, std::ostream& out) {
  const auto& cols = ds.columns();
  for (std::size_t i = 0; i < ds.num_vars(); ++i) {
    out << (i ? "," : "") << cols[i].name;
  }
  out << '\n';
  for (std::size_t m = 0; m < ds.num_samples(); ++m) {
    for (std::size_t i = 0; i < ds.num_vars(); ++i) {
      if (i) out << ',';
      const int v = ds.at(m, i);
      if (cols[i].kind == ColumnKind::categorical && v < static_cast<int>(cols[i].labels.size())) {
        out << cols[i].labels[v];
      } else {
        out << v + 1;
      }
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Folds

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignment;  // fold id per sample

  std::vector<std::size_t> test_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t m = 0; m < assignment.size(); ++m) {
      if (assignment[m] == fold) out.push_back(m);
    }
    return out;
  }
  std::vector<std::size_t> train_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t m = 0; m < assignment.size(); ++m) {
      if (assignment[m] != fold) out.push_back(m);
    }
    return out;
  }
  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (auto f : assignment) ++sizes[f];
    return sizes;
  }

  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

inline void to_json(nlohmann::json& j, const FoldPlan& p) {
  j = nlohmann::json{{"k", p.k}, {"seed", p.seed}, {"assignment", p.assignment}};
}
inline void from_json(const nlohmann::json& j, FoldPlan& p) {
  j.at("k").get_to(p.k);
  j.at("seed").get_to(p.seed);
  j.at("assignment").get_to(p.assignment);
}

namespace detail {

// Uniform draw in [0, bound) by rejection; portable across standard libraries.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_below(rng, i)]);
  }
}

}  // namespace detail

/// Stratified k-fold assignment. Samples of each class are shuffled, the
/// classes are concatenated in class order and folds dealt round-robin, so
/// fold sizes and per-class fold counts each differ by at most one.
inline FoldPlan make_folds(const Dataset& ds, std::size_t k, std::uint64_t seed,
                           std::vector<std::string>* warnings = nullptr) {
  if (k < 2) throw std::invalid_argument("make_folds: k must be >= 2");
  if (k > ds.num_samples()) throw std::invalid_argument("make_folds: k exceeds sample count");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
  for (std::size_t m = 0; m < ds.num_samples(); ++m) by_class[ds.label(m)].push_back(m);

  FoldPlan plan{k, seed, std::vector<std::size_t>(ds.num_samples(), 0)};
  std::size_t dealt = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (!members.empty() && members.size() < k && warnings) {
      warnings->push_back("class " + std::to_string(c + 1) + " has fewer samples (" +
                          std::to_string(members.size()) + ") than folds");
    }
    detail::shuffle(members, rng);
    for (std::size_t m : members) plan.assignment[m] = dealt++ % k;
  }
  return plan;
}

/// Stratified holdout: roughly `fraction` of each class goes to the
/// validation side (returned as fold 1 of a 2-fold plan).
inline FoldPlan make_holdout(const Dataset& ds, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
  for (std::size_t m = 0; m < ds.num_samples(); ++m) by_class[ds.label(m)].push_back(m);
  FoldPlan plan{2, seed, std::vector<std::size_t>(ds.num_samples(), 0)};
  for (auto& members : by_class) {
    detail::shuffle(members, rng);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    for (std::size_t t = 0; t < take && t < members.size(); ++t) plan.assignment[members[t]] = 1;
  }
  return plan;
}

}  // namespace mmbn
