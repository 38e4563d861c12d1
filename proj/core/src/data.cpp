#include "lbbart/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace lbbart {
namespace {

using nlohmann::json;

std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

[[noreturn]] void fail_at(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

// Min-max scales each column of `columns` in place and returns the ranges.
// Constant columns map to 0.
std::vector<ColumnRange> min_max_scale(std::vector<std::vector<double>>& columns) {
  std::vector<ColumnRange> ranges;
  for (auto& col : columns) {
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    ColumnRange r{*lo, *hi};
    for (double& v : col) v = r.max > r.min ? (v - r.min) / (r.max - r.min) : 0.0;
    ranges.push_back(r);
  }
  return ranges;
}

Matrix from_columns(const std::vector<std::vector<double>>& columns, std::size_t rows) {
  Matrix X(rows, columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    for (std::size_t i = 0; i < rows; ++i) X(i, j) = columns[j][i];
  }
  return X;
}

json provenance_to_json(const Provenance& p, const std::vector<std::string>& names) {
  json j;
  j["source"] = p.source;
  j["steps"] = p.steps;
  j["rows_read"] = p.rows_read;
  j["rows_dropped"] = p.rows_dropped;
  j["features"] = names;
  json ranges = json::array();
  for (const auto& r : p.ranges) ranges.push_back({{"min", r.min}, {"max", r.max}});
  j["ranges"] = ranges;
  return j;
}

}  // namespace

bool Dataset::binary_response() const {
  return std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

void Dataset::validate() const {
  if (y.empty() || X.cols() == 0) throw std::invalid_argument("dataset must have n >= 1 and p >= 1");
  if (X.rows() != y.size()) throw std::invalid_argument("dataset X and y have different row counts");
  if (names.size() != X.cols()) throw std::invalid_argument("dataset has the wrong number of column names");
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t j = 0; j < X.cols(); ++j) {
      const double v = X(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("covariate " + names[j] + " at row " + std::to_string(i) + " is outside [0, 1]");
      }
    }
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw std::invalid_argument("response contains a non-finite value");
  }
}

std::string provenance_json(const Dataset& data) { return provenance_to_json(data.provenance, data.names).dump(2); }

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

Dataset simulate_cart(std::size_t n, double sigma, Rng& rng) {
  if (n == 0 || n % 3 != 0) throw std::invalid_argument("simulate_cart: n must be a positive multiple of 3");
  if (!(sigma >= 0.0)) throw std::invalid_argument("simulate_cart: sigma must be >= 0");
  const std::size_t third = n / 3;
  auto unif = [&](double a, double b) { return a + (b - a) * uniform01(rng); };

  Dataset d;
  d.X = Matrix(n, 3);
  d.y.resize(n);
  d.names = {"X1", "X2", "X3"};
  for (std::size_t i = 0; i < n; ++i) {
    const bool first_two = i < 2 * third;
    d.X(i, 0) = first_two ? unif(0.1, 0.4) : unif(0.6, 0.9);
    d.X(i, 1) = i < third ? unif(0.1, 0.4) : (first_two ? unif(0.6, 0.9) : unif(0.1, 0.9));
    d.X(i, 2) = first_two ? unif(0.6, 0.9) : unif(0.1, 0.4);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = d.X(i, 0) > 0.5 ? 5.0 : (d.X(i, 1) <= 0.5 ? 1.0 : 3.0);
    d.y[i] = mean + sigma * standard_normal(rng);
  }
  d.provenance.source = "simulated";
  d.provenance.rows_read = n;
  char buf[96];
  std::snprintf(buf, sizeof buf, "simulate_cart(n=%zu, sigma=%g)", n, sigma);
  d.provenance.steps = {buf};
  return d;
}

Dataset load_breast_cancer(const std::filesystem::path& path, std::optional<std::size_t> expected_rows) {
  auto in = open_input(path);
  std::vector<std::vector<double>> columns(9);
  std::vector<double> y;
  std::size_t line_no = 0, read = 0, dropped = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++read;
    const auto fields = split_csv_line(line);
    if (fields.size() != 11) fail_at(path, line_no, "expected 11 fields, found " + std::to_string(fields.size()));
    if (std::any_of(fields.begin(), fields.end(), [](const std::string& f) { return trim(f) == "?"; })) {
      ++dropped;
      continue;
    }
    double values[9];
    for (std::size_t j = 0; j < 9; ++j) {
      const auto v = parse_number(fields[j + 1]);
      if (!v) fail_at(path, line_no, "unparseable predictor '" + fields[j + 1] + "'");
      values[j] = *v;
    }
    const auto cls = parse_number(fields[10]);
    if (!cls || (*cls != 2.0 && *cls != 4.0)) fail_at(path, line_no, "class must be 2 or 4, got '" + fields[10] + "'");
    for (std::size_t j = 0; j < 9; ++j) columns[j].push_back(values[j]);
    y.push_back(*cls == 4.0 ? 1.0 : 0.0);
  }
  if (y.empty()) throw std::runtime_error(path.string() + ": no usable rows");
  if (expected_rows && y.size() != *expected_rows) {
    throw std::runtime_error(path.string() + ": " + std::to_string(y.size()) + " rows after dropping missing values, expected " +
                             std::to_string(*expected_rows));
  }

  Dataset d;
  d.provenance.ranges = min_max_scale(columns);
  d.X = from_columns(columns, y.size());
  d.y = std::move(y);
  d.names = {"clump_thickness", "cell_size_uniformity", "cell_shape_uniformity", "marginal_adhesion",
             "epithelial_cell_size", "bare_nuclei", "bland_chromatin", "normal_nucleoli", "mitoses"};
  d.provenance.source = path.filename().string();
  d.provenance.rows_read = read;
  d.provenance.rows_dropped = dropped;
  d.provenance.steps = {"drop rows containing '?'", "drop id column", "min-max scale predictors",
                        "y = 1 for class 4 (malignant)"};
  return d;
}

SexFilter sex_filter_from_string(std::string_view name) {
  if (name == "male") return SexFilter::kMale;
  if (name == "female") return SexFilter::kFemale;
  if (name == "all") return SexFilter::kAll;
  throw std::invalid_argument("unknown sex filter: " + std::string(name));
}

std::string_view to_string(SexFilter filter) {
  switch (filter) {
    case SexFilter::kMale:
      return "male";
    case SexFilter::kFemale:
      return "female";
    case SexFilter::kAll:
      break;
  }
  return "all";
}

Dataset load_diabetes(const std::filesystem::path& path, const DiabetesOptions& options) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  auto find_column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t sex_col = find_column(options.sex_column);
  const std::size_t target_col = find_column(options.target_column);

  std::vector<std::vector<std::string>> rows;
  std::vector<double> y;
  std::size_t line_no = 1, read = 0, dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++read;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      fail_at(path, line_no, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    for (auto& f : fields) f = trim(f);
    const std::string& sex = fields[sex_col];
    if (sex != "Male" && sex != "Female" && sex != "Unknown/Invalid") {
      fail_at(path, line_no, "unknown " + options.sex_column + " label '" + sex + "'");
    }
    const std::string& target = fields[target_col];
    if (target != "<30" && target != ">30" && target != "NO") {
      fail_at(path, line_no, "unknown " + options.target_column + " label '" + target + "'");
    }
    const bool keep = options.sex == SexFilter::kAll || (options.sex == SexFilter::kMale && sex == "Male") ||
                      (options.sex == SexFilter::kFemale && sex == "Female");
    if (!keep) {
      ++dropped;
      continue;
    }
    y.push_back(target == options.positive_label ? 1.0 : 0.0);
    rows.push_back(std::move(fields));
  }
  const std::size_t n = rows.size();
  if (n == 0) throw std::runtime_error(path.string() + ": no rows left after the sex filter");
  if (options.expected_rows && n != *options.expected_rows) {
    throw std::runtime_error(path.string() + ": " + std::to_string(n) + " rows after filtering, expected " +
                             std::to_string(*options.expected_rows));
  }

  std::vector<std::vector<double>> columns;
  std::vector<std::string> names;
  std::vector<std::string> steps;
  steps.push_back("sex filter: " + std::string(to_string(options.sex)));
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (c == target_col) continue;
    if (std::find(options.drop_columns.begin(), options.drop_columns.end(), name) != options.drop_columns.end()) {
      steps.push_back("drop " + name + " (identifier)");
      continue;
    }
    std::vector<double> numeric(n);
    bool is_numeric = true;
    for (std::size_t i = 0; i < n && is_numeric; ++i) {
      const auto v = parse_number(rows[i][c]);
      if (v) numeric[i] = *v;
      else is_numeric = false;
    }
    if (is_numeric) {
      columns.push_back(std::move(numeric));
      names.push_back(name);
      continue;
    }
    std::map<std::string, std::size_t> levels;
    for (const auto& r : rows) ++levels[r[c]];
    std::size_t top = 0;
    for (const auto& [level, count] : levels) top = std::max(top, count);
    const double share = static_cast<double>(top) / static_cast<double>(n);
    if (levels.size() >= options.max_categories) {
      steps.push_back("drop " + name + " (" + std::to_string(levels.size()) + " categories)");
      continue;
    }
    if (share > options.max_top_share) {
      steps.push_back("drop " + name + " (top category share " + std::to_string(share) + ")");
      continue;
    }
    for (const auto& [level, count] : levels) {
      std::vector<double> dummy(n);
      for (std::size_t i = 0; i < n; ++i) dummy[i] = rows[i][c] == level ? 1.0 : 0.0;
      columns.push_back(std::move(dummy));
      names.push_back(name + "=" + level);
    }
    steps.push_back("one-hot " + name + " (" + std::to_string(levels.size()) + " levels)");
  }
  if (columns.empty()) throw std::runtime_error(path.string() + ": no covariates survive the filters");
  steps.push_back("min-max scale covariates");
  steps.push_back("y = 1 iff " + options.target_column + " == " + options.positive_label);
  steps.push_back("features: " + std::to_string(names.size()));

  Dataset d;
  d.provenance.ranges = min_max_scale(columns);
  d.X = from_columns(columns, n);
  d.y = std::move(y);
  d.names = std::move(names);
  d.provenance.source = path.filename().string();
  d.provenance.rows_read = read;
  d.provenance.rows_dropped = dropped;
  d.provenance.steps = std::move(steps);
  return d;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p += ".provenance.json";
  return p;
}

void write_dataset(const Dataset& data, const std::filesystem::path& csv) {
  std::ofstream out(csv, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + csv.string() + " for writing");
  for (const auto& name : data.names) out << name << ',';
  out << "y\n";
  char buf[32];
  auto put = [&](double v) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
  };
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.p(); ++j) {
      put(data.X(i, j));
      out << ',';
    }
    put(data.y[i]);
    out << '\n';
  }
  std::ofstream side(sidecar_path(csv), std::ios::binary);
  if (!side) throw std::runtime_error("cannot write " + sidecar_path(csv).string());
  side << provenance_json(data) << '\n';
}

Dataset load_dataset_csv(const std::filesystem::path& csv) {
  auto in = open_input(csv);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(csv.string() + ": empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2 || trim(header.back()) != "y") throw std::runtime_error(csv.string() + ": last column must be 'y'");
  const std::size_t p = header.size() - 1;
  std::vector<std::vector<double>> columns(p);
  std::vector<double> y;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != p + 1) fail_at(csv, line_no, "wrong field count");
    for (std::size_t j = 0; j <= p; ++j) {
      const auto v = parse_number(fields[j]);
      if (!v) fail_at(csv, line_no, "unparseable value '" + fields[j] + "'");
      if (j < p) columns[j].push_back(*v);
      else y.push_back(*v);
    }
  }
  Dataset d;
  d.X = from_columns(columns, y.size());
  d.y = std::move(y);
  for (std::size_t j = 0; j < p; ++j) d.names.push_back(trim(header[j]));
  d.provenance.source = csv.filename().string();
  d.provenance.rows_read = d.y.size();

  const auto side = sidecar_path(csv);
  if (std::filesystem::exists(side)) {
    std::ifstream s(side, std::ios::binary);
    try {
      const json j = json::parse(s);
      d.provenance.source = j.value("source", d.provenance.source);
      d.provenance.steps = j.value("steps", std::vector<std::string>{});
      d.provenance.rows_read = j.value("rows_read", d.provenance.rows_read);
      d.provenance.rows_dropped = j.value("rows_dropped", std::size_t{0});
      for (const auto& r : j.value("ranges", json::array())) {
        d.provenance.ranges.push_back({r.at("min").get<double>(), r.at("max").get<double>()});
      }
    } catch (const json::exception& e) {
      throw std::runtime_error(side.string() + ": " + e.what());
    }
  }
  d.validate();
  return d;
}

Dataset subsample(const Dataset& data, std::size_t n, Rng& rng) {
  if (n == 0 || n > data.n()) throw std::invalid_argument("subsample size must be in [1, n]");
  std::vector<std::size_t> idx(data.n());
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates, then restore row order.
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + uniform_index(rng, data.n() - i)]);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());

  Dataset d;
  d.X = data.X.select_rows(idx);
  for (std::size_t i : idx) d.y.push_back(data.y[i]);
  d.names = data.names;
  d.provenance = data.provenance;
  d.provenance.steps.push_back("subsample " + std::to_string(n) + " of " + std::to_string(data.n()) + " rows");
  return d;
}

double original_value(const Dataset& data, std::size_t j, double scaled) {
  if (j >= data.provenance.ranges.size()) throw std::out_of_range("no scaling range recorded for column");
  const auto& r = data.provenance.ranges[j];
  return r.min + scaled * (r.max - r.min);
}

}  // namespace lbbart
