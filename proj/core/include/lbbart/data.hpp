#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lbbart/matrix.hpp"
#include "lbbart/rng.hpp"

namespace lbbart {

// Per-column range used for min-max scaling; original = min + v (max - min).
struct ColumnRange {
  double min = 0.0;
  double max = 1.0;
};

struct Provenance {
  std::string source;
  std::vector<std::string> steps;
  std::vector<ColumnRange> ranges;  // one per column; empty when not scaled
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
};

struct Dataset {
  Matrix X;
  std::vector<double> y;
  std::vector<std::string> names;
  Provenance provenance;

  std::size_t n() const { return y.size(); }
  std::size_t p() const { return X.cols(); }
  bool binary_response() const;

  // Throws std::invalid_argument when shapes disagree, n or p is zero, or a
  // covariate is missing or outside [0, 1].
  void validate() const;
};

std::string provenance_json(const Dataset& data);

/// Three-covariate single-tree design with block-uniform covariates and leaf
/// means 1, 3, 5. `n` must be a multiple of 3; `sigma` is the noise sd.
Dataset simulate_cart(std::size_t n, double sigma, Rng& rng);

/// Wisconsin breast cancer, original UCI layout: id, nine 1-10 predictors,
/// class (2 benign, 4 malignant). Rows with '?' are dropped, predictors are
/// min-max scaled, y = 1 for malignant. Throws when the cleaned row count
/// differs from `expected_rows` (pass nullopt to skip the check).
Dataset load_breast_cancer(const std::filesystem::path& path, std::optional<std::size_t> expected_rows = 683);

enum class SexFilter { kMale, kFemale, kAll };

SexFilter sex_filter_from_string(std::string_view name);
std::string_view to_string(SexFilter filter);

struct DiabetesOptions {
  SexFilter sex = SexFilter::kAll;
  // Categoricals with this many levels or more are dropped.
  std::size_t max_categories = 10;
  // Categoricals whose most frequent level covers more than this share are dropped.
  double max_top_share = 0.95;
  std::vector<std::string> drop_columns{"encounter_id", "patient_nbr"};
  std::string sex_column = "gender";
  std::string target_column = "readmitted";
  std::string positive_label = "<30";
  std::optional<std::size_t> expected_rows;
};

/// Diabetes 130-hospitals table: filters rows by sex, keeps numeric columns,
/// keeps categoricals passing the level-count and dominance filters, one-hot
/// encodes them, and min-max scales everything. y = 1 iff the target equals
/// `positive_label`. The realized feature list is recorded in provenance.
Dataset load_diabetes(const std::filesystem::path& path, const DiabetesOptions& options = {});

// CSV with a header of covariate names plus "y", and a JSON provenance sidecar
// at sidecar_path(csv).
void write_dataset(const Dataset& data, const std::filesystem::path& csv);
Dataset load_dataset_csv(const std::filesystem::path& csv);
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

// Rows drawn without replacement, kept in original order.
Dataset subsample(const Dataset& data, std::size_t n, Rng& rng);

// Undo the min-max scaling of column `j`.
double original_value(const Dataset& data, std::size_t j, double scaled);

// Splits one CSV line, honouring double quotes.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace lbbart
