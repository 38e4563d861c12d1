#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lbbart/calibration.hpp"
#include "lbbart/data.hpp"
#include "lbbart/sampler.hpp"
#include "lbbart/trace.hpp"
#include "lbbart/tree_prior.hpp"

namespace lbbart {

struct DatasetSpec {
  std::string kind = "simulate";  // simulate | breast-cancer | diabetes | csv
  std::size_t n = 300;            // simulate
  double sigma = 0.5;             // simulate: noise sd
  std::string path;
  std::optional<std::size_t> expected_rows;  // breast-cancer (default 683), diabetes
  std::string sex = "all";                   // diabetes
  std::optional<std::size_t> subsample;      // rows kept after loading
};

struct ModelSpec {
  std::string kind = "gaussian";  // gaussian | bernoulli
  // Gaussian: fixed noise variance; when absent it starts at the sample
  // variance of y.
  std::optional<double> sigma2;
  std::optional<bool> sample_sigma2;
  double k = 2.0;
  std::optional<double> mu_mean;
  std::optional<double> mu_var;
  // Bernoulli
  double alpha = 1.0;
  double beta = 1.0;
};

struct PriorConfig {
  std::string kind = "lb";  // lb | cl | lb-default
  double omega = 1.561;
  double gamma = 0.629;
  double alpha = 0.95;
  double beta = 2.0;
  std::string variant = "EL2";  // lb-default
};

struct Thresholds {
  double n_leaves = 9.0;
  double depth = 6.0;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ModelSpec model;
  PriorConfig prior;
  std::size_t trees = 1;
  std::size_t chains = 1;
  std::size_t iterations = 500;
  std::size_t burn_in = 250;
  std::size_t thinning = 1;
  std::optional<std::uint64_t> seed;
  std::size_t min_obs = 1;
  std::string split_values = "observed";
  unsigned max_leaves = 0;
  std::size_t threads = 0;  // 0: one per chain, capped by the hardware
  std::string output_dir = "lbbart-out";
  std::size_t prior_samples = 10000;
  Thresholds thresholds;

  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& config);

// lb-default is replaced by the calibrated LB prior.
PriorSpec resolve_prior(const PriorConfig& config);
Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed);
ObservationModel build_model(const ModelSpec& spec, const Dataset& data, std::size_t trees);

struct PriorSummary {
  std::size_t samples = 0;
  double mean_nl = 0.0;
  double pr_nl_above = 0.0;
  double mean_depth = 0.0;
  double pr_depth_above = 0.0;
};

struct PosteriorSummary {
  std::string label;  // chain id or "all"
  std::size_t samples = 0;
  double mean_nl = 0.0;
  double pr_nl_above = 0.0;
  double mean_depth = 0.0;
  double pr_depth_above = 0.0;
  double nl_ci_low = 0.0;
  double nl_ci_high = 0.0;
  double best_log_lik = 0.0;
  std::optional<std::size_t> best_misclassified;
  std::optional<double> best_missing_rate;
  bool single_sample = false;
};

// Leaf count and depth of a record, averaged over the trees of the ensemble.
double mean_leaves(const TraceRecord& r);
double mean_depth(const TraceRecord& r);

PriorSummary summarize_prior(const PriorSpec& prior, std::size_t samples, std::uint64_t seed,
                             const Thresholds& thresholds, unsigned max_leaves = 2048);

/// Posterior summaries from iterations burn_in + 1 onward: one entry per chain
/// (ascending id) followed by the pooled "all" entry. Best log-likelihood and
/// misclassification count range over every recorded iteration. The n_L
/// interval uses equal-tailed order statistics, so its ends are attained
/// values.
std::vector<PosteriorSummary> summarize_trace(const std::vector<TraceRecord>& records, std::size_t burn_in,
                                              const Thresholds& thresholds);

void write_summary_csv(const std::filesystem::path& path, const std::optional<PriorSummary>& prior,
                       const std::vector<PosteriorSummary>& rows);

// Per-iteration series: chain, iter, mean_nl, mean_depth, log_lik, missing_rate.
void write_series_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& records);

struct DistributionRow {
  std::string statistic;  // n_leaves | depth
  int value = 0;
  std::size_t count = 0;
  double pmf = 0.0;
  double cdf = 0.0;
};

// Empirical pmf and cdf of n_L and depth over `samples` prior draws.
std::vector<DistributionRow> prior_study(const PriorSpec& prior, std::size_t samples, std::uint64_t seed,
                                         unsigned max_leaves = 2048);
void write_distribution_csv(const std::filesystem::path& path, const std::vector<DistributionRow>& rows);

struct ExperimentResult {
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> chain_traces;
  std::filesystem::path merged_trace;
  std::vector<TraceRecord> records;  // merged, chain order
  PriorSummary prior;
  std::vector<PosteriorSummary> posterior;
};

/// Resolves the config, writes `config.resolved.json`, runs the chains in
/// parallel (one file per chain, merged in chain order), and writes
/// summary.csv and series.csv.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace lbbart
