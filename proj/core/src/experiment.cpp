#include "lbbart/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace lbbart {
namespace {

using nlohmann::json;

template <typename T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
void read_val(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw std::invalid_argument("unknown key '" + key + "' in " + where);
    }
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Equal-tailed interval from attained order statistics.
std::pair<double, double> central_interval(std::vector<double> values, double level = 0.95) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const double tail = 0.5 * (1.0 - level);
  auto at = [&](double q) {
    const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(q * n - 1e-9)));
    return values[std::min(values.size(), k) - 1];
  };
  return {at(tail), at(1.0 - tail)};
}

PosteriorSummary summarize_group(const std::string& label, const std::vector<const TraceRecord*>& all,
                                 std::size_t burn_in, const Thresholds& th, std::size_t chains) {
  PosteriorSummary s;
  s.label = label;
  std::vector<double> nl;
  double depth_sum = 0.0;
  std::size_t nl_above = 0, depth_above = 0;
  s.best_log_lik = -std::numeric_limits<double>::infinity();
  for (const auto* r : all) {
    if (std::isfinite(r->log_lik) || r->log_lik == -std::numeric_limits<double>::infinity()) {
      s.best_log_lik = std::max(s.best_log_lik, r->log_lik);
    }
    if (r->misclassified) {
      if (!s.best_misclassified || *r->misclassified < *s.best_misclassified) {
        s.best_misclassified = r->misclassified;
        s.best_missing_rate = r->missing_rate;
      }
    }
    if (r->iter <= burn_in) continue;
    const double l = mean_leaves(*r);
    const double d = mean_depth(*r);
    nl.push_back(l);
    depth_sum += d;
    nl_above += l > th.n_leaves;
    depth_above += d > th.depth;
  }
  if (nl.empty()) throw std::invalid_argument("no samples after burn-in for " + label);
  const double n = static_cast<double>(nl.size());
  s.samples = nl.size();
  double nl_sum = 0.0;
  for (double v : nl) nl_sum += v;
  s.mean_nl = nl_sum / n;
  s.mean_depth = depth_sum / n;
  s.pr_nl_above = static_cast<double>(nl_above) / n;
  s.pr_depth_above = static_cast<double>(depth_above) / n;
  std::tie(s.nl_ci_low, s.nl_ci_high) = central_interval(nl);
  s.single_sample = s.samples == chains;
  return s;
}

std::filesystem::path chain_trace_path(const std::filesystem::path& dir, std::size_t chain) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "trace_chain_%03zu.jsonl", chain);
  return dir / buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (chains < 1) throw std::invalid_argument("chains must be >= 1");
  if (trees < 1) throw std::invalid_argument("trees must be >= 1");
  if (!(iterations > burn_in)) throw std::invalid_argument("iterations must exceed burn_in");
  if (thinning < 1) throw std::invalid_argument("thinning must be >= 1");
  if (!seed) throw std::invalid_argument("seed is required");
  if (min_obs < 1) throw std::invalid_argument("min_obs must be >= 1");
  split_value_mode_from_string(split_values);
  if (model.kind != "gaussian" && model.kind != "bernoulli") throw std::invalid_argument("model.kind must be gaussian or bernoulli");
  if (prior.kind != "lb" && prior.kind != "cl" && prior.kind != "lb-default") {
    throw std::invalid_argument("prior.kind must be lb, cl or lb-default");
  }
  if (prior.kind == "lb") LossBasedPrior{prior.omega, prior.gamma}.validate();
  if (prior.kind == "cl") ClassicPrior{prior.alpha, prior.beta}.validate();
  if (prior.kind == "lb-default") loss_variant_from_string(prior.variant);
  const auto& k = dataset.kind;
  if (k != "simulate" && k != "breast-cancer" && k != "diabetes" && k != "csv") {
    throw std::invalid_argument("dataset.kind must be simulate, breast-cancer, diabetes or csv");
  }
  if (k != "simulate" && dataset.path.empty()) throw std::invalid_argument("dataset.path is required for " + k);
  if (k == "diabetes") sex_filter_from_string(dataset.sex);
  if (prior_samples < 1) throw std::invalid_argument("prior_samples must be >= 1");
  if (output_dir.empty()) throw std::invalid_argument("output_dir must be set");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  reject_unknown(j,
                 {"dataset", "model", "prior", "trees", "chains", "iterations", "burn_in", "thinning", "seed",
                  "min_obs", "split_values", "max_leaves", "threads", "output_dir", "prior_samples", "thresholds"},
                 "config");
  ExperimentConfig c;
  try {
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      reject_unknown(d, {"kind", "n", "sigma", "path", "expected_rows", "sex", "subsample"}, "dataset");
      read_val(d, "kind", c.dataset.kind);
      read_val(d, "n", c.dataset.n);
      read_val(d, "sigma", c.dataset.sigma);
      read_val(d, "path", c.dataset.path);
      read_opt(d, "expected_rows", c.dataset.expected_rows);
      read_val(d, "sex", c.dataset.sex);
      read_opt(d, "subsample", c.dataset.subsample);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      reject_unknown(m, {"kind", "sigma2", "sample_sigma2", "k", "mu_mean", "mu_var", "alpha", "beta"}, "model");
      read_val(m, "kind", c.model.kind);
      read_opt(m, "sigma2", c.model.sigma2);
      read_opt(m, "sample_sigma2", c.model.sample_sigma2);
      read_val(m, "k", c.model.k);
      read_opt(m, "mu_mean", c.model.mu_mean);
      read_opt(m, "mu_var", c.model.mu_var);
      read_val(m, "alpha", c.model.alpha);
      read_val(m, "beta", c.model.beta);
    }
    if (j.contains("prior")) {
      const auto& p = j.at("prior");
      reject_unknown(p, {"kind", "omega", "gamma", "alpha", "beta", "variant"}, "prior");
      read_val(p, "kind", c.prior.kind);
      read_val(p, "omega", c.prior.omega);
      read_val(p, "gamma", c.prior.gamma);
      read_val(p, "alpha", c.prior.alpha);
      read_val(p, "beta", c.prior.beta);
      read_val(p, "variant", c.prior.variant);
    }
    read_val(j, "trees", c.trees);
    read_val(j, "chains", c.chains);
    read_val(j, "iterations", c.iterations);
    read_val(j, "burn_in", c.burn_in);
    read_val(j, "thinning", c.thinning);
    read_opt(j, "seed", c.seed);
    read_val(j, "min_obs", c.min_obs);
    read_val(j, "split_values", c.split_values);
    read_val(j, "max_leaves", c.max_leaves);
    read_val(j, "threads", c.threads);
    read_val(j, "output_dir", c.output_dir);
    read_val(j, "prior_samples", c.prior_samples);
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      reject_unknown(t, {"n_leaves", "depth"}, "thresholds");
      read_val(t, "n_leaves", c.thresholds.n_leaves);
      read_val(t, "depth", c.thresholds.depth);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config has a field of the wrong type: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = {{"kind", c.dataset.kind},
                  {"n", c.dataset.n},
                  {"sigma", c.dataset.sigma},
                  {"path", c.dataset.path},
                  {"expected_rows", opt_json(c.dataset.expected_rows)},
                  {"sex", c.dataset.sex},
                  {"subsample", opt_json(c.dataset.subsample)}};
  j["model"] = {{"kind", c.model.kind},
                {"sigma2", opt_json(c.model.sigma2)},
                {"sample_sigma2", opt_json(c.model.sample_sigma2)},
                {"k", c.model.k},
                {"mu_mean", opt_json(c.model.mu_mean)},
                {"mu_var", opt_json(c.model.mu_var)},
                {"alpha", c.model.alpha},
                {"beta", c.model.beta}};
  j["prior"] = {{"kind", c.prior.kind},       {"omega", c.prior.omega}, {"gamma", c.prior.gamma},
                {"alpha", c.prior.alpha},     {"beta", c.prior.beta},   {"variant", c.prior.variant}};
  j["trees"] = c.trees;
  j["chains"] = c.chains;
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["thinning"] = c.thinning;
  j["seed"] = opt_json(c.seed);
  j["min_obs"] = c.min_obs;
  j["split_values"] = c.split_values;
  j["max_leaves"] = c.max_leaves;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  j["prior_samples"] = c.prior_samples;
  j["thresholds"] = {{"n_leaves", c.thresholds.n_leaves}, {"depth", c.thresholds.depth}};
  return j.dump(2);
}

PriorSpec resolve_prior(const PriorConfig& config) {
  if (config.kind == "cl") return ClassicPrior{config.alpha, config.beta};
  if (config.kind == "lb") return LossBasedPrior{config.omega, config.gamma};
  if (config.kind == "lb-default") {
    ExpectedLossSpec spec;
    spec.variant = loss_variant_from_string(config.variant);
    const auto opt = maximize_expected_loss(spec);
    return LossBasedPrior{opt.omega, opt.gamma};
  }
  throw std::invalid_argument("unknown prior kind: " + config.kind);
}

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  Rng rng = make_stream(seed, kDataStream);
  Dataset d;
  if (spec.kind == "simulate") {
    d = simulate_cart(spec.n, spec.sigma, rng);
  } else if (spec.kind == "breast-cancer") {
    d = load_breast_cancer(spec.path, spec.expected_rows.value_or(683));
  } else if (spec.kind == "diabetes") {
    DiabetesOptions opt;
    opt.sex = sex_filter_from_string(spec.sex);
    opt.expected_rows = spec.expected_rows;
    d = load_diabetes(spec.path, opt);
  } else if (spec.kind == "csv") {
    d = load_dataset_csv(spec.path);
  } else {
    throw std::invalid_argument("unknown dataset kind: " + spec.kind);
  }
  if (spec.subsample && *spec.subsample < d.n()) {
    Rng sub = make_stream(seed, kSubsampleStream);
    d = subsample(d, *spec.subsample, sub);
  }
  d.validate();
  return d;
}

ObservationModel build_model(const ModelSpec& spec, const Dataset& data, std::size_t trees) {
  if (spec.kind == "bernoulli") {
    BernoulliModel b{spec.alpha, spec.beta};
    b.validate();
    return b;
  }
  if (spec.kind != "gaussian") throw std::invalid_argument("unknown model kind: " + spec.kind);
  GaussianModel g = default_gaussian_model(data.y, trees, spec.k);
  if (spec.sigma2) g.sigma2 = *spec.sigma2;
  if (spec.mu_mean) g.mu_mean = *spec.mu_mean;
  if (spec.mu_var) g.mu_var = *spec.mu_var;
  g.validate();
  return g;
}

double mean_leaves(const TraceRecord& r) {
  double s = 0.0;
  for (int v : r.n_leaves) s += v;
  return s / static_cast<double>(r.n_leaves.size());
}

double mean_depth(const TraceRecord& r) {
  double s = 0.0;
  for (int v : r.depth) s += v;
  return s / static_cast<double>(r.depth.size());
}

PriorSummary summarize_prior(const PriorSpec& prior, std::size_t samples, std::uint64_t seed,
                             const Thresholds& thresholds, unsigned max_leaves) {
  if (samples == 0) throw std::invalid_argument("prior samples must be >= 1");
  Rng rng = make_stream(seed, kPriorStudyStream);
  PriorSummary s;
  s.samples = samples;
  for (std::size_t i = 0; i < samples; ++i) {
    const auto st = sample_tree_topology(prior, rng, max_leaves).stats();
    s.mean_nl += st.n_leaves;
    s.mean_depth += st.depth;
    s.pr_nl_above += st.n_leaves > thresholds.n_leaves;
    s.pr_depth_above += st.depth > thresholds.depth;
  }
  const double n = static_cast<double>(samples);
  s.mean_nl /= n;
  s.mean_depth /= n;
  s.pr_nl_above /= n;
  s.pr_depth_above /= n;
  return s;
}

std::vector<PosteriorSummary> summarize_trace(const std::vector<TraceRecord>& records, std::size_t burn_in,
                                              const Thresholds& thresholds) {
  if (records.empty()) throw std::invalid_argument("empty trace");
  std::map<int, std::vector<const TraceRecord*>> by_chain;
  std::vector<const TraceRecord*> all;
  for (const auto& r : records) {
    by_chain[r.chain].push_back(&r);
    all.push_back(&r);
  }
  std::vector<PosteriorSummary> out;
  for (const auto& [chain, recs] : by_chain) {
    out.push_back(summarize_group(std::to_string(chain), recs, burn_in, thresholds, 1));
  }
  out.push_back(summarize_group("all", all, burn_in, thresholds, by_chain.size()));
  return out;
}

void write_summary_csv(const std::filesystem::path& path, const std::optional<PriorSummary>& prior,
                       const std::vector<PosteriorSummary>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "chain,samples,prior_mean_nl,prior_pr_nl_above,prior_mean_depth,prior_pr_depth_above,"
         "post_mean_nl,post_pr_nl_above,post_mean_depth,post_pr_depth_above,nl_ci_low,nl_ci_high,"
         "best_log_lik,best_misclassified,best_missing_rate,single_sample\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.samples << ',';
    if (prior) {
      out << format_double(prior->mean_nl) << ',' << format_double(prior->pr_nl_above) << ','
          << format_double(prior->mean_depth) << ',' << format_double(prior->pr_depth_above) << ',';
    } else {
      out << ",,,,";
    }
    out << format_double(r.mean_nl) << ',' << format_double(r.pr_nl_above) << ',' << format_double(r.mean_depth)
        << ',' << format_double(r.pr_depth_above) << ',' << format_double(r.nl_ci_low) << ','
        << format_double(r.nl_ci_high) << ',' << format_double(r.best_log_lik) << ',';
    if (r.best_misclassified) out << *r.best_misclassified;
    out << ',';
    if (r.best_missing_rate) out << format_double(*r.best_missing_rate);
    out << ',' << (r.single_sample ? 1 : 0) << '\n';
  }
}

void write_series_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "chain,iter,mean_nl,mean_depth,log_lik,missing_rate\n";
  for (const auto& r : records) {
    out << r.chain << ',' << r.iter << ',' << format_double(mean_leaves(r)) << ',' << format_double(mean_depth(r))
        << ',' << format_double(r.log_lik) << ',';
    if (r.missing_rate) out << format_double(*r.missing_rate);
    out << '\n';
  }
}

std::vector<DistributionRow> prior_study(const PriorSpec& prior, std::size_t samples, std::uint64_t seed,
                                         unsigned max_leaves) {
  if (samples == 0) throw std::invalid_argument("prior_study: samples must be >= 1");
  Rng rng = make_stream(seed, kPriorStudyStream);
  std::map<int, std::size_t> nl, depth;
  for (std::size_t i = 0; i < samples; ++i) {
    const auto st = sample_tree_topology(prior, rng, max_leaves).stats();
    ++nl[st.n_leaves];
    ++depth[st.depth];
  }
  std::vector<DistributionRow> rows;
  auto emit = [&](const std::string& name, const std::map<int, std::size_t>& counts) {
    std::size_t cum = 0;
    for (const auto& [value, count] : counts) {
      cum += count;
      rows.push_back({name, value, count, static_cast<double>(count) / static_cast<double>(samples),
                      static_cast<double>(cum) / static_cast<double>(samples)});
    }
  };
  emit("n_leaves", nl);
  emit("depth", depth);
  return rows;
}

void write_distribution_csv(const std::filesystem::path& path, const std::vector<DistributionRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "statistic,value,count,pmf,cdf\n";
  for (const auto& r : rows) {
    out << r.statistic << ',' << r.value << ',' << r.count << ',' << format_double(r.pmf) << ','
        << format_double(r.cdf) << '\n';
  }
}

ExperimentResult run_experiment(const ExperimentConfig& input) {
  input.validate();
  ExperimentConfig config = input;
  const std::uint64_t seed = *config.seed;

  const PriorSpec prior = resolve_prior(config.prior);
  if (config.prior.kind == "lb-default") {
    const auto& lb = std::get<LossBasedPrior>(prior);
    config.prior.kind = "lb";
    config.prior.omega = lb.omega;
    config.prior.gamma = lb.gamma;
  }
  const Dataset data = load_dataset(config.dataset, seed);
  const ObservationModel model = build_model(config.model, data, config.trees);
  if (const auto* g = std::get_if<GaussianModel>(&model)) {
    config.model.sigma2 = g->sigma2;
    config.model.mu_mean = g->mu_mean;
    config.model.mu_var = g->mu_var;
  }

  ExperimentResult result;
  result.output_dir = config.output_dir;
  std::filesystem::create_directories(result.output_dir);
  {
    std::ofstream snap(result.output_dir / "config.resolved.json", std::ios::binary);
    if (!snap) throw std::runtime_error("cannot write resolved config in " + result.output_dir.string());
    snap << to_json(config) << '\n';
  }
  {
    std::ofstream prov(result.output_dir / "dataset.provenance.json", std::ios::binary);
    prov << provenance_json(data) << '\n';
  }

  ChainConfig chain_config;
  chain_config.iterations = config.iterations;
  chain_config.thinning = config.thinning;
  chain_config.sampler.rules.min_obs = config.min_obs;
  chain_config.sampler.rules.mode = split_value_mode_from_string(config.split_values);
  chain_config.sampler.max_leaves = config.max_leaves;
  chain_config.sample_sigma2 = config.model.sample_sigma2;
  chain_config.probit_k = config.model.k;

  std::vector<std::vector<TraceRecord>> traces(config.chains);
  result.chain_traces.resize(config.chains);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= config.chains) return;
      try {
        ChainConfig cc = chain_config;
        cc.chain_id = static_cast<int>(c);
        auto state = run_bart_chain(data.X, data.y, model, prior, config.trees, cc, make_stream(seed, c));
        const auto path = chain_trace_path(result.output_dir, c);
        write_trace(path, state.trace);
        result.chain_traces[c] = path;
        traces[c] = std::move(state.trace);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = config.chains;
      }
    }
  };
  std::size_t workers = config.threads;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, config.chains);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  for (auto& t : traces) {
    for (auto& r : t) result.records.push_back(std::move(r));
  }
  result.merged_trace = result.output_dir / "trace.jsonl";
  write_trace(result.merged_trace, result.records);

  result.prior = summarize_prior(prior, config.prior_samples, seed, config.thresholds);
  result.posterior = summarize_trace(result.records, config.burn_in, config.thresholds);
  write_summary_csv(result.output_dir / "summary.csv", result.prior, result.posterior);
  write_series_csv(result.output_dir / "series.csv", result.records);
  return result;
}

}  // namespace lbbart
