// lbbart: command-line front end for simulation, fitting, prior studies,
// calibration, and trace summaries.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lbbart/calibration.hpp"
#include "lbbart/data.hpp"
#include "lbbart/experiment.hpp"
#include "lbbart/trace.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lbbart;

namespace {

std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

void write_snapshot(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path snapshot_for(const fs::path& output) {
  fs::path p = output;
  p += ".resolved.json";
  return p;
}

struct PriorFlags {
  std::string kind = "lb-default";
  std::optional<double> omega, gamma, alpha, beta;
  std::string variant = "EL2";

  void add(CLI::App* app) {
    app->add_option("--prior", kind, "lb | cl | lb-default")->check(CLI::IsMember({"lb", "cl", "lb-default"}));
    app->add_option("--omega", omega, "LB leaf-count penalty");
    app->add_option("--gamma", gamma, "LB imbalance penalty");
    app->add_option("--alpha", alpha, "CL base split probability");
    app->add_option("--beta", beta, "CL depth exponent");
    app->add_option("--variant", variant, "expected-loss variant for lb-default")->check(CLI::IsMember({"EL1", "EL2"}));
  }

  PriorConfig config() const {
    PriorConfig p;
    p.kind = kind;
    if (omega) p.omega = *omega;
    if (gamma) p.gamma = *gamma;
    if (alpha) p.alpha = *alpha;
    if (beta) p.beta = *beta;
    p.variant = variant;
    return p;
  }
};

void print_summary(const std::optional<PriorSummary>& prior, const std::vector<PosteriorSummary>& rows) {
  std::cout << std::fixed << std::setprecision(4);
  if (prior) {
    std::cout << "prior      E(n_L)=" << prior->mean_nl << "  Pr(n_L>t)=" << prior->pr_nl_above
              << "  E(D)=" << prior->mean_depth << "  Pr(D>t)=" << prior->pr_depth_above << '\n';
  }
  for (const auto& r : rows) {
    std::cout << "chain " << std::setw(4) << r.label << " samples=" << r.samples << "  E(n_L)=" << r.mean_nl
              << "  Pr(n_L>t)=" << r.pr_nl_above << "  E(D)=" << r.mean_depth << "  Pr(D>t)=" << r.pr_depth_above
              << "  95%=(" << r.nl_ci_low << ", " << r.nl_ci_high << ")  best_loglik=" << r.best_log_lik;
    if (r.best_misclassified) std::cout << "  best_missing=" << *r.best_misclassified;
    if (r.single_sample) std::cout << "  [single retained sample per chain]";
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian CART/BART with loss-based and classic tree priors"};
  app.require_subcommand(1);

  // simulate ------------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Generate the three-covariate simulation dataset");
  std::size_t sim_n = 300;
  double sim_sigma = 0.5;
  std::optional<std::uint64_t> sim_seed;
  fs::path sim_out = "simulated.csv";
  sim->add_option("-n,--n", sim_n, "rows (multiple of 3)");
  sim->add_option("--sigma", sim_sigma, "noise sd");
  sim->add_option("--seed", sim_seed, "master seed");
  sim->add_option("-o,--out", sim_out, "output CSV");

  // fit -----------------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "Run MCMC chains and write traces and summaries");
  std::optional<fs::path> config_path;
  PriorFlags fit_prior;
  std::optional<std::string> f_dataset, f_path, f_model, f_sex, f_split;
  std::optional<std::size_t> f_n, f_trees, f_chains, f_iter, f_burn, f_thin, f_min_obs, f_threads, f_subsample;
  std::optional<std::uint64_t> f_seed;
  std::optional<double> f_sigma;
  std::optional<fs::path> f_out;
  std::optional<unsigned> f_max_leaves;
  bool prior_flags_given = false;
  fit->add_option("-c,--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  fit_prior.add(fit);
  fit->add_option("--dataset", f_dataset, "simulate | breast-cancer | diabetes | csv");
  fit->add_option("--data-path", f_path, "input data file");
  fit->add_option("--sex", f_sex, "diabetes sex filter: all | male | female");
  fit->add_option("--subsample", f_subsample, "rows kept after loading");
  fit->add_option("--n", f_n, "simulated rows");
  fit->add_option("--sigma", f_sigma, "simulated noise sd");
  fit->add_option("--model", f_model, "gaussian | bernoulli");
  fit->add_option("--trees", f_trees, "trees in the ensemble (1 = CART)");
  fit->add_option("--chains", f_chains);
  fit->add_option("--iterations", f_iter);
  fit->add_option("--burn-in", f_burn);
  fit->add_option("--thinning", f_thin);
  fit->add_option("--seed", f_seed, "master seed (drawn and recorded when absent)");
  fit->add_option("--min-obs", f_min_obs, "minimum observations per leaf");
  fit->add_option("--split-values", f_split, "observed | continuous");
  fit->add_option("--max-leaves", f_max_leaves, "cap on leaves per tree (0 = none)");
  fit->add_option("--threads", f_threads, "worker threads (0 = one per chain)");
  fit->add_option("-o,--output-dir", f_out, "output directory");

  // prior-study ---------------------------------------------------------------
  auto* ps = app.add_subcommand("prior-study", "Empirical n_L and depth distributions under a prior");
  PriorFlags ps_prior;
  std::size_t ps_samples = 10000;
  std::optional<std::uint64_t> ps_seed;
  fs::path ps_out = "prior_distribution.csv";
  double ps_nl_t = 9, ps_d_t = 6;
  ps_prior.add(ps);
  ps->add_option("--samples", ps_samples)->check(CLI::PositiveNumber);
  ps->add_option("--seed", ps_seed);
  ps->add_option("-o,--out", ps_out, "distribution CSV");
  ps->add_option("--nl-threshold", ps_nl_t);
  ps->add_option("--depth-threshold", ps_d_t);

  // calibrate -----------------------------------------------------------------
  auto* cal = app.add_subcommand("calibrate", "Maximize the expected loss to obtain default LB parameters");
  ExpectedLossSpec cal_spec;
  std::string cal_variant = "EL2";
  std::vector<double> cal_omega{1.0, 2.0}, cal_gamma{0.0, 4.0};
  std::optional<fs::path> cal_surface;
  cal->add_option("--variant", cal_variant)->check(CLI::IsMember({"EL1", "EL2"}));
  cal->add_option("--omega-range", cal_omega, "lo hi")->expected(2);
  cal->add_option("--gamma-range", cal_gamma, "lo hi")->expected(2);
  cal->add_option("--grid-step", cal_spec.grid_step);
  cal->add_option("--refine-tol", cal_spec.refine_tol);
  cal->add_option("--truncation-tol", cal_spec.truncation_tol);
  cal->add_option("--surface", cal_surface, "write the loss surface CSV (omega,gamma,loss)");
  fs::path cal_snapshot = "calibration.resolved.json";
  cal->add_option("--snapshot", cal_snapshot, "resolved-config snapshot (default: next to --surface)");

  // summarize -----------------------------------------------------------------
  auto* summ = app.add_subcommand("summarize", "Summaries from JSON-lines trace files");
  std::vector<fs::path> trace_files;
  std::size_t s_burn = 250;
  double s_nl_t = 9, s_d_t = 6;
  std::optional<fs::path> s_out, s_series;
  summ->add_option("traces", trace_files, "trace files")->required()->check(CLI::ExistingFile);
  summ->add_option("--burn-in", s_burn);
  summ->add_option("--nl-threshold", s_nl_t);
  summ->add_option("--depth-threshold", s_d_t);
  summ->add_option("-o,--out", s_out, "summary CSV");
  summ->add_option("--series", s_series, "per-iteration series CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const std::uint64_t seed = sim_seed.value_or(fresh_seed());
      Rng rng = make_stream(seed, kDataStream);
      const Dataset d = simulate_cart(sim_n, sim_sigma, rng);
      write_dataset(d, sim_out);
      write_snapshot(snapshot_for(sim_out), json{{"command", "simulate"}, {"n", sim_n}, {"sigma", sim_sigma}, {"seed", seed}});
      std::cout << "wrote " << d.n() << " rows to " << sim_out.string() << " (seed " << seed << ")\n";
    } else if (*fit) {
      ExperimentConfig c = config_path ? load_experiment_config(*config_path) : ExperimentConfig{};
      for (const char* flag : {"--prior", "--omega", "--gamma", "--alpha", "--beta", "--variant"})
        prior_flags_given = prior_flags_given || fit->count(flag) > 0;
      if (prior_flags_given) {
        PriorConfig p = c.prior;
        if (fit->count("--prior")) p.kind = fit_prior.kind;
        if (fit_prior.omega) p.omega = *fit_prior.omega;
        if (fit_prior.gamma) p.gamma = *fit_prior.gamma;
        if (fit_prior.alpha) p.alpha = *fit_prior.alpha;
        if (fit_prior.beta) p.beta = *fit_prior.beta;
        if (fit->count("--variant")) p.variant = fit_prior.variant;
        c.prior = p;
      }
      if (f_dataset) c.dataset.kind = *f_dataset;
      if (f_path) c.dataset.path = *f_path;
      if (f_sex) c.dataset.sex = *f_sex;
      if (f_subsample) c.dataset.subsample = *f_subsample;
      if (f_n) c.dataset.n = *f_n;
      if (f_sigma) c.dataset.sigma = *f_sigma;
      if (f_model) c.model.kind = *f_model;
      if (f_trees) c.trees = *f_trees;
      if (f_chains) c.chains = *f_chains;
      if (f_iter) c.iterations = *f_iter;
      if (f_burn) c.burn_in = *f_burn;
      if (f_thin) c.thinning = *f_thin;
      if (f_seed) c.seed = *f_seed;
      if (f_min_obs) c.min_obs = *f_min_obs;
      if (f_split) c.split_values = *f_split;
      if (f_max_leaves) c.max_leaves = *f_max_leaves;
      if (f_threads) c.threads = *f_threads;
      if (f_out) c.output_dir = f_out->string();
      if (!c.seed) c.seed = fresh_seed();
      const auto result = run_experiment(c);
      std::cout << "seed " << *c.seed << "; outputs in " << result.output_dir.string() << '\n';
      print_summary(result.prior, result.posterior);
    } else if (*ps) {
      const std::uint64_t seed = ps_seed.value_or(fresh_seed());
      const PriorConfig pc = ps_prior.config();
      const PriorSpec prior = resolve_prior(pc);
      const auto rows = prior_study(prior, ps_samples, seed);
      write_distribution_csv(ps_out, rows);
      const auto s = summarize_prior(prior, ps_samples, seed, Thresholds{ps_nl_t, ps_d_t});
      write_snapshot(snapshot_for(ps_out), json{{"command", "prior-study"},
                                                {"prior", describe(prior)},
                                                {"samples", ps_samples},
                                                {"seed", seed},
                                                {"thresholds", {{"n_leaves", ps_nl_t}, {"depth", ps_d_t}}}});
      std::cout << describe(prior) << " seed " << seed << '\n';
      print_summary(s, {});
    } else if (*cal) {
      cal_spec.variant = loss_variant_from_string(cal_variant);
      cal_spec.omega_range = {cal_omega[0], cal_omega[1]};
      cal_spec.gamma_range = {cal_gamma[0], cal_gamma[1]};
      const Optimum o = maximize_expected_loss(cal_spec);
      std::cout << std::setprecision(6) << "variant=" << cal_variant << " omega=" << o.omega << " gamma=" << o.gamma
                << " expected_loss=" << o.value << '\n';
      if (cal_surface) {
        if (cal_surface->has_parent_path()) fs::create_directories(cal_surface->parent_path());
        std::ofstream out(*cal_surface, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + cal_surface->string());
        out << "omega,gamma,loss\n" << std::setprecision(17);
        for (const auto& p : loss_surface(cal_spec)) out << p.omega << ',' << p.gamma << ',' << p.loss << '\n';
      }
      const bool snapshot_given = cal->count("--snapshot") > 0;
      write_snapshot(cal_surface && !snapshot_given ? snapshot_for(*cal_surface) : cal_snapshot,
                     json{{"command", "calibrate"},
                          {"variant", cal_variant},
                          {"omega_range", cal_omega},
                          {"gamma_range", cal_gamma},
                          {"grid_step", cal_spec.grid_step},
                          {"refine_tol", cal_spec.refine_tol},
                          {"truncation_tol", cal_spec.truncation_tol},
                          {"surface", cal_surface ? json(cal_surface->string()) : json(nullptr)},
                          {"optimum", {{"omega", o.omega}, {"gamma", o.gamma}, {"value", o.value}}}});
    } else if (*summ) {
      std::vector<TraceRecord> records;
      for (const auto& f : trace_files) {
        auto part = read_trace(f);
        records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
      }
      const auto rows = summarize_trace(records, s_burn, Thresholds{s_nl_t, s_d_t});
      if (s_out) write_summary_csv(*s_out, std::nullopt, rows);
      if (s_series) write_series_csv(*s_series, records);
      std::vector<std::string> names;
      for (const auto& f : trace_files) names.push_back(f.string());
      write_snapshot(snapshot_for(s_out ? *s_out : fs::path("summary")),
                     json{{"command", "summarize"},
                          {"traces", names},
                          {"burn_in", s_burn},
                          {"thresholds", {{"n_leaves", s_nl_t}, {"depth", s_d_t}}},
                          {"out", s_out ? json(s_out->string()) : json(nullptr)},
                          {"series", s_series ? json(s_series->string()) : json(nullptr)}});
      print_summary(std::nullopt, rows);
    }
  } catch (const BoundaryMaximumError& e) {
    std::cerr << "lbbart: no interior maximum: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "lbbart: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
