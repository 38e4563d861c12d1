#include "lbbart/sampler.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lbbart {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_count(std::size_t n) { return std::log(static_cast<double>(n)); }

bool is_binary(std::span<const double> y) {
  for (double v : y) {
    if (v != 0.0 && v != 1.0) return false;
  }
  return true;
}

std::vector<double> fitted_values(const Tree& tree, const Matrix& X) {
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = tree.evaluate(X.row(i));
  return out;
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

enum class ChainKind { kGaussian, kBetaBernoulli, kProbit };

struct Ensemble {
  const Matrix& X;
  std::span<const double> y;
  ChainKind kind;
  std::vector<std::vector<double>> fits;
};

TraceRecord make_record(const ChainState& state, const Ensemble& ens, int chain, const std::vector<StepResult>* steps) {
  TraceRecord r;
  r.chain = chain;
  r.iter = state.iteration;
  const std::size_t m = state.trees.size();
  for (const auto& t : state.trees) {
    r.n_leaves.push_back(t.stats().n_leaves);
    r.delta.push_back(t.stats().delta);
    r.depth.push_back(t.stats().depth);
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (steps) {
      const auto& s = (*steps)[j];
      r.accepted.push_back(s.accepted);
      r.forced.push_back(s.forced_self);
      r.move.emplace_back(to_string(s.kind));
    } else {
      r.accepted.push_back(false);
      r.forced.push_back(false);
      r.move.emplace_back("NONE");
    }
  }

  const std::size_t n = ens.y.size();
  std::vector<double> total(n, 0.0);
  for (const auto& f : ens.fits) {
    for (std::size_t i = 0; i < n; ++i) total[i] += f[i];
  }
  if (ens.kind == ChainKind::kGaussian) {
    r.log_lik = gaussian_log_likelihood(total, ens.y, state.sigma2);
    r.sigma2 = state.sigma2;
  } else {
    if (ens.kind == ChainKind::kProbit) {
      for (double& v : total) v = standard_normal_cdf(v);
    }
    r.log_lik = bernoulli_log_likelihood(total, ens.y);
    const std::size_t wrong = misclassified(total, ens.y);
    r.misclassified = wrong;
    r.missing_rate = static_cast<double>(wrong) / static_cast<double>(n);
  }
  return r;
}

ChainState run_chain(const Matrix& X, std::span<const double> y, const ObservationModel& model,
                     const PriorSpec& prior, std::size_t m, const ChainConfig& config, Rng rng,
                     const TraceSink& sink) {
  if (m == 0) throw std::invalid_argument("number of trees must be >= 1");
  if (y.empty()) throw std::invalid_argument("empty dataset");
  if (X.rows() != y.size()) throw std::invalid_argument("X and y have different row counts");
  if (config.thinning == 0) throw std::invalid_argument("thinning must be >= 1");
  std::visit([](const auto& p) { p.validate(); }, prior);

  const bool gaussian = std::holds_alternative<GaussianModel>(model);
  if (gaussian) {
    std::get<GaussianModel>(model).validate();
    if (is_binary(y)) throw std::invalid_argument("binary response given to a Gaussian model; use bernoulli");
  } else {
    std::get<BernoulliModel>(model).validate();
    if (!is_binary(y)) throw std::invalid_argument("bernoulli model needs a 0/1 response");
  }

  const ChainKind kind = gaussian ? ChainKind::kGaussian : (m == 1 ? ChainKind::kBetaBernoulli : ChainKind::kProbit);
  const std::size_t n = y.size();

  bool draw_sigma2 = false;
  if (gaussian) {
    const auto& g = std::get<GaussianModel>(model);
    draw_sigma2 = config.sample_sigma2.value_or(m > 1 && g.sigma_prior.has_value());
    if (draw_sigma2 && !g.sigma_prior) throw std::invalid_argument("sigma^2 sampling needs an inverse-gamma prior");
  } else if (config.sample_sigma2.value_or(false)) {
    throw std::invalid_argument("sigma^2 sampling applies to Gaussian models only");
  }

  ChainState state{std::vector<Tree>(m), 1.0, 0, std::move(rng), {}};
  Ensemble ens{X, y, kind, std::vector<std::vector<double>>(m, std::vector<double>(n, 0.0))};

  GaussianModel latent_model;  // probit: unit noise, leaf sd 3 / (k sqrt(m))
  if (kind == ChainKind::kProbit) {
    if (!(config.probit_k > 0.0)) throw std::invalid_argument("probit_k must be > 0");
    const double sd = 3.0 / (config.probit_k * std::sqrt(static_cast<double>(m)));
    latent_model.sigma2 = 1.0;
    latent_model.mu_mean = 0.0;
    latent_model.mu_var = sd * sd;
  }

  double start_value = 0.0;
  if (kind == ChainKind::kGaussian) {
    state.sigma2 = std::get<GaussianModel>(model).sigma2;
    start_value = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n) / static_cast<double>(m);
  } else if (kind == ChainKind::kBetaBernoulli) {
    const auto& b = std::get<BernoulliModel>(model);
    const double s = std::accumulate(y.begin(), y.end(), 0.0);
    start_value = (b.alpha + s) / (b.alpha + b.beta + static_cast<double>(n));
  }
  for (std::size_t j = 0; j < m; ++j) {
    state.trees[j].set_value(Tree::root(), start_value);
    std::fill(ens.fits[j].begin(), ens.fits[j].end(), start_value);
  }

  auto emit = [&](TraceRecord record) {
    if (sink) sink(record);
    if (config.keep_trace) state.trace.push_back(std::move(record));
  };
  emit(make_record(state, ens, config.chain_id, nullptr));

  std::vector<StepResult> steps(m);
  std::vector<double> latent(kind == ChainKind::kProbit ? n : 0);
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    state.iteration = it;

    if (kind == ChainKind::kProbit) {
      for (std::size_t i = 0; i < n; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < m; ++j) mu += ens.fits[j][i];
        latent[i] = y[i] > 0.5 ? mu + truncated_normal_above(-mu, state.rng) : mu - truncated_normal_above(mu, state.rng);
      }
    }

    for (std::size_t j = 0; j < m; ++j) {
      Tree& tree = state.trees[j];
      std::vector<double> values;
      if (kind == ChainKind::kBetaBernoulli) {
        const auto& b = std::get<BernoulliModel>(model);
        steps[j] = mh_step(tree, X, y, b, prior, config.sampler, state.rng);
        values = sample_leaf_values(tree, y, X, b, state.rng);
      } else {
        GaussianModel g = kind == ChainKind::kGaussian ? std::get<GaussianModel>(model) : latent_model;
        if (kind == ChainKind::kGaussian) g.sigma2 = state.sigma2;
        const auto residual = partial_residual(kind == ChainKind::kGaussian ? y : std::span<const double>(latent),
                                               ens.fits, j);
        steps[j] = mh_step(tree, X, residual, g, prior, config.sampler, state.rng);
        values = sample_leaf_values(tree, residual, X, g, state.rng);
      }
      tree.set_leaf_values(values);
      ens.fits[j] = fitted_values(tree, X);
    }

    if (draw_sigma2) {
      double ssr = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double fit = 0.0;
        for (std::size_t j = 0; j < m; ++j) fit += ens.fits[j][i];
        ssr += (y[i] - fit) * (y[i] - fit);
      }
      state.sigma2 = sample_sigma2(ssr, n, *std::get<GaussianModel>(model).sigma_prior, state.rng);
    }

    if (it % config.thinning == 0) emit(make_record(state, ens, config.chain_id, &steps));
  }
  return state;
}

}  // namespace

std::vector<MoveKind> available_moves(const Tree& tree, const SamplerConfig& config) {
  std::vector<MoveKind> kinds;
  const int n = tree.n_leaves();
  if (config.max_leaves == 0 || static_cast<unsigned>(n) < config.max_leaves) kinds.push_back(MoveKind::kGrow);
  if (n >= 2) kinds.push_back(MoveKind::kPrune);
  if (n >= 3) {
    // A parent-child internal pair exists iff some internal node has an
    // internal child, i.e. the tree has >= 2 internal nodes.
    kinds.push_back(MoveKind::kSwap);
  }
  if (n >= 2) kinds.push_back(MoveKind::kChange);
  return kinds;
}

Proposal propose(const Tree& tree, const Matrix& X, Rng& rng, const SamplerConfig& config) {
  Proposal p;
  p.candidate = tree;
  const auto kinds = available_moves(tree, config);
  if (kinds.empty()) {
    p.forced_self = true;
    return p;
  }
  const double log_kind = -log_count(kinds.size());
  p.move.kind = kinds[uniform_index(rng, kinds.size())];

  switch (p.move.kind) {
    case MoveKind::kGrow: {
      const auto leaves = tree.leaves();
      const NodeId leaf = leaves[uniform_index(rng, leaves.size())];
      p.move.node = leaf;
      const auto rows = observations_at(tree, X, leaf);
      const NodeRules rules(X, rows, config.rules);
      if (rules.empty()) {
        p.forced_self = true;
        return p;
      }
      p.move.rule = rules.draw(rng);
      const double log_rule = rules.log_density(p.move.rule);
      p.candidate.grow(leaf, p.move.rule);
      p.log_q_forward = log_kind - log_count(leaves.size()) + log_rule;
      p.log_q_reverse = -log_count(available_moves(p.candidate, config).size()) -
                        log_count(p.candidate.prunable_nodes().size());
      p.log_rule_prior_candidate = log_rule;
      break;
    }
    case MoveKind::kPrune: {
      const auto prunable = tree.prunable_nodes();
      const NodeId node = prunable[uniform_index(rng, prunable.size())];
      p.move.node = node;
      const auto rows = observations_at(tree, X, node);
      const double log_rule = rule_log_density(X, rows, tree.node(node).rule, config.rules);
      p.candidate.prune(node);
      p.log_q_forward = log_kind - log_count(prunable.size());
      p.log_q_reverse = -log_count(available_moves(p.candidate, config).size()) -
                        log_count(static_cast<std::size_t>(p.candidate.n_leaves())) + log_rule;
      p.log_rule_prior_current = log_rule;
      break;
    }
    case MoveKind::kSwap: {
      const auto pairs = tree.swappable_pairs();
      const auto [parent, child] = pairs[uniform_index(rng, pairs.size())];
      p.move.node = parent;
      p.move.child = child;
      p.candidate.swap_rules(parent, child);
      if (!is_valid(p.candidate, X, config.rules.min_obs)) {
        p.invalid = true;
        return p;
      }
      const auto rows = observations_at(tree, X, parent);
      p.log_q_forward = log_kind - log_count(pairs.size());
      p.log_q_reverse = -log_count(available_moves(p.candidate, config).size()) -
                        log_count(p.candidate.swappable_pairs().size());
      p.log_rule_prior_current = subtree_rule_log_prior(tree, X, parent, rows, config.rules);
      p.log_rule_prior_candidate = subtree_rule_log_prior(p.candidate, X, parent, rows, config.rules);
      break;
    }
    case MoveKind::kChange: {
      const auto internal = tree.internal_nodes();
      const NodeId node = internal[uniform_index(rng, internal.size())];
      p.move.node = node;
      const auto rows = observations_at(tree, X, node);
      const NodeRules rules(X, rows, config.rules);
      bool found = false;
      if (!rules.empty()) {
        for (int attempt = 0; attempt < config.max_retries && !found; ++attempt) {
          p.move.rule = rules.draw(rng);
          p.candidate = tree;
          p.candidate.change_rule(node, p.move.rule);
          found = is_valid(p.candidate, X, config.rules.min_obs);
        }
      }
      if (!found) {
        p.candidate = tree;
        p.forced_self = true;
        return p;
      }
      // The retry loop draws from the rule prior restricted to rules that keep
      // the tree valid; that restriction is the same in both directions, so
      // only the prior densities enter q.
      const double log_q_common = log_kind - log_count(internal.size());
      p.log_q_forward = log_q_common + rules.log_density(p.move.rule);
      p.log_q_reverse = log_q_common + rules.log_density(tree.node(node).rule);
      p.log_rule_prior_current = subtree_rule_log_prior(tree, X, node, rows, config.rules);
      p.log_rule_prior_candidate = subtree_rule_log_prior(p.candidate, X, node, rows, config.rules);
      break;
    }
  }
  return p;
}

double accept_probability(const MhTerms& t) {
  const double all[] = {t.log_marginal_current, t.log_marginal_candidate, t.log_prior_current,
                        t.log_prior_candidate,  t.log_q_forward,          t.log_q_reverse};
  for (double v : all) {
    if (std::isnan(v) || v == kInf) throw std::domain_error("acceptance terms must not be NaN or +inf");
  }
  if (t.log_marginal_current == -kInf || t.log_prior_current == -kInf || t.log_q_forward == -kInf) {
    throw std::domain_error("current state or forward proposal has zero probability");
  }
  if (t.log_marginal_candidate == -kInf || t.log_prior_candidate == -kInf || t.log_q_reverse == -kInf) return 0.0;
  const double log_ratio = (t.log_q_reverse - t.log_q_forward) + (t.log_marginal_candidate - t.log_marginal_current) +
                           (t.log_prior_candidate - t.log_prior_current);
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

double accept_probability(const Tree&, const Tree&, double log_q_forward, double log_q_reverse,
                          double log_marginal_current, double log_marginal_candidate, double log_prior_current,
                          double log_prior_candidate) {
  return accept_probability(MhTerms{log_marginal_current, log_marginal_candidate, log_prior_current,
                                    log_prior_candidate, log_q_forward, log_q_reverse});
}

double log_marginal(const Tree& tree, const Matrix& X, std::span<const double> response,
                    const ObservationModel& model) {
  const auto stats = leaf_statistics(tree, X, response);
  return std::visit(
      [&](const auto& mdl) {
        double total = 0.0;
        for (const auto& s : stats) {
          if constexpr (std::is_same_v<std::decay_t<decltype(mdl)>, GaussianModel>) {
            total += gaussian_leaf_log_marginal(s, mdl);
          } else {
            total += bernoulli_leaf_log_marginal(s, mdl);
          }
        }
        return total;
      },
      model);
}

StepResult mh_step(Tree& tree, const Matrix& X, std::span<const double> response, const ObservationModel& model,
                   const PriorSpec& prior, const SamplerConfig& config, Rng& rng) {
  Proposal p = propose(tree, X, rng, config);
  StepResult result;
  result.kind = p.move.kind;
  if (p.forced_self) {
    result.forced_self = true;
    return result;
  }
  if (p.invalid) return result;

  MhTerms t;
  t.log_marginal_current = log_marginal(tree, X, response, model);
  t.log_marginal_candidate = log_marginal(p.candidate, X, response, model);
  t.log_prior_current = log_prior(tree, prior) + p.log_rule_prior_current;
  t.log_prior_candidate = log_prior(p.candidate, prior) + p.log_rule_prior_candidate;
  t.log_q_forward = p.log_q_forward;
  t.log_q_reverse = p.log_q_reverse;
  const double alpha = accept_probability(t);
  if (uniform01(rng) < alpha) {
    tree = std::move(p.candidate);
    result.accepted = true;
  }
  return result;
}

std::vector<double> partial_residual(std::span<const double> y, const std::vector<std::vector<double>>& fits,
                                     std::size_t j) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double others = 0.0;
    for (std::size_t k = 0; k < fits.size(); ++k) {
      if (k != j) others += fits[k][i];
    }
    out[i] = y[i] - others;
  }
  return out;
}

double truncated_normal_above(double a, Rng& rng) {
  if (a <= 0.0) {
    for (;;) {
      const double z = standard_normal(rng);
      if (z > a) return z;
    }
  }
  // Exponential proposal with the optimal rate for the tail beyond a.
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log1p(-uniform01(rng)) / rate;
    const double d = z - rate;
    if (uniform01(rng) <= std::exp(-0.5 * d * d)) return z;
  }
}

ChainState run_cart_chain(const Matrix& X, std::span<const double> y, const ObservationModel& model,
                          const PriorSpec& prior, const ChainConfig& config, Rng rng, const TraceSink& sink) {
  return run_chain(X, y, model, prior, 1, config, std::move(rng), sink);
}

ChainState run_bart_chain(const Matrix& X, std::span<const double> y, const ObservationModel& model,
                          const PriorSpec& prior, std::size_t m, const ChainConfig& config, Rng rng,
                          const TraceSink& sink) {
  return run_chain(X, y, model, prior, m, config, std::move(rng), sink);
}

}  // namespace lbbart
