#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "lbbart/likelihood.hpp"
#include "lbbart/matrix.hpp"
#include "lbbart/rng.hpp"
#include "lbbart/split_rules.hpp"
#include "lbbart/trace.hpp"
#include "lbbart/tree.hpp"
#include "lbbart/tree_prior.hpp"

namespace lbbart {

using ObservationModel = std::variant<GaussianModel, BernoulliModel>;

struct SamplerConfig {
  RuleSpace rules{};
  // GROW is unavailable once a tree has this many leaves; 0 means no cap.
  unsigned max_leaves = 0;
  // CHANGE redraws the rule at the chosen node this many times before giving
  // up with a self-transition.
  int max_retries = 10;
};

// Move kinds proposable from `tree`, in GROW, PRUNE, SWAP, CHANGE order.
std::vector<MoveKind> available_moves(const Tree& tree, const SamplerConfig& config);

struct Proposal {
  Move move{};
  Tree candidate{};
  double log_q_forward = 0.0;
  double log_q_reverse = 0.0;
  // Rule log prior of the subtree the move rewrites, before and after.
  double log_rule_prior_current = 0.0;
  double log_rule_prior_candidate = 0.0;
  // No admissible candidate could be built; the chain stays put.
  bool forced_self = false;
  // Candidate breaks min_obs; counted as a rejected proposal.
  bool invalid = false;
};

/// Draws a move kind uniformly among the available ones and builds the
/// candidate with its forward/reverse log proposal densities. New rules come
/// from the rule prior at the targeted node.
Proposal propose(const Tree& tree, const Matrix& X, Rng& rng, const SamplerConfig& config);

// Log target terms of an MH step. Priors include the rule prior.
struct MhTerms {
  double log_marginal_current = 0.0;
  double log_marginal_candidate = 0.0;
  double log_prior_current = 0.0;
  double log_prior_candidate = 0.0;
  double log_q_forward = 0.0;
  double log_q_reverse = 0.0;
};

/// min(1, q_rev p(y|T*) pi(T*) / (q_fwd p(y|T) pi(T))). A -inf candidate term
/// gives 0; NaN, +inf, or a -inf current term throws std::domain_error.
double accept_probability(const MhTerms& terms);
double accept_probability(const Tree& current, const Tree& candidate, double log_q_forward, double log_q_reverse,
                          double log_marginal_current, double log_marginal_candidate, double log_prior_current,
                          double log_prior_candidate);

double log_marginal(const Tree& tree, const Matrix& X, std::span<const double> response,
                    const ObservationModel& model);

struct StepResult {
  MoveKind kind = MoveKind::kGrow;
  bool accepted = false;
  bool forced_self = false;
};

// One MH update of `tree` against `response`.
StepResult mh_step(Tree& tree, const Matrix& X, std::span<const double> response, const ObservationModel& model,
                   const PriorSpec& prior, const SamplerConfig& config, Rng& rng);

struct ChainConfig {
  int chain_id = 0;
  std::size_t iterations = 0;
  // Record every `thinning`-th iteration (the start state is always kept).
  std::size_t thinning = 1;
  SamplerConfig sampler{};
  // Draw sigma^2 each iteration (Gaussian models with a variance prior).
  // Defaults to off for single-tree runs and on for ensembles.
  std::optional<bool> sample_sigma2;
  // Leaf sd multiplier for the probit ensemble used with Bernoulli data.
  double probit_k = 2.0;
  // Keep records in ChainState::trace; long runs can stream to a sink instead.
  bool keep_trace = true;
};

struct ChainState {
  std::vector<Tree> trees;
  double sigma2 = 1.0;
  std::size_t iteration = 0;
  Rng rng;
  std::vector<TraceRecord> trace;
};

using TraceSink = std::function<void(const TraceRecord&)>;

/// Single-tree MH chain started from the one-leaf tree. Leaf values are
/// redrawn from their conjugate posterior after every step.
ChainState run_cart_chain(const Matrix& X, std::span<const double> y, const ObservationModel& model,
                          const PriorSpec& prior, const ChainConfig& config, Rng rng, const TraceSink& sink = {});

/// Backfitting sampler over `m` trees. Gaussian models update each tree
/// against its partial residual, then sigma^2. Bernoulli models with m > 1
/// use a probit sum of trees on an augmented latent response; m = 1 falls
/// back to the conjugate single-tree chain.
ChainState run_bart_chain(const Matrix& X, std::span<const double> y, const ObservationModel& model,
                          const PriorSpec& prior, std::size_t m, const ChainConfig& config, Rng rng,
                          const TraceSink& sink = {});

// y - sum_{k != j} fits[k], summed in k order.
std::vector<double> partial_residual(std::span<const double> y, const std::vector<std::vector<double>>& fits,
                                     std::size_t j);

// Standard normal conditioned to exceed `a`.
double truncated_normal_above(double a, Rng& rng);

}  // namespace lbbart
