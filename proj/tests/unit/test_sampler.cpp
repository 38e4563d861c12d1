#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "lbbart/sampler.hpp"
#include "oracles.hpp"

using namespace lbbart;

namespace {

std::map<std::string, double> run_visits(const oracle::MicroProblem& pr, std::size_t iterations, std::uint64_t seed,
                                         SplitValueMode mode = SplitValueMode::kObserved) {
  ObservationModel model = pr.gaussian ? ObservationModel{GaussianModel{pr.sigma2, pr.mu_mean, pr.mu_var, {}}}
                                       : ObservationModel{BernoulliModel{pr.a, pr.b}};
  const PriorSpec prior = pr.loss_based ? PriorSpec{LossBasedPrior{pr.omega, pr.gamma}}
                                        : PriorSpec{ClassicPrior{pr.alpha, pr.beta}};
  SamplerConfig config;
  config.rules = RuleSpace{pr.min_obs, mode};
  config.max_leaves = pr.max_leaves;
  Rng rng = make_stream(seed, 0);
  Tree tree;
  std::map<std::string, double> visits;
  for (std::size_t it = 0; it < iterations; ++it) {
    mh_step(tree, pr.X, pr.y, model, prior, config, rng);
    visits[tree.to_string()] += 1.0 / static_cast<double>(iterations);
  }
  return visits;
}

oracle::MicroProblem small_problem() {
  oracle::MicroProblem pr;
  pr.X = Matrix{{0.1, 0.7}, {0.4, 0.2}, {0.6, 0.9}, {0.9, 0.4}, {0.3, 0.5}};
  pr.y = {0.2, 1.1, 2.9, 3.2, 0.8};
  pr.sigma2 = 0.5;
  pr.mu_mean = 1.6;
  pr.mu_var = 1.5;
  pr.max_leaves = 4;
  return pr;
}

}  // namespace

TEST(Moves, AvailableKinds) {
  SamplerConfig c;
  Tree t;
  EXPECT_EQ(available_moves(t, c), (std::vector<MoveKind>{MoveKind::kGrow}));
  t.grow(Tree::root(), {0, 0.5});
  EXPECT_EQ(available_moves(t, c), (std::vector<MoveKind>{MoveKind::kGrow, MoveKind::kPrune, MoveKind::kChange}));
  t.grow(t.leaves()[0], {0, 0.2});
  EXPECT_EQ(available_moves(t, c).size(), 4u);
  c.max_leaves = 3;
  EXPECT_EQ(available_moves(t, c),
            (std::vector<MoveKind>{MoveKind::kPrune, MoveKind::kSwap, MoveKind::kChange}));
}

TEST(Moves, KindFrequenciesAreUniform) {
  const Matrix X{{0.1}, {0.3}, {0.5}, {0.7}, {0.9}, {0.95}};
  Tree t;
  t.grow(Tree::root(), {0, 0.5});
  t.grow(t.leaves()[0], {0, 0.1});
  Rng rng = make_stream(41, 0);
  std::map<MoveKind, int> hits;
  for (int i = 0; i < 40000; ++i) ++hits[propose(t, X, rng, SamplerConfig{}).move.kind];
  for (auto [k, c] : hits) EXPECT_NEAR(c / 40000.0, 0.25, 0.01) << to_string(k);
}

TEST(Acceptance, EdgeCases) {
  MhTerms t;
  EXPECT_EQ(accept_probability(t), 1.0);
  t.log_marginal_candidate = -1.0;
  EXPECT_NEAR(accept_probability(t), std::exp(-1.0), 1e-15);
  t.log_prior_candidate = -INFINITY;
  EXPECT_EQ(accept_probability(t), 0.0);
  t = MhTerms{};
  t.log_q_reverse = -INFINITY;
  EXPECT_EQ(accept_probability(t), 0.0);
  t = MhTerms{};
  t.log_prior_current = -INFINITY;
  EXPECT_THROW(accept_probability(t), std::domain_error);
  t = MhTerms{};
  t.log_marginal_candidate = NAN;
  EXPECT_THROW(accept_probability(t), std::domain_error);
  t = MhTerms{};
  t.log_q_forward = INFINITY;
  EXPECT_THROW(accept_probability(t), std::domain_error);
}

TEST(Moves, GrowForcedSelfWhenLeafCannotSplit) {
  const Matrix X{{0.5}, {0.5}};
  Rng rng = make_stream(42, 0);
  const Proposal p = propose(Tree{}, X, rng, SamplerConfig{});
  EXPECT_EQ(p.move.kind, MoveKind::kGrow);
  EXPECT_TRUE(p.forced_self);
}

// Proposal frequencies match exp(log_q_forward), and every GROW's reverse
// density equals the forward density of the PRUNE that undoes it.
TEST(Moves, GrowPruneDensitiesAreConsistent) {
  const auto pr = small_problem();
  SamplerConfig config;
  config.max_leaves = 4;
  const auto states = oracle::exact_posterior(pr);
  // Rebuild the trees by breadth-first growth, as the oracle does.
  std::map<std::string, Tree> built{{Tree{}.to_string(), Tree{}}};
  std::vector<Tree> frontier{Tree{}};
  while (!frontier.empty()) {
    std::vector<Tree> next;
    for (const Tree& t : frontier) {
      if (t.n_leaves() >= 4) continue;
      for (NodeId leaf : t.leaves()) {
        const auto rows = observations_at(t, pr.X, leaf);
        for (std::size_t j = 0; j < 2; ++j)
          for (double thr : oracle::brute_thresholds(pr.X, rows, j, 1)) {
            Tree g = t;
            g.grow(leaf, {j, thr});
            if (built.emplace(g.to_string(), g).second) next.push_back(g);
          }
      }
    }
    frontier = std::move(next);
  }
  ASSERT_EQ(built.size(), states.size());

  // (from, to) -> log q
  std::map<std::pair<std::string, std::string>, double> fwd, rev;
  Rng rng = make_stream(43, 0);
  int checked = 0;
  for (const auto& [key, tree] : built) {
    std::map<std::string, int> hits;
    const int draws = tree.n_leaves() <= 2 ? 20000 : 2000;
    for (int i = 0; i < draws; ++i) {
      const Proposal p = propose(tree, pr.X, rng, config);
      if (p.forced_self || p.invalid) continue;
      if (p.move.kind != MoveKind::kGrow && p.move.kind != MoveKind::kPrune) continue;
      const std::string to = p.candidate.to_string();
      ++hits[to];
      fwd[{key, to}] = p.log_q_forward;
      rev[{key, to}] = p.log_q_reverse;
    }
    if (tree.n_leaves() <= 2) {
      for (const auto& [to, c] : hits) {
        const double q = std::exp(fwd[{key, to}]);
        EXPECT_NEAR(c / double(draws), q, 4 * std::sqrt(q * (1 - q) / draws) + 1e-3) << key << " -> " << to;
      }
    }
  }
  for (const auto& [edge, lq] : fwd) {
    auto back = fwd.find({edge.second, edge.first});
    if (back == fwd.end()) continue;
    EXPECT_NEAR(rev[edge], back->second, 1e-12) << edge.first << " -> " << edge.second;
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(MicroPosterior, TwoObservationsOnePredictor) {
  oracle::MicroProblem pr;
  pr.X = Matrix{{0.0}, {1.0}};
  pr.y = {-1.0, 1.5};
  pr.max_leaves = 2;
  const auto exact = oracle::exact_posterior(pr);
  ASSERT_EQ(exact.size(), 2u);
  const auto visits = run_visits(pr, 200000, 44);
  EXPECT_LT(oracle::total_variation(exact, visits), 0.01);
}

TEST(MicroPosterior, GaussianLossBasedFourLeaves) {
  const auto pr = small_problem();
  const auto exact = oracle::exact_posterior(pr);
  EXPECT_GT(exact.size(), 100u);
  const auto visits = run_visits(pr, 400000, 45);
  EXPECT_LT(oracle::total_variation(exact, visits), 0.03);
}

TEST(MicroPosterior, BernoulliClassicMinObsTwo) {
  oracle::MicroProblem pr;
  pr.X = Matrix{{0.1, 0.7}, {0.4, 0.2}, {0.6, 0.9}, {0.9, 0.4}, {0.3, 0.5}, {0.8, 0.1}, {0.2, 0.3}};
  pr.y = {0, 0, 1, 1, 0, 1, 1};
  pr.gaussian = false;
  pr.a = 0.5;
  pr.b = 0.5;
  pr.loss_based = false;
  pr.min_obs = 2;
  pr.max_leaves = 3;
  const auto exact = oracle::exact_posterior(pr);
  const auto visits = run_visits(pr, 300000, 46);
  EXPECT_LT(oracle::total_variation(exact, visits), 0.02);
}

TEST(Chain, TraceLayout) {
  const Matrix X{{0.1}, {0.4}, {0.6}, {0.9}};
  const std::vector<double> y{0.2, 0.3, 2.1, 2.2};
  ChainConfig c;
  c.chain_id = 3;
  c.iterations = 20;
  c.thinning = 5;
  const auto state = run_cart_chain(X, y, GaussianModel{0.1, 1.0, 1.0, {}}, LossBasedPrior{}, c, make_stream(1, 3));
  ASSERT_EQ(state.trace.size(), 5u);
  EXPECT_EQ(state.trace[0].iter, 0u);
  EXPECT_EQ(state.trace[0].move, (std::vector<std::string>{"NONE"}));
  EXPECT_EQ(state.trace[0].n_leaves, (std::vector<int>{1}));
  EXPECT_EQ(state.trace[1].iter, 5u);
  EXPECT_EQ(state.trace[4].iter, 20u);
  EXPECT_EQ(state.trace[2].chain, 3);
  // Start value is mean(y).
  EXPECT_DOUBLE_EQ(gaussian_log_likelihood(std::vector<double>(4, 1.2), y, 0.1), state.trace[0].log_lik);
}

TEST(Chain, DeterministicGivenStream) {
  const Matrix X{{0.1}, {0.4}, {0.6}, {0.9}, {0.3}};
  const std::vector<double> y{0.2, 0.3, 2.1, 2.2, 0.1};
  ChainConfig c;
  c.iterations = 200;
  const auto a = run_bart_chain(X, y, default_gaussian_model(y, 3), ClassicPrior{}, 3, c, make_stream(9, 0));
  const auto b = run_bart_chain(X, y, default_gaussian_model(y, 3), ClassicPrior{}, 3, c, make_stream(9, 0));
  EXPECT_EQ(a.trace, b.trace);
  ASSERT_TRUE(a.trace.back().sigma2.has_value());
  EXPECT_NE(*a.trace.back().sigma2, *a.trace.front().sigma2);  // sigma^2 sampled by default for m > 1
}

TEST(Chain, SingleTreeKeepsSigmaFixedByDefault) {
  const Matrix X{{0.1}, {0.4}, {0.6}};
  const std::vector<double> y{0.2, 0.3, 2.1};
  ChainConfig c;
  c.iterations = 30;
  const auto s = run_cart_chain(X, y, default_gaussian_model(y), LossBasedPrior{}, c, make_stream(2, 0));
  for (const auto& r : s.trace) EXPECT_EQ(*r.sigma2, *s.trace[0].sigma2);
}

TEST(Chain, ResponseTypeChecks) {
  const Matrix X{{0.1}, {0.4}};
  ChainConfig c;
  c.iterations = 1;
  EXPECT_THROW(run_cart_chain(X, std::vector<double>{0, 1}, GaussianModel{}, LossBasedPrior{}, c, make_stream(1, 0)),
               std::invalid_argument);
  EXPECT_THROW(
      run_cart_chain(X, std::vector<double>{0.5, 1}, BernoulliModel{}, LossBasedPrior{}, c, make_stream(1, 0)),
      std::invalid_argument);
  c.thinning = 0;
  EXPECT_THROW(run_cart_chain(X, std::vector<double>{0.5, 1}, GaussianModel{}, LossBasedPrior{}, c, make_stream(1, 0)),
               std::invalid_argument);
}

TEST(Chain, ProbitEnsembleClassifies) {
  Matrix X(60, 1);
  std::vector<double> y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    X(i, 0) = i / 59.0;
    y[i] = i >= 30 ? 1.0 : 0.0;
  }
  ChainConfig c;
  c.iterations = 200;
  const auto s = run_bart_chain(X, y, BernoulliModel{}, ClassicPrior{}, 5, c, make_stream(5, 0));
  EXPECT_LE(*s.trace.back().misclassified, 3u);
  EXPECT_FALSE(s.trace.back().sigma2.has_value());
}

TEST(Chain, SinkSeesEveryRecord) {
  const Matrix X{{0.1}, {0.9}};
  ChainConfig c;
  c.iterations = 10;
  c.keep_trace = false;
  int seen = 0;
  const auto s = run_cart_chain(X, std::vector<double>{0, 1}, BernoulliModel{}, LossBasedPrior{}, c,
                                make_stream(1, 0), [&](const TraceRecord&) { ++seen; });
  EXPECT_EQ(seen, 11);
  EXPECT_TRUE(s.trace.empty());
}

TEST(Backfitting, PartialResidual) {
  const std::vector<double> y{1.0, 2.0};
  const std::vector<std::vector<double>> fits{{0.5, 0.5}, {0.25, 1.0}, {0.0, 0.1}};
  EXPECT_EQ(partial_residual(y, fits, 1), (std::vector<double>{0.5, 1.4}));
}

TEST(Backfitting, TruncatedNormalMoments) {
  // E[Z | Z > a] = phi(a) / (1 - Phi(a)).
  for (double a : {-1.0, 0.0, 0.5, 2.0, 5.0}) {
    Rng rng = make_stream(50, 0);
    const double phi = std::exp(-0.5 * a * a) / std::sqrt(2 * M_PI);
    const double tail = 0.5 * std::erfc(a / std::sqrt(2.0));
    const double mean = phi / tail;
    const double var = 1 + a * mean - mean * mean;
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double z = truncated_normal_above(a, rng);
      ASSERT_GT(z, a);
      sum += z;
    }
    EXPECT_NEAR(sum / n, mean, 3 * std::sqrt(var / n)) << a;
  }
}
