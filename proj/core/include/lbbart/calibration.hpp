#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lbbart/tree_prior.hpp"

namespace lbbart {

enum class LossVariant { kEL1, kEL2 };

std::string_view to_string(LossVariant variant);
LossVariant loss_variant_from_string(std::string_view name);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct ExpectedLossSpec {
  LossVariant variant = LossVariant::kEL2;
  Interval omega_range{1.0, 2.0};
  Interval gamma_range{0.0, 4.0};
  double truncation_tol = 1e-12;
  double grid_step = 0.01;
  double refine_tol = 1e-4;

  void validate() const;
};

struct Optimum {
  double omega = 0.0;
  double gamma = 0.0;
  double value = 0.0;
};

// Thrown when the best grid point sits within one grid step of the search
// box edge, i.e. the objective has no interior maximum there.
class BoundaryMaximumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean leaf count under the geometric prior, 1 / (1 - exp(-omega)).
double expected_nl(double omega);

/// E(delta | n_leaves) under the conditional delta law, closed form.
double expected_delta_given_nl(unsigned n_leaves, double gamma);

/// Smallest admissible delta for a given leaf count (1 for odd n >= 3).
unsigned minimum_delta(unsigned n_leaves);

/// Marginal E(delta), summing over n until the remaining geometric mass
/// times n drops below `truncation_tol`.
double expected_delta(const LossBasedPrior& params, double truncation_tol = 1e-12);

/// Marginal expected delta above its per-n minimum, E(delta - minimum_delta(n)).
double expected_excess_delta(const LossBasedPrior& params, double truncation_tol = 1e-12);

/// Expected-loss objective. Leaf count and imbalance enter through their
/// excess over the smallest value attainable (n_L - 1 and delta above its
/// parity floor): EL1 = w^2 E(n_L - 1) + g E(excess delta), EL2 replaces g
/// by w g. With the raw moments the objective grows toward the corner of
/// the box and has no interior optimum.
double expected_loss(LossVariant variant, double omega, double gamma, double truncation_tol = 1e-12);

using Objective2d = std::function<double(double, double)>;

/// Grid search on the open box (step `grid_step`) followed by alternating
/// golden-section refinement to `refine_tol`. Throws BoundaryMaximumError
/// when the best grid point is adjacent to the box edge.
Optimum maximize(const Objective2d& objective, Interval x_range, Interval y_range, double grid_step,
                 double refine_tol);

Optimum maximize_expected_loss(const ExpectedLossSpec& spec);

struct SurfacePoint {
  double omega;
  double gamma;
  double loss;
};

// The objective on the same grid used by the optimizer.
std::vector<SurfacePoint> loss_surface(const ExpectedLossSpec& spec);

}  // namespace lbbart
