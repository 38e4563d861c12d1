#include "lbbart/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lbbart {
namespace {

// Mean of k over k = 0..K with weights r^k, r = exp(log_r) < 1.
double truncated_geometric_mean(unsigned K, double log_r) {
  if (K == 0) return 0.0;
  const double r = std::exp(log_r);
  const double kp1 = static_cast<double>(K) + 1.0;
  const double one_minus_r = -std::expm1(log_r);
  const double r_kp1 = std::exp(kp1 * log_r);
  const double one_minus_r_kp1 = -std::expm1(kp1 * log_r);
  return r / one_minus_r - kp1 * r_kp1 / one_minus_r_kp1;
}

// Sum over n >= 1 of pi(n) f(n), truncated once e^{-omega n} max(n, 1) < tol.
template <typename F>
double geometric_expectation(double omega, double tol, F&& f) {
  const double log_p = std::log(-std::expm1(-omega));
  double total = 0.0;
  for (unsigned n = 1;; ++n) {
    total += std::exp(log_p - omega * (n - 1.0)) * f(n);
    const double tail = std::exp(-omega * n) * n;
    if (tail < tol || n > 10'000'000u) break;
  }
  return total;
}

void check_params(double omega, double gamma) {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw std::invalid_argument("omega must be > 0");
  if (gamma == 0.0) throw std::domain_error("delta distribution is improper for gamma = 0");
  if (!std::isfinite(gamma)) throw std::invalid_argument("gamma must be finite");
}

std::vector<double> grid_points(Interval range, double step) {
  std::vector<double> pts;
  const auto count = static_cast<long>(std::floor((range.hi - range.lo) / step + 1e-9));
  for (long i = 1; i < count; ++i) pts.push_back(range.lo + step * i);
  return pts;
}

double golden_section(const std::function<double(double)>& f, double a, double b, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

std::string_view to_string(LossVariant variant) { return variant == LossVariant::kEL1 ? "EL1" : "EL2"; }

LossVariant loss_variant_from_string(std::string_view name) {
  if (name == "EL1" || name == "el1") return LossVariant::kEL1;
  if (name == "EL2" || name == "el2") return LossVariant::kEL2;
  throw std::invalid_argument("unknown loss variant: " + std::string(name));
}

void ExpectedLossSpec::validate() const {
  if (!(omega_range.lo < omega_range.hi) || !(gamma_range.lo < gamma_range.hi)) {
    throw std::invalid_argument("calibration ranges must be non-empty");
  }
  if (!(omega_range.lo >= 0.0)) throw std::invalid_argument("omega range must lie in (0, inf)");
  if (!(truncation_tol > 0.0)) throw std::invalid_argument("truncation_tol must be > 0");
  if (!(grid_step > 0.0) || !(refine_tol > 0.0)) throw std::invalid_argument("grid_step and refine_tol must be > 0");
}

double expected_nl(double omega) {
  if (!(omega > 0.0)) throw std::invalid_argument("omega must be > 0");
  return -1.0 / std::expm1(-omega);
}

unsigned minimum_delta(unsigned n_leaves) { return (n_leaves >= 3 && n_leaves % 2 == 1) ? 1u : 0u; }

double expected_delta_given_nl(unsigned n_leaves, double gamma) {
  if (gamma == 0.0) throw std::domain_error("delta distribution is improper for gamma = 0");
  if (n_leaves == 0) throw std::invalid_argument("n_leaves must be >= 1");
  if (n_leaves <= 2) return 0.0;
  // delta = floor + 2k, k = 0..K, weights exp(-2 gamma k).
  const unsigned K = (n_leaves - 2) / 2;
  const double log_r = -2.0 * gamma;
  const double mean_k = log_r < 0.0 ? truncated_geometric_mean(K, log_r) : K - truncated_geometric_mean(K, -log_r);
  return minimum_delta(n_leaves) + 2.0 * mean_k;
}

double expected_delta(const LossBasedPrior& params, double truncation_tol) {
  check_params(params.omega, params.gamma);
  return geometric_expectation(params.omega, truncation_tol,
                               [&](unsigned n) { return expected_delta_given_nl(n, params.gamma); });
}

double expected_excess_delta(const LossBasedPrior& params, double truncation_tol) {
  check_params(params.omega, params.gamma);
  return geometric_expectation(params.omega, truncation_tol, [&](unsigned n) {
    return expected_delta_given_nl(n, params.gamma) - minimum_delta(n);
  });
}

double expected_loss(LossVariant variant, double omega, double gamma, double truncation_tol) {
  const double excess_nl = expected_nl(omega) - 1.0;
  const double excess_delta = expected_excess_delta({omega, gamma}, truncation_tol);
  const double weight = variant == LossVariant::kEL1 ? gamma : omega * gamma;
  return omega * omega * excess_nl + weight * excess_delta;
}

Optimum maximize(const Objective2d& objective, Interval x_range, Interval y_range, double grid_step,
                 double refine_tol) {
  const auto xs = grid_points(x_range, grid_step);
  const auto ys = grid_points(y_range, grid_step);
  if (xs.size() < 3 || ys.size() < 3) throw std::invalid_argument("search box is too small for the grid step");

  std::size_t bi = 0, bj = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const double v = objective(xs[i], ys[j]);
      if (v > best) {
        best = v;
        bi = i;
        bj = j;
      }
    }
  }
  if (!std::isfinite(best)) throw std::runtime_error("objective is not finite anywhere on the grid");
  if (bi == 0 || bi + 1 == xs.size() || bj == 0 || bj + 1 == ys.size()) {
    throw BoundaryMaximumError("maximum at (" + std::to_string(xs[bi]) + ", " + std::to_string(ys[bj]) +
                               ") lies on the boundary of the search box");
  }

  double x = xs[bi];
  double y = ys[bj];
  for (int sweep = 0; sweep < 50; ++sweep) {
    const double nx = golden_section([&](double t) { return objective(t, y); }, x - grid_step, x + grid_step,
                                     refine_tol / 4);
    const double ny = golden_section([&](double t) { return objective(nx, t); }, y - grid_step, y + grid_step,
                                     refine_tol / 4);
    const bool done = std::abs(nx - x) < refine_tol && std::abs(ny - y) < refine_tol;
    x = nx;
    y = ny;
    if (done) break;
  }
  return {x, y, objective(x, y)};
}

Optimum maximize_expected_loss(const ExpectedLossSpec& spec) {
  spec.validate();
  return maximize(
      [&](double w, double g) { return expected_loss(spec.variant, w, g, spec.truncation_tol); },
      spec.omega_range, spec.gamma_range, spec.grid_step, spec.refine_tol);
}

std::vector<SurfacePoint> loss_surface(const ExpectedLossSpec& spec) {
  spec.validate();
  std::vector<SurfacePoint> out;
  for (double w : grid_points(spec.omega_range, spec.grid_step)) {
    for (double g : grid_points(spec.gamma_range, spec.grid_step)) {
      out.push_back({w, g, expected_loss(spec.variant, w, g, spec.truncation_tol)});
    }
  }
  return out;
}

}  // namespace lbbart
