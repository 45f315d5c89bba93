#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "twin_ident/error.hpp"
#include "twin_ident/random.hpp"

namespace twin_ident {

/// Box constraints for the search. A dimension may be degenerate
/// (lower == upper), which pins that parameter.
struct ParamBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  ParamBounds() = default;
  ParamBounds(std::vector<double> lo, std::vector<double> hi) : lower(std::move(lo)), upper(std::move(hi)) {
    validate();
  }
  ParamBounds(std::initializer_list<std::pair<double, double>> pairs) {
    for (const auto& [lo, hi] : pairs) {
      lower.push_back(lo);
      upper.push_back(hi);
    }
    validate();
  }

  std::size_t size() const noexcept { return lower.size(); }
  double range(std::size_t i) const { return upper[i] - lower[i]; }
  bool contains(std::span<const double> x) const {
    if (x.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    }
    return true;
  }
  std::vector<double> center() const {
    std::vector<double> c(size());
    for (std::size_t i = 0; i < size(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
    return c;
  }

  void validate() const {
    if (lower.size() != upper.size() || lower.empty()) {
      throw InvalidInput("ParamBounds: lower/upper must be non-empty and equally sized");
    }
    for (std::size_t i = 0; i < size(); ++i) {
      if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] > upper[i]) {
        throw InvalidInput("ParamBounds: dimension " + std::to_string(i) + " needs finite lower <= upper");
      }
    }
  }
  void require_arity(std::size_t n, const char* who) const {
    validate();
    if (size() != n) {
      throw InvalidInput(std::string(who) + ": expected " + std::to_string(n) + " bound dimensions, got " +
                         std::to_string(size()));
    }
  }
};

/// Defaults are the standard constriction-factor values.
struct SwarmConfig {
  std::size_t particles = 32;
  std::size_t iterations = 150;
  double inertia = 0.729;
  double cognitive = 1.49445;
  double social = 1.49445;
  double velocity_clamp = 0.5;  // fraction of each dimension's range
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // objective evaluations per iteration run on this many threads

  void validate() const {
    if (particles < 2) throw InvalidInput("SwarmConfig: particles must be >= 2");
    if (iterations < 1) throw InvalidInput("SwarmConfig: iterations must be >= 1");
    if (!(inertia >= 0.0 && inertia <= 1.0)) throw InvalidInput("SwarmConfig: inertia must lie in [0, 1]");
    if (!(cognitive > 0.0) || !(social > 0.0)) throw InvalidInput("SwarmConfig: c1 and c2 must be > 0");
    if (!(velocity_clamp > 0.0)) throw InvalidInput("SwarmConfig: velocity_clamp must be > 0");
    if (threads < 1) throw InvalidInput("SwarmConfig: threads must be >= 1");
  }
};

struct OptResult {
  std::vector<double> best_params;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> history;                         // global best after init and after each iteration
  std::vector<std::vector<double>> best_params_history;  // matches `history`
  std::size_t evaluations = 0;
};

/// Called after initialization (iteration 0) and after every iteration with
/// the positions that were just evaluated.
using SwarmObserver =
    std::function<void(std::size_t iteration, const std::vector<std::vector<double>>& positions, double best_loss)>;

/// Run fn(i) for i in [0, n) on up to `threads` threads. Exceptions are
/// rethrown on the caller's thread (lowest index first).
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += threads) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Global-best particle swarm minimization with reflecting bounds and
/// Latin-hypercube initialization. All random numbers are drawn on the
/// calling thread in particle order and best updates are applied in
/// particle order after each batch, so results do not depend on `threads`.
/// Non-finite objective values count as +inf. A non-empty `start` replaces
/// particle 0's initial position (the random stream is unchanged).
template <class Objective>
OptResult pso_minimize(Objective&& objective, const ParamBounds& bounds, const SwarmConfig& config,
                       const SwarmObserver& observer = {}, std::span<const double> start = {}) {
  bounds.validate();
  config.validate();
  if (!start.empty() && !bounds.contains(start)) {
    throw InvalidInput("pso_minimize: start point lies outside the bounds");
  }
  const std::size_t dim = bounds.size();
  const std::size_t np = config.particles;
  Rng rng(config.seed);

  std::vector<std::vector<double>> pos(np, std::vector<double>(dim));
  std::vector<std::vector<double>> vel(np, std::vector<double>(dim, 0.0));
  std::vector<double> vmax(dim);
  for (std::size_t d = 0; d < dim; ++d) vmax[d] = config.velocity_clamp * bounds.range(d);

  for (std::size_t d = 0; d < dim; ++d) {
    std::vector<std::size_t> strata(np);
    for (std::size_t i = 0; i < np; ++i) strata[i] = i;
    shuffle(strata, rng);
    for (std::size_t i = 0; i < np; ++i) {
      const double u = (static_cast<double>(strata[i]) + uniform01(rng)) / static_cast<double>(np);
      pos[i][d] = std::min(bounds.upper[d], bounds.lower[d] + u * bounds.range(d));
      vel[i][d] = uniform(rng, -0.1, 0.1) * bounds.range(d);
    }
  }

  if (!start.empty()) pos[0].assign(start.begin(), start.end());

  std::vector<double> loss(np);
  OptResult result;
  auto evaluate_all = [&] {
    parallel_for(np, config.threads, [&](std::size_t i) {
      const double v = objective(std::span<const double>(pos[i]));
      loss[i] = std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    });
    result.evaluations += np;
  };

  evaluate_all();
  std::vector<std::vector<double>> pbest = pos;
  std::vector<double> pbest_loss = loss;
  std::size_t g = 0;
  for (std::size_t i = 1; i < np; ++i) {
    if (loss[i] < loss[g]) g = i;
  }
  if (!std::isfinite(loss[g])) {
    throw NumericError("pso_minimize: objective is non-finite for every initial particle");
  }
  std::vector<double> gbest = pos[g];
  double gbest_loss = loss[g];
  result.history.push_back(gbest_loss);
  result.best_params_history.push_back(gbest);
  if (observer) observer(0, pos, gbest_loss);

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    for (std::size_t i = 0; i < np; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double r1 = uniform01(rng);
        const double r2 = uniform01(rng);
        if (vmax[d] == 0.0) {
          vel[i][d] = 0.0;
          pos[i][d] = bounds.lower[d];
          continue;
        }
        double v = config.inertia * vel[i][d] + config.cognitive * r1 * (pbest[i][d] - pos[i][d]) +
                   config.social * r2 * (gbest[d] - pos[i][d]);
        v = std::clamp(v, -vmax[d], vmax[d]);
        double x = pos[i][d] + v;
        if (x > bounds.upper[d]) {
          x = bounds.upper[d] - (x - bounds.upper[d]);
          v = -v;
        } else if (x < bounds.lower[d]) {
          x = bounds.lower[d] + (bounds.lower[d] - x);
          v = -v;
        }
        pos[i][d] = std::clamp(x, bounds.lower[d], bounds.upper[d]);
        vel[i][d] = v;
      }
    }
    evaluate_all();
    for (std::size_t i = 0; i < np; ++i) {
      if (loss[i] < pbest_loss[i]) {
        pbest_loss[i] = loss[i];
        pbest[i] = pos[i];
      }
      if (loss[i] < gbest_loss) {
        gbest_loss = loss[i];
        gbest = pos[i];
      }
    }
    result.history.push_back(gbest_loss);
    result.best_params_history.push_back(gbest);
    if (observer) observer(it, pos, gbest_loss);
  }

  result.best_params = gbest;
  result.best_loss = gbest_loss;
  return result;
}

/// Curvature of the loss along each parameter (central second difference,
/// step = relative_step * range, shifted inward at a bound). Zero for
/// pinned dimensions.
template <class Objective>
std::vector<double> loss_curvature(Objective&& objective, std::span<const double> at, const ParamBounds& bounds,
                                   double relative_step = 1e-3) {
  bounds.require_arity(at.size(), "loss_curvature");
  std::vector<double> x(at.begin(), at.end());
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double h = relative_step * bounds.range(d);
    if (h == 0.0) continue;
    const double center = std::clamp(x[d], bounds.lower[d] + h, bounds.upper[d] - h);
    std::vector<double> p = x;
    p[d] = center - h;
    const double fm = objective(std::span<const double>(p));
    p[d] = center;
    const double f0 = objective(std::span<const double>(p));
    p[d] = center + h;
    const double fp = objective(std::span<const double>(p));
    out[d] = (fp - 2.0 * f0 + fm) / (h * h);
  }
  return out;
}

}  // namespace twin_ident
