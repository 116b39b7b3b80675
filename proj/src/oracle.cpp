#include "prefopt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "prefopt/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace prefopt::oracle {

GridMinimum grid_minimize_conditional(const LossSpec& loss, double eta, const GridSpec& grid) {
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::invalid_argument("grid_minimize_conditional: eta outside [0,1]");
  if (grid.points < 3 || !(grid.lo < grid.hi))
    throw std::invalid_argument("grid_minimize_conditional: bad grid");

  const auto objective = [&](double v) {
    return eta * loss.value(v) + (1.0 - eta) * loss.value(-v);
  };

  double lo = grid.lo, hi = grid.hi;
  GridMinimum best;
  for (int pass = 0; pass <= grid.refinement_passes; ++pass) {
    const double step = (hi - lo) / (grid.points - 1);
    int best_i = 0;
    double best_val = objective(lo);
    for (int i = 1; i < grid.points; ++i) {
      const double val = objective(lo + step * i);
      if (val < best_val) {
        best_val = val;
        best_i = i;
      }
    }
    best.v = lo + step * best_i;
    best.objective_value = best_val;
    if (pass == 0) best.at_boundary = best_i == 0 || best_i == grid.points - 1;
    const double new_lo = std::max(grid.lo, best.v - step);
    const double new_hi = std::min(grid.hi, best.v + step);
    lo = new_lo;
    hi = new_hi;
  }
  return best;
}

namespace {

// Population loss restricted to one context, for explicit response scores.
double context_loss(const GenerativeModel& model, const LossSpec& loss,
                    const std::vector<double>& score_minus_logmu, int x) {
  const int Y = model.num_responses();
  double acc = 0.0;
  for (int y = 0; y < Y; ++y) {
    const double wy = model.d_y()(x, y);
    if (wy == 0.0) continue;
    for (int yp = 0; yp < Y; ++yp) {
      const double w = wy * model.d_y()(x, yp);
      if (w == 0.0) continue;
      const double m = score_minus_logmu[static_cast<std::size_t>(y)] -
                       score_minus_logmu[static_cast<std::size_t>(yp)];
      const double eta = model.preference_prob(x, y, yp);
      acc += w * (eta * loss.value(m) + (1.0 - eta) * loss.value(-m));
    }
  }
  return acc;
}

}  // namespace

TabularPolicy brute_force_population_minimizer(const GenerativeModel& model, const LossSpec& loss,
                                               const BasePolicy& base, const GridSpec& per_logit,
                                               std::uint64_t max_evals) {
  const int X = model.num_contexts(), Y = model.num_responses();
  if (per_logit.points < 2) throw std::invalid_argument("brute force: need >= 2 grid points");

  std::uint64_t combos = 1;
  for (int k = 0; k + 1 < Y; ++k) {
    combos *= static_cast<std::uint64_t>(per_logit.points);
    if (combos > max_evals)
      throw budget_error("brute force budget exceeded: grid^(|Y|-1) too large");
  }
  if (combos * static_cast<std::uint64_t>(X) > max_evals)
    throw budget_error("brute force budget exceeded");

  const Matrix logmu = base.log_weight_table(X, Y);
  const double step = (per_logit.hi - per_logit.lo) / (per_logit.points - 1);

  Matrix logits(X, Y, 0.0);
  for (int x = 0; x < X; ++x) {
    // chunked deterministic argmin over combinations
    const long long n = static_cast<long long>(combos);
    const int nchunks = 64;
    std::vector<double> chunk_best(nchunks, std::numeric_limits<double>::infinity());
    std::vector<long long> chunk_arg(nchunks, 0);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < nchunks; ++c) {
      const long long lo = n * c / nchunks, hi = n * (c + 1) / nchunks;
      std::vector<double> scores(static_cast<std::size_t>(Y));
      for (long long idx = lo; idx < hi; ++idx) {
        long long rem = idx;
        scores[0] = 0.0 - logmu(x, 0);
        for (int y = 1; y < Y; ++y) {
          const int g = static_cast<int>(rem % per_logit.points);
          rem /= per_logit.points;
          scores[static_cast<std::size_t>(y)] = per_logit.lo + step * g - logmu(x, y);
        }
        const double val = context_loss(model, loss, scores, x);
        if (val < chunk_best[static_cast<std::size_t>(c)]) {
          chunk_best[static_cast<std::size_t>(c)] = val;
          chunk_arg[static_cast<std::size_t>(c)] = idx;
        }
      }
    }
    double best = std::numeric_limits<double>::infinity();
    long long best_idx = 0;
    for (int c = 0; c < nchunks; ++c) {
      if (chunk_best[static_cast<std::size_t>(c)] < best) {
        best = chunk_best[static_cast<std::size_t>(c)];
        best_idx = chunk_arg[static_cast<std::size_t>(c)];
      }
    }
    long long rem = best_idx;
    logits(x, 0) = 0.0;
    for (int y = 1; y < Y; ++y) {
      const int g = static_cast<int>(rem % per_logit.points);
      rem /= per_logit.points;
      logits(x, y) = per_logit.lo + step * g;
    }
  }
  return TabularPolicy(std::move(logits));
}

double exact_expectation(const std::function<double(int, int, int, int)>& fn,
                         const GenerativeModel& model, std::uint64_t max_triples) {
  const std::uint64_t triples = static_cast<std::uint64_t>(model.num_contexts()) *
                                model.num_responses() * model.num_responses();
  if (triples > max_triples)
    throw budget_error("exact_expectation budget exceeded: " + std::to_string(triples) +
                       " triples");
  double total = 0.0;
  for (int x = 0; x < model.num_contexts(); ++x) {
    const double dx = model.d_x()[static_cast<std::size_t>(x)];
    if (dx == 0.0) continue;
    for (int y = 0; y < model.num_responses(); ++y) {
      const double wy = model.d_y()(x, y);
      if (wy == 0.0) continue;
      for (int yp = 0; yp < model.num_responses(); ++yp) {
        const double w = dx * wy * model.d_y()(x, yp);
        if (w == 0.0) continue;
        const double eta = model.preference_prob(x, y, yp);
        total += w * (eta * fn(x, y, yp, 1) + (1.0 - eta) * fn(x, y, yp, -1));
      }
    }
  }
  return total;
}

}  // namespace prefopt::oracle
