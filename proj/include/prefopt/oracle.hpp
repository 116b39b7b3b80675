#pragma once

#include <cstdint>
#include <functional>

#include "prefopt/core.hpp"
#include "prefopt/datagen.hpp"
#include "prefopt/loss_zoo.hpp"

namespace prefopt::oracle {

// Brute-force references, written against the definitions only. These validate
// links, benchmark construction and trained solutions independently of the
// main implementations.

struct GridSpec {
  double lo = -1.0;
  double hi = 1.0;
  int points = 3;
  int refinement_passes = 0;
};

struct GridMinimum {
  double v = 0.0;
  double objective_value = 0.0;
  bool at_boundary = false;  // coarse minimizer on the grid edge
};

// argmin over the grid of v -> eta * l(v) + (1 - eta) * l(-v); each refinement
// pass re-grids the bracket [v - step, v + step].
GridMinimum grid_minimize_conditional(const LossSpec& loss, double eta, const GridSpec& grid);

// Exhaustive logit-grid search for the population-loss minimizer. One logit
// per context is pinned to zero (shift invariance); contexts decouple, so each
// is searched independently over points^(|Y|-1) combinations.
TabularPolicy brute_force_population_minimizer(const GenerativeModel& model, const LossSpec& loss,
                                               const BasePolicy& base, const GridSpec& per_logit,
                                               std::uint64_t max_evals = 100'000'000);

// Exact E over D_x x D_y x D_y x D_omega of fn(x, y, y', omega); serial
// enumeration, independent of the diagnostics code path. Refuses (never
// samples) when the triple count exceeds the budget.
double exact_expectation(const std::function<double(int, int, int, int)>& fn,
                         const GenerativeModel& model,
                         std::uint64_t max_triples = 50'000'000);

}  // namespace prefopt::oracle
