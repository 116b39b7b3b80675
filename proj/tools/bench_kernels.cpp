// Benchmark of the OpenMP kernels against their serial references: empirical
// objective and gradient over a large dataset, and the exact population-loss
// enumeration. Also reports the relative disagreement, which should sit at
// rounding level.

#include <chrono>
#include <cmath>
#include <cstdio>

#include "prefopt/diagnostics.hpp"
#include "prefopt/optimizer.hpp"
#include "prefopt/oracle.hpp"
#include "prefopt/parallel.hpp"
#include "prefopt/rng.hpp"
#include "prefopt/serial_ref.hpp"

using namespace prefopt;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_seconds();
    fn();
    best = std::min(best, now_seconds() - t0);
  }
  return best;
}

}  // namespace

int main() {
  const int X = 16, Y = 24, n = 400'000;
  Rng rng(2024);
  Matrix r_star(X, Y);
  for (double& v : r_star.data()) v = 0.5 * rng.normal();
  auto model = GenerativeModel::btl(std::vector<double>(X, 1.0 / X), Matrix(X, Y, 1.0 / Y),
                                    GroundTruth{r_star});
  const auto data = sample_dataset(model, n, 7);
  Matrix logits(X, Y);
  for (double& v : logits.data()) v = 0.6 * rng.normal();
  const TabularPolicy policy(logits);
  const LossSpec loss = logistic_loss(1.0);
  const BasePolicy base = BasePolicy::uniform();

  std::printf("threads: %d, dataset: n=%d, space: %dx%d\n", par::max_threads(), n, X, Y);

  volatile double sink = 0.0;
  double serial_obj = 0.0, parallel_obj = 0.0;
  const double t_obj_ser = time_best_of(3, [&] {
    serial_obj = ref::objective(PolicyView(policy), data, loss, base);
    sink = serial_obj;
  });
  const double t_obj_par = time_best_of(3, [&] {
    parallel_obj = objective(PolicyView(policy), data, loss, base);
    sink = parallel_obj;
  });
  std::printf("objective        serial %8.4fs | openmp %8.4fs | speedup %4.2fx | rel diff %.2e\n",
              t_obj_ser, t_obj_par, t_obj_ser / t_obj_par,
              std::abs(serial_obj - parallel_obj) / std::abs(serial_obj));

  Matrix g_ser(X, Y), g_par(X, Y);
  const double t_grad_ser = time_best_of(3, [&] {
    g_ser = ref::gradient_tabular(policy, data, loss, base);
    sink = g_ser(0, 0);
  });
  const double t_grad_par = time_best_of(3, [&] {
    g_par = gradient(policy, data, loss, base);
    sink = g_par(0, 0);
  });
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < g_ser.data().size(); ++i) {
    num += (g_ser.data()[i] - g_par.data()[i]) * (g_ser.data()[i] - g_par.data()[i]);
    den += g_ser.data()[i] * g_ser.data()[i];
  }
  std::printf("gradient         serial %8.4fs | openmp %8.4fs | speedup %4.2fx | rel diff %.2e\n",
              t_grad_ser, t_grad_par, t_grad_ser / t_grad_par, std::sqrt(num / den));

  // larger space so the triple enumeration dominates
  const int PX = 48, PY = 96;
  Matrix r2(PX, PY);
  for (double& v : r2.data()) v = 0.4 * rng.normal();
  auto model2 = GenerativeModel::btl(std::vector<double>(PX, 1.0 / PX),
                                     Matrix(PX, PY, 1.0 / PY), GroundTruth{r2});
  Matrix logits2(PX, PY);
  for (double& v : logits2.data()) v = 0.5 * rng.normal();
  const TabularPolicy policy2(logits2);
  double pop_ser = 0.0, pop_par = 0.0;
  const double t_pop_ser = time_best_of(3, [&] {
    pop_ser = ref::population_loss(PolicyView(policy2), model2, loss, base);
    sink = pop_ser;
  });
  const double t_pop_par = time_best_of(3, [&] {
    pop_par = population_loss(PolicyView(policy2), model2, loss, base);
    sink = pop_par;
  });
  std::printf("population_loss  serial %8.4fs | openmp %8.4fs | speedup %4.2fx | rel diff %.2e\n",
              t_pop_ser, t_pop_par, t_pop_ser / t_pop_par,
              std::abs(pop_ser - pop_par) / std::abs(pop_ser));

  (void)sink;
  return 0;
}
