#pragma once

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace prefopt::par {

// Fixed-chunk deterministic reductions. The index range is split into a chunk
// grid that does not depend on the thread count; each chunk is summed serially
// and the partials are combined in chunk order. Results are therefore
// bit-identical across runs and across OMP_NUM_THREADS settings, which the
// byte-identical-output contract of the CLI relies on.

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline std::size_t chunk_count(std::size_t n) {
  constexpr std::size_t kChunks = 256;
  return n < kChunks ? (n == 0 ? 1 : n) : kChunks;
}

// Sum of term(i) for i in [0, n).
template <typename Term>
double sum(std::size_t n, Term&& term) {
  const std::size_t nc = chunk_count(n);
  std::vector<double> partial(nc, 0.0);
#pragma omp parallel for schedule(static)
  for (long long c = 0; c < static_cast<long long>(nc); ++c) {
    const std::size_t lo = (n * static_cast<std::size_t>(c)) / nc;
    const std::size_t hi = (n * (static_cast<std::size_t>(c) + 1)) / nc;
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += term(i);
    partial[static_cast<std::size_t>(c)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

// Accumulates dim-vector contributions: body(i, acc) must add term i into acc.
// Per-chunk buffers are combined in chunk order.
template <typename Body>
std::vector<double> accumulate(std::size_t n, std::size_t dim, Body&& body) {
  const std::size_t nc = chunk_count(n);
  std::vector<std::vector<double>> partial(nc, std::vector<double>(dim, 0.0));
#pragma omp parallel for schedule(static)
  for (long long c = 0; c < static_cast<long long>(nc); ++c) {
    const std::size_t lo = (n * static_cast<std::size_t>(c)) / nc;
    const std::size_t hi = (n * (static_cast<std::size_t>(c) + 1)) / nc;
    auto& acc = partial[static_cast<std::size_t>(c)];
    for (std::size_t i = lo; i < hi; ++i) body(i, acc);
  }
  std::vector<double> total(dim, 0.0);
  for (const auto& p : partial)
    for (std::size_t k = 0; k < dim; ++k) total[k] += p[k];
  return total;
}

// Max of term(i); order-independent, plain reduction.
template <typename Term>
double max(std::size_t n, Term&& term, double init) {
  const std::size_t nc = chunk_count(n);
  std::vector<double> partial(nc, init);
#pragma omp parallel for schedule(static)
  for (long long c = 0; c < static_cast<long long>(nc); ++c) {
    const std::size_t lo = (n * static_cast<std::size_t>(c)) / nc;
    const std::size_t hi = (n * (static_cast<std::size_t>(c) + 1)) / nc;
    double m = init;
    for (std::size_t i = lo; i < hi; ++i) {
      const double v = term(i);
      if (v > m) m = v;
    }
    partial[static_cast<std::size_t>(c)] = m;
  }
  double m = init;
  for (double p : partial)
    if (p > m) m = p;
  return m;
}

}  // namespace prefopt::par
