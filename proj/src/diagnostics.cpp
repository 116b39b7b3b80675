#include "prefopt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "prefopt/errors.hpp"
#include "prefopt/parallel.hpp"

namespace prefopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSlack = 1e-9;

void check_shapes(const PolicyView& policy, const GenerativeModel& model) {
  if (policy.num_contexts() != model.num_contexts() ||
      policy.num_responses() != model.num_responses())
    throw std::invalid_argument("diagnostics: policy/model shape mismatch");
}

void check_budget(const GenerativeModel& model, const EnumerationBudget& budget) {
  const std::uint64_t triples = static_cast<std::uint64_t>(model.num_contexts()) *
                                model.num_responses() * model.num_responses();
  if (triples > budget.max_triples)
    throw budget_error("enumeration budget exceeded: " + std::to_string(triples) + " triples");
}

// dRbar(x, .) for one context: (log pi - log pi*) centered under D_y(.|x).
std::vector<double> delta_rbar_row(const PolicyView& policy, const PolicyView& pi_star,
                                   const GenerativeModel& model, int x) {
  const int Y = model.num_responses();
  std::vector<double> d(static_cast<std::size_t>(Y));
  double mean = 0.0;
  for (int y = 0; y < Y; ++y) {
    d[static_cast<std::size_t>(y)] = policy.log_prob(x, y) - pi_star.log_prob(x, y);
    mean += model.d_y()(x, y) * d[static_cast<std::size_t>(y)];
  }
  for (double& v : d) v -= mean;
  return d;
}

}  // namespace

double population_loss(const PolicyView& policy, const GenerativeModel& model,
                       const LossSpec& loss, const BasePolicy& base,
                       const EnumerationBudget& budget) {
  check_shapes(policy, model);
  check_budget(model, budget);
  const int X = model.num_contexts(), Y = model.num_responses();
  const Matrix logmu = base.log_weight_table(X, Y);
  const Matrix& logp = policy.log_probs();
  // flattened (x, y) pairs in parallel; y' runs serially inside
  return par::sum(static_cast<std::size_t>(X) * Y, [&](std::size_t i) {
    const int x = static_cast<int>(i) / Y;
    const int y = static_cast<int>(i) % Y;
    const double wxy = model.d_x()[static_cast<std::size_t>(x)] * model.d_y()(x, y);
    if (wxy == 0.0) return 0.0;
    double acc = 0.0;
    for (int yp = 0; yp < Y; ++yp) {
      const double w = wxy * model.d_y()(x, yp);
      if (w == 0.0) continue;
      const double m = margin_from_tables(logp, logmu, x, y, yp);
      const double eta = model.preference_prob(x, y, yp);
      acc += w * (eta * loss.value(m) + (1.0 - eta) * loss.value(-m));
    }
    return acc;
  });
}

double excess_loss(const PolicyView& policy, const PolicyView& pi_star,
                   const GenerativeModel& model, const LossSpec& loss, const BasePolicy& base,
                   const EnumerationBudget& budget) {
  return population_loss(policy, model, loss, base, budget) -
         population_loss(pi_star, model, loss, base, budget);
}

CenteredGapResult centered_gap(const PolicyView& policy, const PolicyView& pi_star,
                               const GenerativeModel& model, GapUnder under) {
  check_shapes(policy, model);
  check_shapes(pi_star, model);
  const int X = model.num_contexts(), Y = model.num_responses();
  CenteredGapResult r;
  for (int x = 0; x < X; ++x) {
    const double dx = model.d_x()[static_cast<std::size_t>(x)];
    if (dx == 0.0) continue;
    const auto d = delta_rbar_row(policy, pi_star, model, x);
    // y-weights for the requested distribution
    std::vector<double> w(static_cast<std::size_t>(Y));
    for (int y = 0; y < Y; ++y)
      w[static_cast<std::size_t>(y)] =
          under == GapUnder::Data ? model.d_y()(x, y) : std::exp(pi_star.log_prob(x, y));
    double single = 0.0, mean = 0.0;
    for (int y = 0; y < Y; ++y) {
      single += w[static_cast<std::size_t>(y)] * d[static_cast<std::size_t>(y)] *
                d[static_cast<std::size_t>(y)];
      mean += w[static_cast<std::size_t>(y)] * d[static_cast<std::size_t>(y)];
    }
    r.single += dx * single;
    // E[(a - b)^2] over i.i.d. draws = 2 E[a^2] - 2 (E[a])^2
    r.pairwise += dx * (2.0 * single - 2.0 * mean * mean);
  }
  return r;
}

std::string to_string(CoverageVariant v) {
  switch (v) {
    case CoverageVariant::DensityRatio: return "density_ratio";
    case CoverageVariant::LinearEigenvalue: return "linear_eigenvalue";
    case CoverageVariant::EmpiricalRatio: return "empirical_ratio";
  }
  return "unknown";
}

CoverageVariant coverage_variant_from_string(const std::string& name) {
  if (name == "density_ratio") return CoverageVariant::DensityRatio;
  if (name == "linear_eigenvalue") return CoverageVariant::LinearEigenvalue;
  if (name == "empirical_ratio") return CoverageVariant::EmpiricalRatio;
  throw std::invalid_argument("unknown coverage variant: " + name);
}

CoverageResult coverage_density_ratio(const PolicyView& pi_star, const GenerativeModel& model) {
  check_shapes(pi_star, model);
  CoverageResult r{0.0, false};
  for (int x = 0; x < model.num_contexts(); ++x) {
    if (model.d_x()[static_cast<std::size_t>(x)] == 0.0) continue;
    for (int y = 0; y < model.num_responses(); ++y) {
      const double p = std::exp(pi_star.log_prob(x, y));
      if (p <= 0.0) continue;
      const double q = model.d_y()(x, y);
      if (q <= 0.0) {
        r.infinite = true;
        r.value = kInf;
        return r;
      }
      r.value = std::max(r.value, p / q);
    }
  }
  return r;
}

namespace {

// Jacobi eigen-decomposition for small symmetric matrices.
void jacobi_eigen(Matrix a, std::vector<double>& eigvals, Matrix& eigvecs) {
  const int n = a.rows();
  eigvecs = Matrix(n, n, 0.0);
  for (int i = 0; i < n; ++i) eigvecs(i, i) = 1.0;
  for (int sweep = 0; sweep < 128; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-26) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = eigvecs(k, p), vkq = eigvecs(k, q);
          eigvecs(k, p) = c * vkp - s * vkq;
          eigvecs(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  eigvals.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) eigvals[static_cast<std::size_t>(i)] = a(i, i);
}

Matrix second_moment(const FeatureTable& features, const GenerativeModel& model,
                     const PolicyView* pi) {
  const int d = features.dim();
  Matrix sigma(d, d, 0.0);
  for (int x = 0; x < model.num_contexts(); ++x) {
    const double dx = model.d_x()[static_cast<std::size_t>(x)];
    if (dx == 0.0) continue;
    for (int y = 0; y < model.num_responses(); ++y) {
      const double w =
          dx * (pi ? std::exp(pi->log_prob(x, y)) : model.d_y()(x, y));
      if (w == 0.0) continue;
      const auto f = features.phi(x, y);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) sigma(i, j) += w * f[i] * f[j];
    }
  }
  return sigma;
}

}  // namespace

CoverageResult coverage_linear_eigenvalue(const FeatureTable& features, const PolicyView& pi_star,
                                          const GenerativeModel& model) {
  check_shapes(pi_star, model);
  if (features.num_contexts() != model.num_contexts() ||
      features.num_responses() != model.num_responses())
    throw std::invalid_argument("coverage_linear_eigenvalue: feature shape mismatch");
  const int d = features.dim();
  const Matrix sigma_y = second_moment(features, model, nullptr);
  const Matrix sigma_star = second_moment(features, model, &pi_star);

  std::vector<double> lam;
  Matrix v;
  jacobi_eigen(sigma_y, lam, v);
  double lam_max_y = 0.0;
  for (double l : lam) lam_max_y = std::max(lam_max_y, std::abs(l));
  const double tol = 1e-12 * std::max(1.0, lam_max_y);

  // whitened = D^{-1/2} V^T Sigma_star V D^{-1/2}; mass on the null space of
  // Sigma_y means no data coverage in that direction.
  Matrix m(d, d, 0.0);  // V^T Sigma_star V
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) acc += v(a, i) * sigma_star(a, b) * v(b, j);
      m(i, j) = acc;
    }
  Matrix whitened(d, d, 0.0);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const double li = lam[static_cast<std::size_t>(i)], lj = lam[static_cast<std::size_t>(j)];
      if (li <= tol || lj <= tol) {
        if (std::abs(m(i, j)) > 1e-10) return {kInf, true};
        whitened(i, j) = 0.0;
      } else {
        whitened(i, j) = m(i, j) / std::sqrt(li * lj);
      }
    }
  }
  std::vector<double> wlam;
  Matrix wv;
  jacobi_eigen(whitened, wlam, wv);
  double c = 0.0;
  for (double l : wlam) c = std::max(c, l);
  return {c, false};
}

CoverageResult coverage_empirical_ratio(const PolicyView& policy, const PolicyView& pi_star,
                                        const GenerativeModel& model) {
  const auto data_gap = centered_gap(policy, pi_star, model, GapUnder::Data);
  const auto star_gap = centered_gap(policy, pi_star, model, GapUnder::PiStar);
  if (data_gap.single <= 0.0) {
    // identical policies up to offsets: any constant works; report 1
    return {1.0, false};
  }
  return {star_gap.single / data_gap.single, false};
}

TheoremBound theorem_bound(double epsilon, double c_mu, double coverage_C, double range_R) {
  TheoremBound b;
  if (epsilon < 0.0) epsilon = 0.0;  // roundoff on realizable instances
  if (!(c_mu > 0.0) || std::isinf(coverage_C)) {
    b.unbounded = true;
    b.total = b.term_sqrt_eps = b.term_sqrt_ceps = b.term_exp = kInf;
    if (epsilon == 0.0 && !(c_mu > 0.0)) {
      // 0/0: keep the explicit unbounded flag but a zero-epsilon bound of 0
      b.total = b.term_sqrt_eps = b.term_sqrt_ceps = b.term_exp = 0.0;
    }
    return b;
  }
  b.term_sqrt_eps = std::sqrt(epsilon / c_mu);
  b.term_sqrt_ceps = std::sqrt(coverage_C * epsilon / c_mu);
  b.term_exp = 0.5 * std::exp(range_R) * coverage_C * epsilon / c_mu;
  b.total = b.term_sqrt_eps + b.term_sqrt_ceps + b.term_exp;
  return b;
}

double kl_to_benchmark(const PolicyView& pi_star, const PolicyView& policy,
                       std::span<const double> d_x) {
  if (pi_star.num_contexts() != policy.num_contexts() ||
      pi_star.num_responses() != policy.num_responses())
    throw std::invalid_argument("kl_to_benchmark: shape mismatch");
  if (static_cast<int>(d_x.size()) != pi_star.num_contexts())
    throw std::invalid_argument("kl_to_benchmark: d_x size mismatch");
  double total = 0.0;
  for (int x = 0; x < pi_star.num_contexts(); ++x) {
    const double dx = d_x[static_cast<std::size_t>(x)];
    if (dx == 0.0) continue;
    double kl = 0.0;
    for (int y = 0; y < pi_star.num_responses(); ++y) {
      const double p = std::exp(pi_star.log_prob(x, y));
      if (p <= 0.0) continue;
      kl += p * (pi_star.log_prob(x, y) - policy.log_prob(x, y));
    }
    total += dx * kl;
  }
  return total;
}

DiagnosticsReport verify_lemmas(const PolicyView& policy, const PolicyView& pi_star,
                                const GenerativeModel& model, const LossSpec& loss,
                                const BasePolicy& base, const VerifyOptions& options) {
  check_shapes(policy, model);
  check_shapes(pi_star, model);
  const int X = model.num_contexts(), Y = model.num_responses();
  DiagnosticsReport rep;

  rep.epsilon = excess_loss(policy, pi_star, model, loss, base, options.budget);

  // Margin range over the data support, for both policies; the curvature
  // interval must cover every margin that appears in the Taylor bound.
  const Matrix logmu = base.log_weight_table(X, Y);
  double max_margin = 0.0, mean_abs_margin = 0.0;
  for (int x = 0; x < X; ++x) {
    const double dx = model.d_x()[static_cast<std::size_t>(x)];
    if (dx == 0.0) continue;
    for (int y = 0; y < Y; ++y) {
      if (model.d_y()(x, y) == 0.0) continue;
      for (int yp = 0; yp < Y; ++yp) {
        if (model.d_y()(x, yp) == 0.0) continue;
        const double m = margin_from_tables(policy.log_probs(), logmu, x, y, yp);
        const double ms = margin_from_tables(pi_star.log_probs(), logmu, x, y, yp);
        max_margin = std::max({max_margin, std::abs(m), std::abs(ms)});
        mean_abs_margin += dx * model.d_y()(x, y) * model.d_y()(x, yp) * std::abs(m);
      }
    }
  }
  rep.range_R_measured = max_margin;

  // Conservative curvature over the measured range; the Table-2 style point
  // estimate is reported separately and never used in the inequalities.
  const auto mc = min_curvature(loss, std::max(max_margin, 1e-12));
  rep.c_mu = options.c_mu_override.value_or(mc.value);
  rep.c_mu_degenerate = mc.degenerate;
  rep.c_mu_at_margins = loss.curvature(mean_abs_margin);
  const double beta = loss.params.beta != 0.0 ? loss.params.beta : 1.0;
  rep.c_mu_scaled_argument = rep.c_mu_at_margins / (beta * beta);

  const auto gap_data = centered_gap(policy, pi_star, model, GapUnder::Data);
  const auto gap_star = centered_gap(policy, pi_star, model, GapUnder::PiStar);
  rep.centered_gap_data = gap_data.single;
  rep.centered_gap_pairwise = gap_data.pairwise;
  rep.centered_gap_pistar = gap_star.single;

  // max |dRbar| enters the exponential inequality of Lemma 3; the exponent
  // range must dominate it as well as the margins.
  double max_drbar = 0.0;
  for (int x = 0; x < X; ++x) {
    if (model.d_x()[static_cast<std::size_t>(x)] == 0.0) continue;
    for (double v : delta_rbar_row(policy, pi_star, model, x))
      max_drbar = std::max(max_drbar, std::abs(v));
  }
  rep.range_R_exponent = options.range_override.value_or(std::max(max_margin, max_drbar));

  CoverageResult cov;
  switch (options.coverage) {
    case CoverageVariant::DensityRatio:
      cov = coverage_density_ratio(pi_star, model);
      break;
    case CoverageVariant::LinearEigenvalue:
      if (!options.features)
        throw std::invalid_argument("verify_lemmas: linear coverage needs features");
      cov = coverage_linear_eigenvalue(*options.features, pi_star, model);
      break;
    case CoverageVariant::EmpiricalRatio:
      cov = coverage_empirical_ratio(policy, pi_star, model);
      break;
  }
  rep.coverage_C = cov.value;
  rep.coverage_infinite = cov.infinite;
  rep.coverage_variant = to_string(options.coverage);

  rep.kl_actual = kl_to_benchmark(pi_star, policy, model.d_x());

  // E_x |log (Zbar_pi / Zbar_star)|; the per-context recentering leaves the
  // ratio unchanged, so arbitrary trained policies are admissible.
  double zgap = 0.0;
  for (int x = 0; x < X; ++x) {
    const double dx = model.d_x()[static_cast<std::size_t>(x)];
    if (dx == 0.0) continue;
    const double z_pi = centered_partition(policy, model.d_y().row(x), x);
    const double z_star = centered_partition(pi_star, model.d_y().row(x), x);
    zgap += dx * std::abs(std::log(z_pi / z_star));
  }
  rep.log_partition_gap = zgap;

  const double eps = std::max(rep.epsilon, 0.0);
  const double c = rep.c_mu;
  const double C = rep.coverage_C;

  rep.lemma1.lhs = gap_data.single;
  rep.lemma1.rhs = c > 0.0 ? 2.0 * eps / c : kInf;
  rep.lemma1.holds = rep.lemma1.lhs <= rep.lemma1.rhs + kSlack;

  rep.lemma2.lhs = rep.kl_actual;
  rep.lemma2.rhs = std::sqrt(2.0 * C * gap_data.single) + zgap;
  rep.lemma2.holds = rep.lemma2.lhs <= rep.lemma2.rhs + kSlack;

  rep.lemma3.lhs = zgap;
  rep.lemma3.rhs = c > 0.0 ? std::sqrt(C * eps / c) +
                                 0.5 * std::exp(rep.range_R_exponent) * C * eps / c
                           : kInf;
  rep.lemma3.holds = rep.lemma3.lhs <= rep.lemma3.rhs + kSlack;

  rep.bound = theorem_bound(eps, c, C, rep.range_R_exponent);
  rep.theorem.lhs = rep.kl_actual;
  rep.theorem.rhs = rep.bound.total;
  rep.theorem.holds = rep.theorem.lhs <= rep.theorem.rhs + kSlack;

  return rep;
}

Table2Estimate estimate_table2(const TrainTrace& trace, const LossSpec& loss) {
  if (trace.rows.empty()) throw std::invalid_argument("estimate_table2: empty trace");
  const TraceRow& last = trace.rows.back();
  Table2Estimate e;
  e.range_estimate = last.mean_abs_margin;
  e.c_mu_estimate = loss.curvature(last.mean_abs_margin);
  const double beta = loss.params.beta != 0.0 ? loss.params.beta : 1.0;
  e.c_mu_estimate_scaled = e.c_mu_estimate / (beta * beta);
  e.range_conservative = last.max_abs_margin;
  e.c_mu_conservative = min_curvature(loss, std::max(last.max_abs_margin, 1e-12)).value;
  return e;
}

}  // namespace prefopt
