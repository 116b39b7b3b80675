#include <doctest.h>

#include <cmath>

#include "prefopt/diagnostics.hpp"
#include "prefopt/errors.hpp"
#include "prefopt/oracle.hpp"
#include "prefopt/rng.hpp"

using namespace prefopt;

namespace {

GenerativeModel small_btl(double scale = 0.8) {
  Matrix r = Matrix::from_rows({{scale, 0.0, -scale}});
  return GenerativeModel::btl({1.0}, Matrix(1, 3, 1.0 / 3), GroundTruth{std::move(r)});
}

}  // namespace

TEST_CASE("grid_minimize_conditional: logistic link points") {
  const LossSpec l = logistic_loss(1.0);
  const oracle::GridSpec grid{-6.0, 6.0, 601, 3};
  CHECK(std::abs(oracle::grid_minimize_conditional(l, 0.5, grid).v) < 1e-6);
  const double eta = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(oracle::grid_minimize_conditional(l, eta, grid).v == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("grid_minimize_conditional: normalized squared link point") {
  const LossSpec l = squared_loss(1.0);
  const oracle::GridSpec grid{-6.0, 6.0, 601, 3};
  CHECK(oracle::grid_minimize_conditional(l, 0.75, grid).v ==
        doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("grid_minimize_conditional: boundary minimizers are flagged") {
  const LossSpec l = logistic_loss(1.0);
  const oracle::GridSpec grid{-1.0, 1.0, 101, 0};
  const auto r = oracle::grid_minimize_conditional(l, 0.99, grid);  // link ~ 4.6
  CHECK(r.at_boundary);
  CHECK(r.v == doctest::Approx(1.0));
  CHECK_FALSE(oracle::grid_minimize_conditional(l, 0.6, grid).at_boundary);
}

TEST_CASE("grid_minimize_conditional: refinement never worsens the objective") {
  const LossSpec l = logistic_loss(1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int passes : {0, 1, 2, 4, 8}) {
    const oracle::GridSpec grid{-6.0, 6.0, 101, passes};
    const auto r = oracle::grid_minimize_conditional(l, 0.8, grid);
    CHECK(r.objective_value <= prev + 1e-15);
    prev = r.objective_value;
  }
}

TEST_CASE("brute force: matched instance lands within a cell of the benchmark") {
  const auto model = small_btl(0.7);
  const LossSpec loss = logistic_loss(1.0);
  const BasePolicy base = BasePolicy::uniform();
  const oracle::GridSpec grid{-2.0, 2.0, 21, 0};
  const auto brute = oracle::brute_force_population_minimizer(model, loss, base, grid);
  const auto star = benchmark_policy(model, loss, base).pi_star;
  const double cell = 4.0 / 20.0;
  for (int y = 0; y < 3; ++y) {
    const double pinned = star.logits()(0, y) - star.logits()(0, 0);
    CHECK(std::abs(brute.logits()(0, y) - pinned) <= cell + 1e-12);
  }
}

TEST_CASE("brute force: indifferent preferences give near-zero margins") {
  std::vector<double> eta(9, 0.5);
  const auto model =
      GenerativeModel::custom({1.0}, Matrix(1, 3, 1.0 / 3), EtaTable(1, 3, eta));
  const oracle::GridSpec grid{-2.0, 2.0, 21, 0};
  const auto brute =
      oracle::brute_force_population_minimizer(model, logistic_loss(1.0), BasePolicy::uniform(),
                                               grid);
  const double cell = 4.0 / 20.0;
  for (int y = 0; y < 3; ++y)
    for (int yp = 0; yp < 3; ++yp)
      CHECK(std::abs(brute.logits()(0, y) - brute.logits()(0, yp)) <= cell + 1e-12);
}

TEST_CASE("brute force: budget refusal") {
  Matrix r(1, 12, 0.0);
  const auto model = GenerativeModel::btl({1.0}, Matrix(1, 12, 1.0 / 12), GroundTruth{r});
  const oracle::GridSpec grid{-2.0, 2.0, 21, 0};
  CHECK_THROWS_AS(oracle::brute_force_population_minimizer(model, logistic_loss(1.0),
                                                           BasePolicy::uniform(), grid, 100000),
                  budget_error);
}

TEST_CASE("exact_expectation: total probability, label mean, collision probability") {
  Rng rng(77);
  Matrix d_y(2, 3);
  for (int x = 0; x < 2; ++x) {
    double total = 0.0;
    for (int y = 0; y < 3; ++y) {
      d_y(x, y) = 0.5 + rng.u01();
      total += d_y(x, y);
    }
    for (int y = 0; y < 3; ++y) d_y(x, y) /= total;
  }
  Matrix r(2, 3);
  for (double& v : r.data()) v = 0.7 * rng.normal();
  const auto model = GenerativeModel::btl({0.3, 0.7}, d_y, GroundTruth{r});

  CHECK(oracle::exact_expectation([](int, int, int, int) { return 1.0; }, model) ==
        doctest::Approx(1.0).epsilon(1e-12));

  const double mean_omega =
      oracle::exact_expectation([](int, int, int, int omega) { return double(omega); }, model);
  double expected = 0.0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 3; ++y)
      for (int yp = 0; yp < 3; ++yp)
        expected += model.d_x()[static_cast<std::size_t>(x)] * d_y(x, y) * d_y(x, yp) *
                    (2.0 * model.preference_prob(x, y, yp) - 1.0);
  CHECK(mean_omega == doctest::Approx(expected).epsilon(1e-12));

  const double collision = oracle::exact_expectation(
      [](int, int y, int yp, int) { return y == yp ? 1.0 : 0.0; }, model);
  double expected_coll = 0.0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 3; ++y)
      expected_coll += model.d_x()[static_cast<std::size_t>(x)] * d_y(x, y) * d_y(x, y);
  CHECK(collision == doctest::Approx(expected_coll).epsilon(1e-12));

  CHECK_THROWS_AS(oracle::exact_expectation([](int, int, int, int) { return 1.0; }, model, 4),
                  budget_error);
}

TEST_CASE("oracle and diagnostics agree on the population loss") {
  Rng rng(123);
  Matrix r(2, 4);
  for (double& v : r.data()) v = 0.5 * rng.normal();
  Matrix d_y(2, 4, 0.25);
  const auto model = GenerativeModel::btl({0.5, 0.5}, d_y, GroundTruth{r});
  Matrix logits(2, 4);
  for (double& v : logits.data()) v = 0.8 * rng.normal();
  const TabularPolicy policy(logits);
  const TabularPolicy ref(Matrix(2, 4, 0.1));
  const BasePolicy base = BasePolicy::reference(ref);
  const LossSpec loss = logistic_loss(0.8);

  const Matrix logmu = base.log_weight_table(2, 4);
  const auto integrand = [&](int x, int y, int yp, int omega) {
    const double m = margin_from_tables(policy.log_probs(), logmu, x, y, yp);
    return loss.value(omega * m);
  };
  const double via_oracle = oracle::exact_expectation(integrand, model);
  const double via_diag = population_loss(PolicyView(policy), model, loss, base);
  CHECK(std::abs(via_oracle - via_diag) < 1e-12);
}
