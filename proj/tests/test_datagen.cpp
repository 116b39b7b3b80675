#include <doctest.h>

#include <cmath>

#include "prefopt/datagen.hpp"
#include "prefopt/json_io.hpp"
#include "prefopt/oracle.hpp"
#include "prefopt/rng.hpp"

using namespace prefopt;

namespace {

Matrix uniform_rows(int X, int Y) { return Matrix(X, Y, 1.0 / Y); }

GenerativeModel btl_gap_one() {
  // two responses with reward gap 1 in a single context
  return GenerativeModel::btl({1.0}, uniform_rows(1, 2),
                              GroundTruth{Matrix::from_rows({{1.0, 0.0}})});
}

}  // namespace

TEST_CASE("preference_prob: BTL values") {
  const auto equal = GenerativeModel::btl({1.0}, uniform_rows(1, 2),
                                          GroundTruth{Matrix::from_rows({{0.4, 0.4}})});
  CHECK(equal.preference_prob(0, 0, 1) == doctest::Approx(0.5));

  const auto gap = btl_gap_one();
  CHECK(gap.preference_prob(0, 0, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(gap.preference_prob(0, 0, 1) == doctest::Approx(0.7311).epsilon(1e-3));
}

TEST_CASE("preference_prob: linear values and complement symmetry") {
  const auto lin = GenerativeModel::linear({1.0}, uniform_rows(1, 2),
                                           GroundTruth{Matrix::from_rows({{0.5, 0.0}})});
  CHECK(lin.preference_prob(0, 0, 1) == doctest::Approx(0.75));
  CHECK(lin.preference_prob(0, 1, 0) == doctest::Approx(0.25));
  CHECK(lin.linear_scale() == 1.0);
}

TEST_CASE("linear model rescales wide rewards and records the factor") {
  const auto lin = GenerativeModel::linear({1.0}, uniform_rows(1, 3),
                                           GroundTruth{Matrix::from_rows({{4.0, 0.0, -4.0}})});
  CHECK(lin.linear_scale() == doctest::Approx(1.0 / 8.0));
  for (int y = 0; y < 3; ++y)
    for (int yp = 0; yp < 3; ++yp) {
      const double eta = lin.preference_prob(0, y, yp);
      CHECK(eta >= 0.0);
      CHECK(eta <= 1.0);
      CHECK(eta + lin.preference_prob(0, yp, y) == doctest::Approx(1.0));
    }
}

TEST_CASE("label symmetry holds for all preference kinds") {
  Rng rng(7);
  Matrix r(2, 3);
  for (double& v : r.data()) v = rng.normal();
  const auto btl = GenerativeModel::btl({0.5, 0.5}, uniform_rows(2, 3), GroundTruth{r});
  for (int y = 0; y < 3; ++y)
    for (int yp = 0; yp < 3; ++yp)
      CHECK(btl.preference_prob(0, y, yp) + btl.preference_prob(0, yp, y) ==
            doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<double> broken = {0.5, 0.9, 0.1, 0.5, 0.5, 0.5, 0.9, 0.5, 0.5};
  CHECK_THROWS_AS(EtaTable(1, 3, broken), std::invalid_argument);  // breaks symmetry
  const std::vector<double> good = {0.5, 0.9, 0.1, 0.1, 0.5, 0.4, 0.9, 0.6, 0.5};
  CHECK_NOTHROW(EtaTable(1, 3, good));
}

TEST_CASE("sample_dataset: deterministic under a fixed seed") {
  const auto model = btl_gap_one();
  const auto a = sample_dataset(model, 500, 42);
  const auto b = sample_dataset(model, 500, 42);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].x == b.samples[i].x);
    CHECK(a.samples[i].y == b.samples[i].y);
    CHECK(a.samples[i].y_prime == b.samples[i].y_prime);
    CHECK(a.samples[i].omega == b.samples[i].omega);
  }
  CHECK(dataset_to_csv(a, Json::object()) == dataset_to_csv(b, Json::object()));
  const auto c = sample_dataset(model, 500, 43);
  CHECK(dataset_to_csv(a, Json::object()) != dataset_to_csv(c, Json::object()));
}

TEST_CASE("sample_dataset: degenerate eta pins every label to +1") {
  // eta = 1 whenever y != y', 0.5 on ties
  std::vector<double> eta(9, 0.5);
  eta[0 * 3 + 1] = 1.0;
  eta[0 * 3 + 2] = 1.0;
  eta[1 * 3 + 2] = 1.0;
  eta[1 * 3 + 0] = 0.0;
  eta[2 * 3 + 0] = 0.0;
  eta[2 * 3 + 1] = 0.0;
  const auto model = GenerativeModel::custom({1.0}, uniform_rows(1, 3), EtaTable(1, 3, eta));
  const auto data = sample_dataset(model, 400, 9);
  for (const auto& s : data.samples) {
    if (s.y == s.y_prime) continue;
    if (s.y < s.y_prime) CHECK(s.omega == 1);
    if (s.y > s.y_prime) CHECK(s.omega == -1);
  }
}

TEST_CASE("sample_dataset: empirical label frequency concentrates on eta") {
  const auto model = btl_gap_one();
  const auto data = sample_dataset(model, 100'000, 1234);
  int wins = 0, count = 0;
  for (const auto& s : data.samples) {
    if (s.y == 0 && s.y_prime == 1) {
      ++count;
      wins += s.omega == 1 ? 1 : 0;
    }
  }
  REQUIRE(count > 20'000);
  const double eta = 1.0 / (1.0 + std::exp(-1.0));
  const double se = std::sqrt(eta * (1.0 - eta) / count);
  CHECK(std::abs(double(wins) / count - eta) < 3.0 * se);
}

TEST_CASE("benchmark_policy: softmax of R* under the uniform base") {
  const auto model = GenerativeModel::btl({1.0}, uniform_rows(1, 3),
                                          GroundTruth{Matrix::from_rows({{1.0, 0.0, -1.0}})});
  const auto b = benchmark_policy(model, logistic_loss(1.0), BasePolicy::uniform());
  CHECK(b.matched);
  CHECK(b.max_link_residual < 1e-9);
  const double z = std::exp(1.0) + 1.0 + std::exp(-1.0);
  CHECK(b.pi_star.prob(0, 0) == doctest::Approx(std::exp(1.0) / z).epsilon(1e-6));
  CHECK(b.pi_star.prob(0, 1) == doctest::Approx(1.0 / z).epsilon(1e-6));
  CHECK(b.pi_star.prob(0, 2) == doctest::Approx(std::exp(-1.0) / z).epsilon(1e-6));
  CHECK(b.pi_star.prob(0, 0) == doctest::Approx(0.6652).epsilon(1e-3));
}

TEST_CASE("benchmark_policy: zero reward returns the reference") {
  Rng rng(21);
  Matrix ref_logits(2, 4);
  for (double& v : ref_logits.data()) v = 0.6 * rng.normal();
  const TabularPolicy ref(ref_logits);
  const auto model =
      GenerativeModel::btl({0.5, 0.5}, uniform_rows(2, 4), GroundTruth{Matrix(2, 4, 0.0)});
  const auto b = benchmark_policy(model, logistic_loss(1.0), BasePolicy::reference(ref));
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 4; ++y)
      CHECK(b.pi_star.log_prob(x, y) == doctest::Approx(ref.log_prob(x, y)).epsilon(1e-12));
}

TEST_CASE("benchmark_policy: margins equal the link on the support") {
  Rng rng(31);
  Matrix r(3, 4);
  for (double& v : r.data()) v = 0.5 * rng.normal();
  const auto model = GenerativeModel::btl({0.2, 0.5, 0.3}, uniform_rows(3, 4), GroundTruth{r});
  for (double beta : {0.5, 1.0, 2.0}) {
    const auto b = benchmark_policy(model, logistic_loss(beta), BasePolicy::uniform());
    CHECK(b.matched);
    CHECK(b.max_link_residual < 1e-6);
  }
  // mismatched but proper pair still constructs, flag cleared
  const auto mm = benchmark_policy(model, squared_loss(1.0), BasePolicy::uniform());
  CHECK_FALSE(mm.matched);
}

TEST_CASE("benchmark_policy: R_pi* - R* - log mu is constant per context") {
  Rng rng(41);
  Matrix r(2, 5);
  for (double& v : r.data()) v = 0.4 * rng.normal();
  Matrix ref_logits(2, 5);
  for (double& v : ref_logits.data()) v = 0.4 * rng.normal();
  const TabularPolicy ref(ref_logits);
  const BasePolicy base = BasePolicy::reference(ref);
  const auto model = GenerativeModel::btl({0.5, 0.5}, uniform_rows(2, 5), GroundTruth{r});
  const auto b = benchmark_policy(model, logistic_loss(1.0), base);
  for (int x = 0; x < 2; ++x) {
    const double c0 = b.pi_star.log_prob(x, 0) - r(x, 0) - base.log_weight(x, 0);
    for (int y = 1; y < 5; ++y) {
      const double cy = b.pi_star.log_prob(x, y) - r(x, y) - base.log_weight(x, y);
      CHECK(std::abs(cy - c0) < 1e-9);
    }
  }
}

TEST_CASE("benchmark_policy: margins match the conditional grid minimizer") {
  const auto model = GenerativeModel::btl({1.0}, uniform_rows(1, 3),
                                          GroundTruth{Matrix::from_rows({{0.6, 0.0, -0.3}})});
  const LossSpec loss = logistic_loss(1.0);
  const BasePolicy base = BasePolicy::uniform();
  const auto b = benchmark_policy(model, loss, base);
  const oracle::GridSpec grid{-6.0, 6.0, 601, 3};
  for (int y = 0; y < 3; ++y)
    for (int yp = 0; yp < 3; ++yp) {
      const double eta = model.preference_prob(0, y, yp);
      const double v = oracle::grid_minimize_conditional(loss, eta, grid).v;
      CHECK(std::abs(margin(PolicyView(b.pi_star), base, 0, y, yp) - v) < 1e-4);
    }
}

TEST_CASE("benchmark_policy: hinge loss is unsupported; bounds are enforced") {
  const auto model = btl_gap_one();
  CHECK_THROWS_AS(benchmark_policy(model, hinge_loss(1.0), BasePolicy::uniform()),
                  std::invalid_argument);
  // link target is exactly 1 here; a configured range of 0.5 must reject it
  CHECK_THROWS_AS(benchmark_policy(model, logistic_loss(1.0), BasePolicy::uniform(),
                                   BoundConstants{0.5, 10.0}),
                  std::domain_error);
  CHECK_NOTHROW(benchmark_policy(model, logistic_loss(1.0), BasePolicy::uniform(),
                                 BoundConstants{2.0, 10.0}));
}

TEST_CASE("check_realizability: unconstrained, L2 ball, CE ball") {
  Rng rng(51);
  Matrix logits(1, 3);
  for (double& v : logits.data()) v = rng.normal();
  const TabularPolicy pi_star(logits);
  const TabularPolicy anchor = TabularPolicy::uniform(1, 3);

  PolicyClassSpec unconstrained;
  CHECK(check_realizability(unconstrained, pi_star).realizable);

  PolicyClassSpec ball;
  ball.kind = PolicyClassKind::L2Ball;
  ball.anchor = anchor;
  ball.radius = 0.0;
  const auto rb = check_realizability(ball, pi_star);
  CHECK_FALSE(rb.realizable);
  double expected = 0.0;
  const Matrix c = pi_star.centered_logits();
  for (double v : c.data()) expected += v * v;
  CHECK(rb.measured == doctest::Approx(std::sqrt(expected)));
  ball.radius = rb.measured + 0.01;
  CHECK(check_realizability(ball, pi_star).realizable);

  PolicyClassSpec ce;
  ce.kind = PolicyClassKind::CeBall;
  ce.anchor = anchor;
  ce.d_x = {1.0};
  double ce_value = 0.0;
  for (int y = 0; y < 3; ++y) ce_value -= (1.0 / 3) * pi_star.log_prob(0, y);
  ce.lambda = ce_value + 0.1;
  const auto rc = check_realizability(ce, pi_star);
  CHECK(rc.realizable);
  CHECK(rc.slack == doctest::Approx(0.1).epsilon(1e-9));
  ce.lambda = ce_value - 0.1;
  CHECK_FALSE(check_realizability(ce, pi_star).realizable);
}
