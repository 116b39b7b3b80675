#include <doctest.h>

#include <cmath>
#include <vector>

#include "prefopt/core.hpp"
#include "prefopt/rng.hpp"

using namespace prefopt;

namespace {

TabularPolicy policy_from_probs(std::initializer_list<double> probs) {
  Matrix logits(1, static_cast<int>(probs.size()));
  int y = 0;
  for (double p : probs) logits(0, y++) = std::log(p);
  return TabularPolicy(std::move(logits));
}

Matrix random_logits(Rng& rng, int X, int Y, double scale) {
  Matrix m(X, Y);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("log_prob: uniform logits give log(1/|Y|)") {
  const TabularPolicy p = TabularPolicy::uniform(2, 3);
  for (int y = 0; y < 3; ++y) CHECK(p.log_prob(0, y) == doctest::Approx(std::log(1.0 / 3)));
}

TEST_CASE("log_prob: hand-evaluated softmax normalizer") {
  const TabularPolicy p(Matrix::from_rows({{1.0, 0.0, -1.0}}));
  const double expected = 1.0 - std::log(std::exp(1.0) + 1.0 + std::exp(-1.0));
  CHECK(std::abs(p.log_prob(0, 0) - expected) < 1e-15);
  CHECK(p.log_prob(0, 0) == doctest::Approx(-0.4076).epsilon(1e-3));
}

TEST_CASE("log_prob: zero-weight linear softmax is uniform") {
  const int X = 2, Y = 4, d = 3;
  std::vector<double> feats(static_cast<std::size_t>(X) * Y * d);
  Rng rng(11);
  for (double& f : feats) f = rng.normal();
  const LinearSoftmaxPolicy p(std::vector<double>(d, 0.0), FeatureTable(X, Y, d, feats));
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y) CHECK(p.log_prob(x, y) == doctest::Approx(std::log(1.0 / Y)));
}

TEST_CASE("log_prob: per-context normalization for random policies") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const TabularPolicy p(random_logits(rng, 3, 5, 4.0));
    for (int x = 0; x < 3; ++x) {
      double total = 0.0;
      for (int y = 0; y < 5; ++y) total += p.prob(x, y);
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("log_prob: out-of-range index throws") {
  const TabularPolicy p = TabularPolicy::uniform(2, 3);
  CHECK_THROWS_AS((void)p.log_prob(2, 0), std::out_of_range);
  CHECK_THROWS_AS((void)p.log_prob(0, 3), std::out_of_range);
  CHECK_THROWS_AS((void)p.log_prob(-1, 0), std::out_of_range);
}

TEST_CASE("margin: identical responses give zero") {
  const TabularPolicy p = policy_from_probs({0.5, 0.3, 0.2});
  CHECK(margin(PolicyView(p), BasePolicy::uniform(), 0, 1, 1) == 0.0);
}

TEST_CASE("margin: log probability ratio under the uniform base") {
  const TabularPolicy p = policy_from_probs({0.5, 0.3, 0.2});
  CHECK(margin(PolicyView(p), BasePolicy::uniform(), 0, 0, 1) ==
        doctest::Approx(std::log(0.5 / 0.3)));
}

TEST_CASE("margin: base equal to the policy zeroes all margins") {
  Rng rng(3);
  const TabularPolicy p(random_logits(rng, 2, 4, 1.0));
  const BasePolicy base = BasePolicy::reference(p);
  for (int y = 0; y < 4; ++y)
    for (int yp = 0; yp < 4; ++yp)
      CHECK(std::abs(margin(PolicyView(p), base, 1, y, yp)) < 1e-12);
}

TEST_CASE("margin: antisymmetry is exact") {
  Rng rng(5);
  const TabularPolicy p(random_logits(rng, 2, 5, 2.0));
  const TabularPolicy ref(random_logits(rng, 2, 5, 1.0));
  const BasePolicy base = BasePolicy::reference(ref);
  for (int y = 0; y < 5; ++y)
    for (int yp = 0; yp < 5; ++yp)
      CHECK(margin(PolicyView(p), base, 0, y, yp) == -margin(PolicyView(p), base, 0, yp, y));
}

TEST_CASE("margin: per-context base rescaling leaves margins unchanged") {
  Rng rng(7);
  const TabularPolicy p(random_logits(rng, 2, 4, 1.5));
  const TabularPolicy ref(random_logits(rng, 2, 4, 0.5));
  Matrix scores(2, 4);
  for (double& s : scores.data()) s = 0.2 + rng.u01();
  Matrix scaled = scores;
  for (int y = 0; y < 4; ++y) {
    scaled(0, y) *= 13.7;
    scaled(1, y) *= 0.003;
  }
  const BasePolicy a = BasePolicy::score_weighted(ref, scores);
  const BasePolicy b = BasePolicy::score_weighted(ref, scaled);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 4; ++y)
      for (int yp = 0; yp < 4; ++yp)
        CHECK(margin(PolicyView(p), a, x, y, yp) ==
              doctest::Approx(margin(PolicyView(p), b, x, y, yp)).epsilon(1e-12));
}

TEST_CASE("margin: non-positive base scores are rejected at construction") {
  const TabularPolicy ref = TabularPolicy::uniform(1, 3);
  Matrix scores(1, 3, 1.0);
  scores(0, 1) = 0.0;
  CHECK_THROWS_AS(BasePolicy::score_weighted(ref, scores), std::invalid_argument);
  scores(0, 1) = -2.0;
  CHECK_THROWS_AS(BasePolicy::score_weighted(ref, scores), std::invalid_argument);
}

TEST_CASE("length-penalized base adds (alpha/beta)|y| to the reference") {
  const TabularPolicy ref = TabularPolicy::uniform(1, 3);
  const BasePolicy base = BasePolicy::length_penalized(ref, 0.3, 0.1, {2, 5, 9});
  CHECK(base.log_weight(0, 1) ==
        doctest::Approx(ref.log_prob(0, 1) + 3.0 * 5));
  const TabularPolicy p = policy_from_probs({0.2, 0.5, 0.3});
  CHECK(margin(PolicyView(p), base, 0, 0, 1) ==
        doctest::Approx(std::log(0.2 / 0.5) - 3.0 * (2 - 5)));
}

TEST_CASE("centered_reward: constant rewards center to zero") {
  const TabularPolicy p = TabularPolicy::uniform(1, 3);
  const std::vector<double> d_y = {0.2, 0.5, 0.3};
  for (int y = 0; y < 3; ++y)
    CHECK(std::abs(centered_reward(PolicyView(p), d_y, 0, y)) < 1e-12);
}

TEST_CASE("centered_reward: already centered values are unchanged") {
  const TabularPolicy p(Matrix::from_rows({{1.0, 0.0, -1.0}}));
  const std::vector<double> d_y = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  // log-probs are (1,0,-1) - lse; the mean under uniform d_y removes the lse
  CHECK(centered_reward(PolicyView(p), d_y, 0, 0) == doctest::Approx(1.0));
  CHECK(centered_reward(PolicyView(p), d_y, 0, 1) == doctest::Approx(0.0));
  CHECK(centered_reward(PolicyView(p), d_y, 0, 2) == doctest::Approx(-1.0));
}

TEST_CASE("centered_reward: subtracts the d_y-weighted mean") {
  const TabularPolicy p(Matrix::from_rows({{2.0, 0.0, 0.0}}));
  const std::vector<double> d_y = {0.5, 0.25, 0.25};
  CHECK(centered_reward(PolicyView(p), d_y, 0, 0) == doctest::Approx(1.0));
  CHECK(centered_reward(PolicyView(p), d_y, 0, 1) == doctest::Approx(-1.0));
  CHECK(centered_reward(PolicyView(p), d_y, 0, 2) == doctest::Approx(-1.0));
}

TEST_CASE("centered_reward: zero mean under d_y and distribution validation") {
  Rng rng(13);
  const TabularPolicy p(random_logits(rng, 1, 4, 2.0));
  const std::vector<double> d_y = {0.1, 0.2, 0.3, 0.4};
  double mean = 0.0;
  for (int y = 0; y < 4; ++y) mean += d_y[static_cast<std::size_t>(y)] *
                                      centered_reward(PolicyView(p), d_y, 0, y);
  CHECK(std::abs(mean) < 1e-9);
  const std::vector<double> bad = {0.5, 0.2, 0.3, 0.4};
  CHECK_THROWS_AS((void)centered_reward(PolicyView(p), bad, 0, 0), std::invalid_argument);
}

TEST_CASE("centered_reward: centering is idempotent") {
  Rng rng(17);
  const TabularPolicy p(random_logits(rng, 1, 5, 3.0));
  std::vector<double> d_y = {0.1, 0.15, 0.2, 0.25, 0.3};
  const auto once = centered_rewards_row(PolicyView(p), d_y, 0);
  double mean = 0.0;
  for (int y = 0; y < 5; ++y) mean += d_y[static_cast<std::size_t>(y)] * once[static_cast<std::size_t>(y)];
  for (int y = 0; y < 5; ++y)
    CHECK(std::abs((once[static_cast<std::size_t>(y)] - mean) - once[static_cast<std::size_t>(y)]) < 1e-12);
}

TEST_CASE("centered_partition: all-zero centered rewards give |Y|") {
  const TabularPolicy p = TabularPolicy::uniform(1, 3);
  const std::vector<double> d_y = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(centered_partition(PolicyView(p), d_y, 0) == doctest::Approx(3.0));
}

TEST_CASE("centered_partition: direct sum for (1, 0, -1)") {
  const TabularPolicy p(Matrix::from_rows({{1.0, 0.0, -1.0}}));
  const std::vector<double> d_y = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(centered_partition(PolicyView(p), d_y, 0) ==
        doctest::Approx(std::exp(1.0) + 1.0 + std::exp(-1.0)));
}

TEST_CASE("centered_partition: per-context reward offsets cancel") {
  Rng rng(23);
  Matrix logits = random_logits(rng, 2, 4, 1.0);
  Matrix shifted = logits;
  for (int y = 0; y < 4; ++y) {
    shifted(0, y) += 5.5;
    shifted(1, y) -= 2.25;
  }
  const TabularPolicy a(logits), b(shifted);
  const std::vector<double> d_y = {0.4, 0.3, 0.2, 0.1};
  for (int x = 0; x < 2; ++x)
    CHECK(centered_partition(PolicyView(a), d_y, x) ==
          doctest::Approx(centered_partition(PolicyView(b), d_y, x)).epsilon(1e-12));
}

TEST_CASE("shift invariance: per-context logit offsets change nothing observable") {
  Rng rng(29);
  Matrix logits = random_logits(rng, 2, 4, 1.0);
  Matrix shifted = logits;
  for (int y = 0; y < 4; ++y) shifted(0, y) += 3.0;
  const TabularPolicy a(logits), b(shifted);
  const BasePolicy base = BasePolicy::uniform();
  for (int y = 0; y < 4; ++y) {
    CHECK(a.log_prob(0, y) == doctest::Approx(b.log_prob(0, y)).epsilon(1e-12));
    for (int yp = 0; yp < 4; ++yp)
      CHECK(margin(PolicyView(a), base, 0, y, yp) ==
            doctest::Approx(margin(PolicyView(b), base, 0, y, yp)).epsilon(1e-12));
  }
}

TEST_CASE("margin_range: policy equal to base and uniform cases are zero") {
  Rng rng(31);
  const TabularPolicy p(random_logits(rng, 2, 3, 1.0));
  CHECK(margin_range(PolicyView(p), BasePolicy::reference(p)).max_abs_margin <
        1e-12);
  const TabularPolicy u = TabularPolicy::uniform(2, 3);
  CHECK(margin_range(PolicyView(u), BasePolicy::uniform()).max_abs_margin < 1e-12);
}

TEST_CASE("margin_range: max pairwise log ratio and the configured-range flag") {
  const TabularPolicy p = policy_from_probs({0.5, 0.3, 0.2});
  const auto r = margin_range(PolicyView(p), BasePolicy::uniform());
  CHECK(r.max_abs_margin == doctest::Approx(std::log(0.5 / 0.2)));
  CHECK_FALSE(margin_range(PolicyView(p), BasePolicy::uniform(), 1.0).exceeds_configured);
  CHECK(margin_range(PolicyView(p), BasePolicy::uniform(), 0.5).exceeds_configured);
}

TEST_CASE("sample validation enforces ranges and labels") {
  CHECK_NOTHROW(validate_sample({0, 1, 2, -1}, 1, 3));
  CHECK_THROWS_AS(validate_sample({1, 0, 0, 1}, 1, 3), std::out_of_range);
  CHECK_THROWS_AS(validate_sample({0, 3, 0, 1}, 1, 3), std::out_of_range);
  CHECK_THROWS_AS(validate_sample({0, 0, 0, 0}, 1, 3), std::invalid_argument);
}

TEST_CASE("non-finite logits are rejected") {
  Matrix logits(1, 2, 0.0);
  logits(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(TabularPolicy{logits}, std::invalid_argument);
}
