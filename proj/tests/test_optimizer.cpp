#include <doctest.h>

#include <cmath>
#include <memory>

#include "prefopt/diagnostics.hpp"
#include "prefopt/optimizer.hpp"
#include "prefopt/rng.hpp"
#include "prefopt/serial_ref.hpp"

using namespace prefopt;

namespace {

Matrix random_logits(Rng& rng, int X, int Y, double scale) {
  Matrix m(X, Y);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

PreferenceDataset toy_dataset() {
  PreferenceDataset d;
  d.samples = {{0, 0, 1, 1}, {0, 1, 2, -1}, {1, 2, 0, 1}, {1, 1, 1, 1}};
  return d;
}

GenerativeModel random_btl(Rng& rng, int X, int Y, double scale) {
  Matrix r(X, Y);
  for (double& v : r.data()) v = scale * rng.normal();
  return GenerativeModel::btl(std::vector<double>(static_cast<std::size_t>(X), 1.0 / X),
                              Matrix(X, Y, 1.0 / Y), GroundTruth{std::move(r)});
}

}  // namespace

TEST_CASE("objective: zero margins give log 2 under the logistic loss") {
  const TabularPolicy p = TabularPolicy::uniform(2, 3);
  const double v = objective(PolicyView(p), toy_dataset(), logistic_loss(1.0),
                             BasePolicy::uniform());
  CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("objective: exact fit zeroes the squared loss") {
  // margin(0, 1) = 1 for the lone sample with omega = +1
  const TabularPolicy p(Matrix::from_rows({{1.0, 0.0}}));
  PreferenceDataset d;
  d.samples = {{0, 0, 1, 1}};
  CHECK(objective(PolicyView(p), d, squared_loss(1.0), BasePolicy::uniform()) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("objective: CE penalty at the anchor adds alpha times its entropy") {
  const auto anchor = std::make_shared<TabularPolicy>(TabularPolicy::uniform(2, 3));
  const auto d = toy_dataset();
  const double alpha = 0.7;
  const double without = objective(PolicyView(*anchor), d, logistic_loss(1.0),
                                   BasePolicy::uniform());
  const double with = objective(PolicyView(*anchor), d, logistic_loss(1.0),
                                BasePolicy::uniform(), Regularizer::ce_penalty(anchor, alpha));
  CHECK(with - without == doctest::Approx(alpha * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("cross_entropy: uniform self-entropy, explicit weights, Gibbs") {
  const TabularPolicy uniform3 = TabularPolicy::uniform(1, 3);
  const std::vector<double> d_x = {1.0};
  CHECK(cross_entropy(uniform3, PolicyView(uniform3), d_x) == doctest::Approx(std::log(3.0)));

  const Matrix anchor_w = Matrix::from_rows({{0.5, 0.5, 0.0}});
  CHECK(cross_entropy(anchor_w, PolicyView(uniform3), d_x) == doctest::Approx(std::log(3.0)));

  Rng rng(5);
  const TabularPolicy pi0(random_logits(rng, 1, 3, 1.0));
  const TabularPolicy pi(random_logits(rng, 1, 3, 1.0));
  const double gap =
      cross_entropy(pi0, PolicyView(pi), d_x) - cross_entropy(pi0, PolicyView(pi0), d_x);
  CHECK(gap >= -1e-12);
  CHECK(gap == doctest::Approx(kl_to_benchmark(PolicyView(pi0), PolicyView(pi), d_x))
                   .epsilon(1e-9));
}

TEST_CASE("gradient: matches the serial reference and finite differences") {
  Rng rng(17);
  const auto model = random_btl(rng, 2, 4, 0.6);
  const auto data = sample_dataset(model, 200, 3);
  const TabularPolicy p(random_logits(rng, 2, 4, 0.8));
  const LossSpec loss = logistic_loss(0.9);
  const BasePolicy base = BasePolicy::uniform();

  const Matrix g = gradient(p, data, loss, base);
  const Matrix gr = ref::gradient_tabular(p, data, loss, base);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 4; ++y)
      CHECK(g(x, y) == doctest::Approx(gr(x, y)).epsilon(1e-12));

  Matrix logits = p.logits();
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 4; ++y) {
      const double h = 1e-6;
      const double saved = logits(x, y);
      logits(x, y) = saved + h;
      const double up = objective(PolicyView(TabularPolicy(logits)), data, loss, base);
      logits(x, y) = saved - h;
      const double dn = objective(PolicyView(TabularPolicy(logits)), data, loss, base);
      logits(x, y) = saved;
      CHECK(g(x, y) == doctest::Approx((up - dn) / (2.0 * h)).epsilon(1e-5));
    }
  }
}

TEST_CASE("gradient: population gradient vanishes at the benchmark policy") {
  Rng rng(23);
  const auto model = random_btl(rng, 2, 3, 0.5);
  const LossSpec loss = logistic_loss(1.0);
  const BasePolicy base = BasePolicy::uniform();
  const auto star = benchmark_policy(model, loss, base).pi_star;
  const Matrix g = population_gradient(star, model, loss, base);
  double norm = 0.0;
  for (double v : g.data()) norm += v * v;
  CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("gradient: symmetric instance has zero gradient at the uniform policy") {
  std::vector<double> eta(1 * 3 * 3, 0.5);
  const auto model = GenerativeModel::custom({1.0}, Matrix(1, 3, 1.0 / 3), EtaTable(1, 3, eta));
  const Matrix g = population_gradient(TabularPolicy::uniform(1, 3), model, logistic_loss(1.0),
                                       BasePolicy::uniform());
  for (double v : g.data()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("objective/gradient agree with the serial reference on large batches") {
  Rng rng(29);
  const auto model = random_btl(rng, 3, 5, 0.4);
  const auto data = sample_dataset(model, 5000, 11);
  const TabularPolicy p(random_logits(rng, 3, 5, 0.7));
  const LossSpec loss = squared_loss(0.8);
  const TabularPolicy refpol(random_logits(rng, 3, 5, 0.3));
  const BasePolicy base = BasePolicy::reference(refpol);

  const double par_obj = objective(PolicyView(p), data, loss, base);
  const double ser_obj = ref::objective(PolicyView(p), data, loss, base);
  CHECK(par_obj == doctest::Approx(ser_obj).epsilon(1e-12));

  const double pop_par = population_loss(PolicyView(p), model, loss, base);
  const double pop_ser = ref::population_loss(PolicyView(p), model, loss, base);
  CHECK(pop_par == doctest::Approx(pop_ser).epsilon(1e-12));
}

TEST_CASE("train: zero steps returns the initial policy unchanged") {
  Rng rng(31);
  const auto model = random_btl(rng, 2, 3, 0.5);
  const auto data = sample_dataset(model, 50, 1);
  const TabularPolicy init(random_logits(rng, 2, 3, 0.5));
  TrainConfig tc;
  tc.steps = 0;
  const auto out = train(init, data, logistic_loss(1.0), BasePolicy::uniform(), tc);
  for (std::size_t i = 0; i < init.logits().data().size(); ++i)
    CHECK(out.policy.logits().data()[i] == init.logits().data()[i]);
  REQUIRE(out.trace.rows.size() == 1);
  CHECK(out.trace.rows[0].step == 0);
}

TEST_CASE("train: an L2 ball of radius zero pins the parameters") {
  Rng rng(37);
  const auto model = random_btl(rng, 2, 3, 0.8);
  const auto data = sample_dataset(model, 200, 2);
  const TabularPolicy init(random_logits(rng, 2, 3, 0.5));
  TrainConfig tc;
  tc.steps = 25;
  tc.batch_size = 200;
  tc.learning_rate = 0.5;
  tc.regularizer = Regularizer::l2_ball(0.0);
  const auto out = train(init, data, logistic_loss(1.0), BasePolicy::uniform(), tc);
  for (std::size_t i = 0; i < init.logits().data().size(); ++i)
    CHECK(out.policy.logits().data()[i] == init.logits().data()[i]);
}

TEST_CASE("train: the projection contract holds along the trajectory") {
  Rng rng(41);
  const auto model = random_btl(rng, 2, 4, 1.0);
  const auto data = sample_dataset(model, 400, 4);
  TrainConfig tc;
  tc.steps = 60;
  tc.batch_size = 400;
  tc.learning_rate = 1.0;
  tc.trace_every = 1;
  const double radius = 0.35;
  tc.regularizer = Regularizer::l2_ball(radius);
  const auto out = train(TabularPolicy::uniform(2, 4), data, logistic_loss(1.0),
                         BasePolicy::uniform(), tc);
  for (const auto& row : out.trace.rows) CHECK(row.param_dist <= radius + 1e-9);
  CHECK(out.trace.rows.back().param_dist == doctest::Approx(radius).epsilon(1e-6));
}

TEST_CASE("train: identical seeds give identical parameters") {
  Rng rng(43);
  const auto model = random_btl(rng, 2, 3, 0.7);
  const auto data = sample_dataset(model, 300, 5);
  TrainConfig tc;
  tc.steps = 40;
  tc.batch_size = 32;
  tc.learning_rate = 0.3;
  tc.seed = 907;
  const auto a = train(TabularPolicy::uniform(2, 3), data, logistic_loss(1.0),
                       BasePolicy::uniform(), tc);
  const auto b = train(TabularPolicy::uniform(2, 3), data, logistic_loss(1.0),
                       BasePolicy::uniform(), tc);
  for (std::size_t i = 0; i < a.policy.logits().data().size(); ++i)
    CHECK(a.policy.logits().data()[i] == b.policy.logits().data()[i]);
}

TEST_CASE("train: full-batch descent is monotone for a small constant rate") {
  Rng rng(47);
  const auto model = random_btl(rng, 2, 3, 0.8);
  const auto data = sample_dataset(model, 500, 6);
  TrainConfig tc;
  tc.steps = 80;
  tc.batch_size = 500;
  tc.learning_rate = 0.4;
  tc.trace_every = 1;
  const auto out = train(TabularPolicy::uniform(2, 3), data, logistic_loss(1.0),
                         BasePolicy::uniform(), tc);
  for (std::size_t i = 1; i < out.trace.rows.size(); ++i)
    CHECK(out.trace.rows[i].loss <= out.trace.rows[i - 1].loss + 1e-12);
}

TEST_CASE("train: warmup schedule factors") {
  Schedule s;
  s.kind = Schedule::Kind::LinearWarmup;
  s.warmup_steps = 10;
  CHECK(s.factor(0) == doctest::Approx(0.1));
  CHECK(s.factor(4) == doctest::Approx(0.5));
  CHECK(s.factor(9) == doctest::Approx(1.0));
  CHECK(s.factor(500) == doctest::Approx(1.0));
}

TEST_CASE("train: ample data on a realizable instance reaches small excess loss") {
  Rng rng(53);
  const auto model = random_btl(rng, 2, 3, 0.5);
  const LossSpec loss = logistic_loss(1.0);
  const BasePolicy base = BasePolicy::uniform();
  const auto star = benchmark_policy(model, loss, base).pi_star;
  const auto data = sample_dataset(model, 40'000, 8);
  TrainConfig tc;
  tc.steps = 500;
  tc.batch_size = 40'000;
  tc.learning_rate = 2.0;
  tc.trace_every = 250;
  const auto out = train(TabularPolicy::uniform(2, 3), data, loss, base, tc);
  const double eps =
      excess_loss(PolicyView(out.policy), PolicyView(star), model, loss, base);
  CHECK(eps >= -1e-9);
  CHECK(eps < 1e-3);
}

TEST_CASE("train: divergence is detected and the trace flagged") {
  Rng rng(59);
  const auto model = random_btl(rng, 1, 3, 0.5);
  const auto data = sample_dataset(model, 100, 3);
  TrainConfig tc;
  tc.steps = 60;
  tc.batch_size = 100;
  tc.learning_rate = 1e8;  // squared-loss gradients grow with the parameters
  tc.trace_every = 1;
  const auto out = train(TabularPolicy::uniform(1, 3), data, squared_loss(1.0),
                         BasePolicy::uniform(), tc);
  CHECK(out.trace.diverged);
  for (double v : out.policy.logits().data()) CHECK(std::isfinite(v));
}

TEST_CASE("train: CE constraint is enforced by multiplier doubling") {
  Rng rng(61);
  const auto model = random_btl(rng, 1, 3, 1.2);
  const auto data = sample_dataset(model, 2000, 12);
  const auto anchor = std::make_shared<TabularPolicy>(TabularPolicy::uniform(1, 3));

  // unconstrained run drifts far from the anchor
  TrainConfig tc;
  tc.steps = 150;
  tc.batch_size = 2000;
  tc.learning_rate = 1.0;
  tc.trace_every = 150;
  const auto free = train(TabularPolicy::uniform(1, 3), data, logistic_loss(1.0),
                          BasePolicy::uniform(), tc);
  const auto d_x = empirical_d_x(data, 1);
  const double free_ce = cross_entropy(*anchor, PolicyView(free.policy), d_x);

  const double lambda = 0.5 * (free_ce + std::log(3.0));  // between entropy and the free CE
  tc.regularizer = Regularizer::ce_constraint(anchor, lambda);
  const auto constrained = train(TabularPolicy::uniform(1, 3), data, logistic_loss(1.0),
                                 BasePolicy::uniform(), tc);
  CHECK(constrained.trace.constraint_satisfied);
  const double got_ce = cross_entropy(*anchor, PolicyView(constrained.policy), d_x);
  CHECK(got_ce <= lambda + 1e-9);
  CHECK(constrained.trace.final_penalty_alpha >= 1.0);
}

TEST_CASE("train: trace rows have strictly increasing steps and full columns") {
  Rng rng(67);
  const auto model = random_btl(rng, 2, 3, 0.5);
  const auto data = sample_dataset(model, 100, 2);
  TrainConfig tc;
  tc.steps = 10;
  tc.batch_size = 100;
  tc.learning_rate = 0.2;
  tc.trace_every = 3;
  const auto out = train(TabularPolicy::uniform(2, 3), data, logistic_loss(1.0),
                         BasePolicy::uniform(), tc);
  REQUIRE(out.trace.rows.size() >= 3);
  for (std::size_t i = 1; i < out.trace.rows.size(); ++i)
    CHECK(out.trace.rows[i].step > out.trace.rows[i - 1].step);
  CHECK(out.trace.rows.back().step == 10);
  for (const auto& row : out.trace.rows) {
    CHECK(std::isfinite(row.loss));
    CHECK(std::isfinite(row.logp_preferred));
    CHECK(std::isfinite(row.logp_dispreferred));
    CHECK(row.max_abs_margin >= row.mean_abs_margin);
    CHECK(row.param_dist >= 0.0);
  }
}

TEST_CASE("train: linear policies descend and match tabular margins semantics") {
  Rng rng(71);
  const int X = 2, Y = 3, dim = 4;
  const auto model = random_btl(rng, X, Y, 0.5);
  const auto data = sample_dataset(model, 2000, 13);
  std::vector<double> feats(static_cast<std::size_t>(X) * Y * dim);
  for (double& f : feats) f = rng.normal();
  const LinearSoftmaxPolicy init(std::vector<double>(dim, 0.0),
                                 FeatureTable(X, Y, dim, feats));
  TrainConfig tc;
  tc.steps = 120;
  tc.batch_size = 2000;
  tc.learning_rate = 0.5;
  tc.trace_every = 30;
  const auto out = train(init, data, logistic_loss(1.0), BasePolicy::uniform(), tc);
  CHECK_FALSE(out.trace.diverged);
  CHECK(out.trace.rows.back().loss < out.trace.rows.front().loss);
  // the induced tabular view reproduces the linear policy's distribution
  const auto tab = out.policy.as_tabular();
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y)
      CHECK(tab.log_prob(x, y) == doctest::Approx(out.policy.log_prob(x, y)).epsilon(1e-12));
}

TEST_CASE("train config validation") {
  Rng rng(73);
  const auto model = random_btl(rng, 1, 3, 0.5);
  const auto data = sample_dataset(model, 10, 1);
  TrainConfig tc;
  tc.steps = 5;
  tc.batch_size = 11;  // exceeds n
  tc.learning_rate = 0.1;
  CHECK_THROWS_AS(train(TabularPolicy::uniform(1, 3), data, logistic_loss(1.0),
                        BasePolicy::uniform(), tc),
                  std::invalid_argument);
  tc.batch_size = 10;
  tc.learning_rate = 0.0;
  CHECK_THROWS_AS(train(TabularPolicy::uniform(1, 3), data, logistic_loss(1.0),
                        BasePolicy::uniform(), tc),
                  std::invalid_argument);
}
