#include <doctest.h>

#include <cmath>

#include "prefopt/errors.hpp"
#include "prefopt/json_io.hpp"
#include "prefopt/rng.hpp"

using namespace prefopt;

TEST_CASE("policy documents round-trip for both parameterizations") {
  Rng rng(900);
  Matrix logits(3, 4);
  for (double& v : logits.data()) v = 2.0 * rng.normal();
  const TabularPolicy tab(logits);
  const auto loaded = policy_from_json(policy_to_json(tab));
  REQUIRE(loaded.tabular.has_value());
  for (std::size_t i = 0; i < logits.data().size(); ++i)
    CHECK(loaded.tabular->logits().data()[i] == logits.data()[i]);

  const int dim = 3;
  std::vector<double> feats(static_cast<std::size_t>(2) * 3 * dim);
  for (double& f : feats) f = rng.normal();
  std::vector<double> w = {0.3, -1.2, 0.8};
  const LinearSoftmaxPolicy lin(w, FeatureTable(2, 3, dim, feats));
  const auto loaded_lin = policy_from_json(policy_to_json(lin));
  REQUIRE(loaded_lin.linear.has_value());
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 3; ++y)
      CHECK(loaded_lin.linear->log_prob(x, y) == lin.log_prob(x, y));

  Json broken = policy_to_json(tab);
  broken["kind"] = "mystery";
  CHECK_THROWS_AS(policy_from_json(broken), schema_error);
  Json extra = policy_to_json(tab);
  extra["surprise"] = 1;
  CHECK_THROWS_AS(policy_from_json(extra), schema_error);
}

TEST_CASE("dataset documents round-trip through JSON and CSV") {
  PreferenceDataset data;
  data.seed = 321;
  Rng rng(5);
  for (int i = 0; i < 200; ++i)
    data.samples.push_back({rng.uniform_index(3), rng.uniform_index(4), rng.uniform_index(4),
                            rng.u01() < 0.5 ? 1 : -1});

  const auto via_json = dataset_from_json(dataset_to_json(data));
  const auto via_csv = dataset_from_csv(dataset_to_csv(data, Json::object()));
  REQUIRE(via_json.size() == data.size());
  REQUIRE(via_csv.size() == data.size());
  CHECK(via_json.seed == data.seed);
  CHECK(via_csv.seed == data.seed);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(via_json.samples[i].omega == data.samples[i].omega);
    CHECK(via_csv.samples[i].x == data.samples[i].x);
    CHECK(via_csv.samples[i].y == data.samples[i].y);
    CHECK(via_csv.samples[i].y_prime == data.samples[i].y_prime);
    CHECK(via_csv.samples[i].omega == data.samples[i].omega);
  }

  CHECK_THROWS_AS(dataset_from_csv("a,b\n1,2\n"), schema_error);
}

TEST_CASE("fmt_double survives a parse round-trip") {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const double v = std::exp(20.0 * (rng.u01() - 0.5)) * (rng.u01() < 0.5 ? -1.0 : 1.0);
    CHECK(std::stod(fmt_double(v)) == v);
  }
  CHECK(fmt_double(0.0) == "0");
}
