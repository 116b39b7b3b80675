#pragma once

#include <optional>
#include <string>

#include "prefopt/config.hpp"
#include "prefopt/core.hpp"
#include "prefopt/datagen.hpp"
#include "prefopt/json_io.hpp"
#include "prefopt/loss_zoo.hpp"
#include "prefopt/optimizer.hpp"

namespace prefopt {

// Config sections materialized into model objects.

struct BuiltInstance {
  GenerativeModel model;
  InstanceSpace space;  // carries the response lengths for length-penalized bases
  std::optional<FeatureTable> features;
  TabularPolicy reference;  // pi_ref; also the default train init
};

BuiltInstance build_instance(const ExperimentConfig& config);

struct BuiltMethod {
  LossSpec loss;
  BasePolicy base;
  Regularizer regularizer;
  std::string loss_label;
  std::string base_label;
};

// data may be null when no regularizer anchor depends on it; the CPO-style
// "preferred" anchor is the Laplace-smoothed winner frequency per context and
// requires the dataset.
BuiltMethod build_method(const ExperimentConfig& config, const BuiltInstance& instance,
                         const PreferenceDataset* data);

TabularPolicy initial_policy(const ExperimentConfig& config, const BuiltInstance& instance);

TrainConfig train_config(const ExperimentConfig& config, const BuiltMethod& method,
                         std::size_t dataset_size);

// Instance documents (schema prefopt.instance.v1).
Json instance_to_json(const BuiltInstance& instance, const Json& provenance = Json::object());
BuiltInstance instance_from_json(const Json& doc);

}  // namespace prefopt
