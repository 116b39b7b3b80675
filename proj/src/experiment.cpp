#include "prefopt/experiment.hpp"

#include <algorithm>
#include <cmath>

#include "prefopt/errors.hpp"
#include "prefopt/rng.hpp"

namespace prefopt {

namespace {

Matrix build_r_star(const InstanceConfig& c) {
  Matrix r(c.num_contexts, c.num_responses, 0.0);
  if (c.r_star_kind == "explicit") {
    r = Matrix(c.num_contexts, c.num_responses, c.r_star_values);
  } else if (c.r_star_kind == "random") {
    Rng rng(c.r_star_seed);
    for (double& v : r.data()) v = c.r_star_scale * rng.normal();
  }
  return r;
}

std::vector<double> build_d_x(const InstanceConfig& c) {
  if (c.d_x_kind == "explicit") return c.d_x_values;
  return std::vector<double>(static_cast<std::size_t>(c.num_contexts),
                             1.0 / c.num_contexts);
}

Matrix build_d_y(const InstanceConfig& c) {
  if (c.d_y_kind == "explicit") return Matrix(c.num_contexts, c.num_responses, c.d_y_values);
  Matrix d(c.num_contexts, c.num_responses, 1.0 / c.num_responses);
  if (c.d_y_kind == "restricted_uniform") {
    for (int x = 0; x < c.num_contexts; ++x) {
      int kept = c.num_responses;
      for (int y : c.d_y_exclude[static_cast<std::size_t>(x)]) {
        d(x, y) = 0.0;
        --kept;
      }
      for (int y = 0; y < c.num_responses; ++y)
        if (d(x, y) > 0.0) d(x, y) = 1.0 / kept;
    }
  }
  return d;
}

TabularPolicy build_reference(const MethodConfig& m, int X, int Y) {
  if (m.reference_kind == "explicit") {
    if (static_cast<int>(m.reference_logits.size()) != X * Y)
      throw schema_error("config.method.reference.logits: size mismatch");
    return TabularPolicy(Matrix(X, Y, m.reference_logits));
  }
  if (m.reference_kind == "random") {
    Rng rng(m.reference_seed);
    Matrix logits(X, Y);
    for (double& v : logits.data()) v = m.reference_scale * rng.normal();
    return TabularPolicy(std::move(logits));
  }
  return TabularPolicy::uniform(X, Y);
}

}  // namespace

BuiltInstance build_instance(const ExperimentConfig& config) {
  const auto& c = config.instance;
  const int X = c.num_contexts, Y = c.num_responses;

  auto d_x = build_d_x(c);
  auto d_y = build_d_y(c);
  GroundTruth gt{build_r_star(c)};

  auto model = [&]() {
    if (c.preference == "btl") return GenerativeModel::btl(d_x, d_y, gt);
    if (c.preference == "linear") return GenerativeModel::linear(d_x, d_y, gt);
    return GenerativeModel::custom(d_x, d_y, EtaTable(X, Y, c.eta_values));
  }();

  std::vector<int> lengths = c.response_lengths;
  if (lengths.empty()) lengths.assign(static_cast<std::size_t>(Y), 1);

  std::optional<FeatureTable> features;
  if (c.features_kind == "explicit") {
    features = FeatureTable(X, Y, c.feature_dim, c.features_values);
  } else if (c.features_kind == "random") {
    Rng rng(c.features_seed);
    std::vector<double> v(static_cast<std::size_t>(X) * Y * c.feature_dim);
    for (double& f : v) f = c.features_scale * rng.normal();
    features = FeatureTable(X, Y, c.feature_dim, std::move(v));
  }

  return {std::move(model), InstanceSpace{X, std::move(lengths)}, std::move(features),
          build_reference(config.method, X, Y)};
}

namespace {

LossSpec build_loss(const MethodConfig& m) {
  if (m.loss_kind == "logistic") return logistic_loss(m.beta);
  if (m.loss_kind == "squared") return squared_loss(m.beta);
  if (m.loss_kind == "ipo") return ipo_loss(m.tau != 0.0 ? m.tau : 1.0);
  if (m.loss_kind == "hinge") return hinge_loss(m.tau != 0.0 ? m.tau : 1.0);
  if (m.loss_kind == "shifted_logistic") return shifted_logistic_loss(m.beta, m.gamma);
  throw schema_error("unknown loss kind: " + m.loss_kind);
}

BasePolicy build_base(BaseKind kind, const MethodConfig& m, const BuiltInstance& instance) {
  const int X = instance.model.num_contexts(), Y = instance.model.num_responses();
  switch (kind) {
    case BaseKind::Uniform:
      return BasePolicy::uniform();
    case BaseKind::Reference:
      return BasePolicy::reference(instance.reference);
    case BaseKind::LengthPenalized:
      return BasePolicy::length_penalized(instance.reference, m.base_alpha, m.beta,
                                          instance.space.response_lengths);
    case BaseKind::ScoreWeighted: {
      Matrix scores(X, Y, 1.0);
      if (!m.base_scores.empty()) {
        if (static_cast<int>(m.base_scores.size()) != X * Y)
          throw schema_error("config.method.base.scores: size mismatch");
        scores = Matrix(X, Y, m.base_scores);
      }
      return BasePolicy::score_weighted(instance.reference, std::move(scores));
    }
  }
  throw schema_error("unknown base kind");
}

BaseKind base_kind_from_string(const std::string& s) {
  if (s == "uniform") return BaseKind::Uniform;
  if (s == "reference") return BaseKind::Reference;
  if (s == "length_penalized") return BaseKind::LengthPenalized;
  if (s == "score_weighted") return BaseKind::ScoreWeighted;
  throw schema_error("unknown base kind: " + s);
}

// Laplace-smoothed winner-frequency policy (CPO's pi_w).
TabularPolicy preferred_anchor(const PreferenceDataset& data, int X, int Y) {
  Matrix counts(X, Y, 0.5);
  for (const auto& s : data.samples) counts(s.x, s.omega == 1 ? s.y : s.y_prime) += 1.0;
  Matrix logits(X, Y);
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y) logits(x, y) = std::log(counts(x, y));
  return TabularPolicy(std::move(logits));
}

std::shared_ptr<const TabularPolicy> resolve_anchor(const std::string& which,
                                                    const BuiltInstance& instance,
                                                    const PreferenceDataset* data) {
  const int X = instance.model.num_contexts(), Y = instance.model.num_responses();
  if (which == "reference") return std::make_shared<TabularPolicy>(instance.reference);
  if (which == "uniform") return std::make_shared<TabularPolicy>(TabularPolicy::uniform(X, Y));
  if (which == "preferred") {
    if (!data) throw schema_error("regularizer anchor 'preferred' requires a dataset");
    return std::make_shared<TabularPolicy>(preferred_anchor(*data, X, Y));
  }
  throw schema_error("unknown regularizer anchor: " + which);
}

}  // namespace

BuiltMethod build_method(const ExperimentConfig& config, const BuiltInstance& instance,
                         const PreferenceDataset* data) {
  const auto& m = config.method;
  BuiltMethod out;

  if (!m.preset.empty()) {
    LossParams params{m.beta, m.tau, m.gamma};
    const MethodPreset p = preset(method_from_string(m.preset), params);
    out.loss = p.loss;
    out.base = build_base(p.base_kind, m, instance);
    switch (p.regularizer) {
      case PresetRegularizer::None:
        out.regularizer = Regularizer::none();
        break;
      case PresetRegularizer::CeToReference:
        out.regularizer = Regularizer::ce_penalty(
            resolve_anchor("reference", instance, data),
            m.reg_alpha > 0.0 ? m.reg_alpha : 0.1);
        break;
      case PresetRegularizer::CeToPreferred:
        out.regularizer = Regularizer::ce_penalty(
            resolve_anchor("preferred", instance, data),
            m.reg_alpha > 0.0 ? m.reg_alpha : 0.1);
        break;
    }
    out.loss_label = p.loss.name;
    out.base_label = to_string(p.base_kind);
    return out;
  }

  out.loss = build_loss(m);
  const BaseKind bk = base_kind_from_string(m.base_kind);
  out.base = build_base(bk, m, instance);
  out.loss_label = out.loss.name;
  out.base_label = to_string(bk);

  if (m.reg_kind == "none") {
    out.regularizer = Regularizer::none();
  } else if (m.reg_kind == "ce_penalty") {
    out.regularizer =
        Regularizer::ce_penalty(resolve_anchor(m.reg_anchor, instance, data), m.reg_alpha);
  } else if (m.reg_kind == "ce_constraint") {
    out.regularizer =
        Regularizer::ce_constraint(resolve_anchor(m.reg_anchor, instance, data), m.reg_lambda);
  } else if (m.reg_kind == "kl_penalty") {
    out.regularizer =
        Regularizer::kl_penalty(resolve_anchor(m.reg_anchor, instance, data), m.reg_coeff);
  } else if (m.reg_kind == "l2_ball") {
    out.regularizer = Regularizer::l2_ball(m.reg_radius);
  } else {
    throw schema_error("unknown regularizer kind: " + m.reg_kind);
  }
  return out;
}

TabularPolicy initial_policy(const ExperimentConfig& config, const BuiltInstance& instance) {
  if (config.train.init == "uniform")
    return TabularPolicy::uniform(instance.model.num_contexts(),
                                  instance.model.num_responses());
  return instance.reference;
}

TrainConfig train_config(const ExperimentConfig& config, const BuiltMethod& method,
                         std::size_t dataset_size) {
  TrainConfig t;
  t.steps = config.train.steps;
  t.batch_size = config.train.batch_size > 0 ? config.train.batch_size
                                             : static_cast<int>(dataset_size);
  t.learning_rate = config.train.learning_rate;
  t.schedule.kind = config.train.schedule == "linear_warmup" ? Schedule::Kind::LinearWarmup
                                                             : Schedule::Kind::Constant;
  t.schedule.warmup_steps = config.train.warmup_steps;
  t.seed = config.train.seed;
  t.regularizer = method.regularizer;
  t.trace_every = config.train.trace_every;
  return t;
}

Json instance_to_json(const BuiltInstance& instance, const Json& provenance) {
  const auto& m = instance.model;
  Json doc;
  doc["schema"] = "prefopt.instance.v1";
  doc["num_contexts"] = m.num_contexts();
  doc["num_responses"] = m.num_responses();
  doc["d_x"] = m.d_x();
  doc["d_y"] = m.d_y().data();
  doc["preference"] = to_string(m.pref_kind());
  if (m.pref_kind() == PrefKind::Custom) {
    doc["eta"] = m.eta_table().values();
  } else {
    doc["r_star"] = m.ground_truth().r_star.data();
    if (m.pref_kind() == PrefKind::Linear) doc["linear_scale"] = m.linear_scale();
  }
  doc["response_lengths"] = instance.space.response_lengths;
  if (instance.features) {
    doc["features"] = Json{{"dim", instance.features->dim()},
                           {"values", instance.features->values()}};
  }
  doc["reference_logits"] = instance.reference.logits().data();
  if (!provenance.empty()) doc["provenance"] = provenance;
  return doc;
}

BuiltInstance instance_from_json(const Json& doc) {
  require_keys(doc,
               {"schema", "num_contexts", "num_responses", "d_x", "d_y", "preference", "eta",
                "r_star", "linear_scale", "response_lengths", "features", "reference_logits",
                "provenance"},
               "instance");
  if (!doc.contains("schema") || doc["schema"] != "prefopt.instance.v1")
    throw schema_error("instance: missing or unsupported schema tag");
  try {
    const int X = doc.at("num_contexts").get<int>();
    const int Y = doc.at("num_responses").get<int>();
    auto d_x = doc.at("d_x").get<std::vector<double>>();
    Matrix d_y(X, Y, doc.at("d_y").get<std::vector<double>>());
    const std::string pref = doc.at("preference").get<std::string>();

    auto model = [&]() {
      if (pref == "custom")
        return GenerativeModel::custom(d_x, d_y,
                                       EtaTable(X, Y, doc.at("eta").get<std::vector<double>>()));
      GroundTruth gt{Matrix(X, Y, doc.at("r_star").get<std::vector<double>>())};
      if (pref == "btl") return GenerativeModel::btl(d_x, d_y, std::move(gt));
      if (pref == "linear") return GenerativeModel::linear(d_x, d_y, std::move(gt));
      throw schema_error("instance: unknown preference kind '" + pref + "'");
    }();

    std::vector<int> lengths = doc.value("response_lengths", std::vector<int>{});
    if (lengths.empty()) lengths.assign(static_cast<std::size_t>(Y), 1);

    std::optional<FeatureTable> features;
    if (doc.contains("features")) {
      const auto& f = doc.at("features");
      features = FeatureTable(X, Y, f.at("dim").get<int>(),
                              f.at("values").get<std::vector<double>>());
    }

    TabularPolicy reference(Matrix(X, Y, doc.at("reference_logits").get<std::vector<double>>()));
    return {std::move(model), InstanceSpace{X, std::move(lengths)}, std::move(features),
            std::move(reference)};
  } catch (const Json::exception& e) {
    throw schema_error(std::string("instance: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw schema_error(std::string("instance: ") + e.what());
  }
}

}  // namespace prefopt
