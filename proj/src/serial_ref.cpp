#include "prefopt/serial_ref.hpp"

#include <cmath>

namespace prefopt::ref {

double objective(const PolicyView& policy, const PreferenceDataset& data, const LossSpec& loss,
                 const BasePolicy& base) {
  const Matrix logmu = base.log_weight_table(policy.num_contexts(), policy.num_responses());
  const Matrix& logp = policy.log_probs();
  double total = 0.0;
  for (const auto& s : data.samples) {
    const double m = margin_from_tables(logp, logmu, s.x, s.y, s.y_prime);
    total += loss.value(s.omega * m);
  }
  return total / static_cast<double>(data.size());
}

Matrix gradient_tabular(const TabularPolicy& policy, const PreferenceDataset& data,
                        const LossSpec& loss, const BasePolicy& base) {
  const Matrix logmu = base.log_weight_table(policy.num_contexts(), policy.num_responses());
  const Matrix& logp = policy.log_probs();
  Matrix grad(policy.num_contexts(), policy.num_responses(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (const auto& s : data.samples) {
    const double m = margin_from_tables(logp, logmu, s.x, s.y, s.y_prime);
    const double g = loss.derivative(s.omega * m) * s.omega * inv_n;
    grad(s.x, s.y) += g;
    grad(s.x, s.y_prime) -= g;
  }
  return grad;
}

double population_loss(const PolicyView& policy, const GenerativeModel& model,
                       const LossSpec& loss, const BasePolicy& base) {
  const Matrix logmu = base.log_weight_table(model.num_contexts(), model.num_responses());
  const Matrix& logp = policy.log_probs();
  double total = 0.0;
  for (int x = 0; x < model.num_contexts(); ++x) {
    const double dx = model.d_x()[static_cast<std::size_t>(x)];
    if (dx == 0.0) continue;
    for (int y = 0; y < model.num_responses(); ++y) {
      for (int yp = 0; yp < model.num_responses(); ++yp) {
        const double w = dx * model.d_y()(x, y) * model.d_y()(x, yp);
        if (w == 0.0) continue;
        const double m = margin_from_tables(logp, logmu, x, y, yp);
        const double eta = model.preference_prob(x, y, yp);
        total += w * (eta * loss.value(m) + (1.0 - eta) * loss.value(-m));
      }
    }
  }
  return total;
}

}  // namespace prefopt::ref
