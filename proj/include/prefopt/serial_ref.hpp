#pragma once

#include "prefopt/core.hpp"
#include "prefopt/datagen.hpp"
#include "prefopt/loss_zoo.hpp"

namespace prefopt::ref {

// Serial reference implementations of the OpenMP kernels: plain loops,
// accumulation in index order, no chunking. Kept for testing the parallel
// paths and for the kernel benchmark.

double objective(const PolicyView& policy, const PreferenceDataset& data, const LossSpec& loss,
                 const BasePolicy& base);

Matrix gradient_tabular(const TabularPolicy& policy, const PreferenceDataset& data,
                        const LossSpec& loss, const BasePolicy& base);

double population_loss(const PolicyView& policy, const GenerativeModel& model,
                       const LossSpec& loss, const BasePolicy& base);

}  // namespace prefopt::ref
