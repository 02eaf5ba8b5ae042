#pragma once

namespace mfscale {

// Average work units per sample for each fidelity.
struct CostModel {
  double avg_cost_low = 0.0;
  double avg_cost_high = 0.0;

  double ratio() const { return avg_cost_high / avg_cost_low; }
};

}  // namespace mfscale
