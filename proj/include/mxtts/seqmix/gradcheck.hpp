#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mxtts/autograd.hpp"

namespace mxtts::seqmix {

struct GradCheckOptions {
  double step = 1e-4;
  // Entries probed per input, chosen at random; 0 probes every entry.
  std::size_t max_entries_per_input = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "input[i] entry j: analytic a, numeric n"
};

using LayerFn = std::function<ad::Var<double>(const std::vector<ad::Var<double>>&)>;

// Compares backpropagated gradients of loss = Σ forward(inputs) ⊙ R, R a
// fixed random projection, with central differences. Error per entry is
// |a − n| / max(|a|, |n|, 1e-3 · max_j |n_j|); the floor keeps entries whose
// true gradient is ~0 from dividing noise by noise.
GradCheckReport backward_check(const LayerFn& forward, const std::vector<Matrix<double>>& inputs,
                               const GradCheckOptions& options = {});

}  // namespace mxtts::seqmix
