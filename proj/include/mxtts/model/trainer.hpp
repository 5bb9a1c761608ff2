#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mxtts/model/acoustic.hpp"
#include "mxtts/seqmix/gradcheck.hpp"

namespace mxtts::model {

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainItem {
  std::string id;
  text::TokenSequence tokens;
  Matrix<float> frames;  // T×n_mels, normalized
};

struct OptimConfig {
  double lr = 1e-4;
  bool cosine = true;  // cosine decay to 0 over total_epochs; off keeps lr constant
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global L2 norm clip; 0 disables.
  double grad_clip = 0.0;
  std::size_t batch_size = 4;
  std::size_t total_epochs = 200;
};

// Adam with bias correction; moments are kept per parameter entry.
class Adam {
 public:
  void step(ParamStore<float>& params, double lr, const OptimConfig& cfg);
  std::uint64_t t = 0;
  std::vector<Matrix<float>> m, v;
};

struct TrainState {
  AcousticModel<float> model;
  Adam adam;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
  std::mt19937_64 rng;

  TrainState(const ModelConfig& cfg, std::uint64_t seed_);
};

struct EpochStats {
  double total = 0, cfm = 0, duration = 0, prior = 0;
  std::size_t steps = 0;
  double lr_last = 0;
};

double scheduled_lr(const OptimConfig& cfg, std::uint64_t step, std::size_t steps_per_epoch);
std::size_t batches_per_epoch(std::size_t n_items, std::size_t batch_size);

// One pass over a shuffled copy of `data`. Each batch averages the per-item
// losses and takes one Adam step. Throws NonFiniteLoss (with the item id and
// loss parts) before touching parameters when a loss is not finite, and also
// if any parameter becomes non-finite after a step.
EpochStats train_epoch(TrainState& state, const std::vector<TrainItem>& data, const OptimConfig& cfg);

// Per-bin mean/std over every frame of every item (frames T×n_mels, raw
// log-mels). std is floored at 1e-3.
MelStats compute_mel_stats(const std::vector<Matrix<float>>& frames);

// Backpropagated vs central-difference gradient of the full training loss
// (dropout off, fixed noise draw) for `n_entries` random scalar parameters.
// Differences honour the stop-gradient in front of the duration predictor:
// outside `duration.*` the duration term is held fixed.
seqmix::GradCheckReport loss_gradient_check(AcousticModel<double>& model, const text::TokenSequence& tokens,
                                            const Matrix<double>& frames, std::size_t n_entries,
                                            std::uint64_t seed, double step = 1e-5);

}  // namespace mxtts::model
