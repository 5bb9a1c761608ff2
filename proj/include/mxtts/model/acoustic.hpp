#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mxtts/model/config.hpp"
#include "mxtts/model/layers.hpp"
#include "mxtts/text/frontend.hpp"

namespace mxtts::model {

inline constexpr double kSigmaMin = 1e-4;
inline constexpr int kDefaultSteps = 10;

// ---- alignment and length regulation

// Log-likelihood of every frame of y (T×C) under a unit-variance Gaussian
// centred on every token mean of mu (L×C): result L×T.
template <typename T>
Matrix<double> alignment_log_likelihood(const Matrix<T>& mu, const Matrix<T>& y);

// Monotonic alignment search: the token→frame segmentation (each token at
// least one frame, in order, covering all T frames) with maximal summed
// log-likelihood. Returns per-token frame counts.
std::vector<int> monotonic_align(const Matrix<double>& log_likelihood);

// Frame → token index for a duration vector: [2,1,3] → 0,0,1,2,2,2.
std::vector<std::size_t> expand_durations(const std::vector<int>& durations);

// Inference durations ceil(exp(log_d)), at least 1 frame each.
std::vector<int> durations_from_log(const std::vector<double>& log_durations);

// Repeats token rows by their durations.
template <typename T>
Var<T> regulate_length(const Var<T>& token_states, const std::vector<int>& durations);

// ---- flow matching

template <typename T>
struct CfmPoint {
  T t = 0;
  Matrix<T> x_t;  // (1 − (1 − σ)t)·x0 + t·x1
  Matrix<T> u;    // x1 − (1 − σ)·x0
};

template <typename T>
CfmPoint<T> cfm_point(const Matrix<T>& x1, const Matrix<T>& x0, T t, T sigma_min = T(kSigmaMin));

// Draws t ~ U(0,1), then x0 ~ N(0, I) in row-major order.
template <typename T>
CfmPoint<T> draw_cfm_point(const Matrix<T>& x1, std::mt19937_64& rng, T sigma_min = T(kSigmaMin));

template <typename T>
using FieldFn = std::function<Var<T>(const Var<T>& x_t, T t)>;

// mean((v(x_t, t) − u)²) for one draw of (t, x0).
template <typename T>
Var<T> cfm_loss(const Matrix<T>& x1, const FieldFn<T>& field, std::mt19937_64& rng, T sigma_min = T(kSigmaMin));

// Explicit Euler from t = 0 to 1 on a uniform grid of n_steps.
template <typename T>
Matrix<T> euler_integrate(Matrix<T> x0, int n_steps, const std::function<Matrix<T>(const Matrix<T>&, T)>& field);

// ---- the model

// Per-bin standardization of log-mels used as the flow-matching target.
struct MelStats {
  std::vector<double> mean, std;
  static MelStats identity(std::size_t n_mels);
  template <typename T>
  Matrix<T> normalize(const Matrix<T>& frames) const;  // T×n_mels
  template <typename T>
  Matrix<T> denormalize(const Matrix<T>& frames) const;
};

template <typename T>
class AcousticModel {
 public:
  struct Encoded {
    Var<T> enc;          // L×enc_hidden
    Var<T> ctx;          // L×(enc_hidden + spk + lang)
    Var<T> mu;           // L×n_mels, token means
    Var<T> log_durations;  // L×1
    Var<T> cond_tokens;  // L×dec_in, regulated to frames by durations
    Var<T> keys;         // L×dec_hidden, cross-mixing memory of the decoder
  };

  struct LossParts {
    Var<T> total;
    double cfm = 0, duration = 0, prior = 0;
    std::vector<int> durations;
  };

  struct Synthesis {
    Matrix<T> frames;  // T×n_mels, normalized space
    std::vector<int> durations;
  };

  // shape_only builds the parameter table without allocating values.
  AcousticModel(const ModelConfig& cfg, std::uint64_t seed, bool shape_only = false);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParamStore<T>& params() noexcept { return params_; }
  const ParamStore<T>& params() const noexcept { return params_; }
  MelStats& stats() noexcept { return stats_; }
  const MelStats& stats() const noexcept { return stats_; }

  // dropout_rng null → eval mode.
  Encoded encode(const text::TokenSequence& tokens, std::mt19937_64* dropout_rng = nullptr) const;
  Var<T> encoder_out(const text::TokenSequence& tokens) const { return encode(tokens).enc; }

  // Vector field v(x_t, t | cond, keys) with x_t and the result T×n_mels.
  Var<T> field(const Var<T>& x_t, T t, const Var<T>& cond, const Var<T>& keys) const;

  // CFM + duration MSE (log domain) + prior loss on one utterance; `frames`
  // is the normalized target, T×n_mels. train enables dropout.
  LossParts loss(const text::TokenSequence& tokens, const Matrix<T>& frames, std::mt19937_64& rng,
                 bool train) const;

  Synthesis synthesize(const text::TokenSequence& tokens, std::mt19937_64& rng, int n_steps = kDefaultSteps) const;

 private:
  ModelConfig cfg_;
  ModelConfig::Dims dims_;
  ParamStore<T> params_;
  MelStats stats_;

  Var<T> tok_emb_, spk_emb_, lang_emb_;
  std::vector<Conv1d<T>> prenet_conv_;
  std::vector<LayerNorm<T>> prenet_norm_;
  Linear<T> prenet_proj_;
  struct EncBlock {
    MixerLayer<T> mixer;
    LayerNorm<T> norm1, norm2;
    ConvFeedForward<T> ffn;
  };
  std::vector<EncBlock> enc_blocks_;
  Linear<T> mu_proj_, cond_proj_, key_proj_;
  Conv1d<T> dp_conv1_, dp_conv2_;
  LayerNorm<T> dp_norm1_, dp_norm2_;
  Linear<T> dp_out_;
  Linear<T> dec_in_proj_, time_fc1_, time_fc2_, dec_out_proj_;
  struct DecBlock {
    MixerLayer<T> self_mix, cross_mix;
    LayerNorm<T> norm1, norm2, norm3;
    Linear<T> ff1, ff2;
  };
  std::vector<DecBlock> dec_blocks_;
};

// Exact number of learnable scalars, computed without allocating weights.
std::size_t count_parameters(const ModelConfig& cfg);

}  // namespace mxtts::model
