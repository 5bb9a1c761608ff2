#pragma once

#include <random>
#include <string>

#include "mxtts/model/params.hpp"
#include "mxtts/seqmix/types.hpp"

namespace mxtts::model {

template <typename T>
using Var = ad::Var<T>;

template <typename T>
struct Linear {
  Var<T> w, b;
  Linear() = default;
  Linear(ParamStore<T>& ps, const std::string& name, std::size_t in, std::size_t out, bool bias = true);
  Var<T> operator()(const Var<T>& x) const { return ad::linear(x, w, b); }
};

// Same-length 1-D convolution over time (rows), odd kernel width.
template <typename T>
struct Conv1d {
  Var<T> w, b;
  std::size_t kernel = 1;
  Conv1d() = default;
  Conv1d(ParamStore<T>& ps, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel);
  Var<T> operator()(const Var<T>& x) const;
};

template <typename T>
struct LayerNorm {
  Var<T> gamma, beta;
  LayerNorm() = default;
  LayerNorm(ParamStore<T>& ps, const std::string& name, std::size_t dim);
  Var<T> operator()(const Var<T>& x) const { return ad::layer_norm(x, gamma, beta); }
};

// Token mixing along time, one of the four kinds. Widths are preserved.
//
// Mamba2: in_proj → (x, z, B, C, a); alpha = sigmoid(a) per head; the scan
// runs per head of width ssm_head_dim with B, C shared; y = (scan + D⊙x) ⊙
// silu(z) → out_proj.
// Hydra: as Mamba2 with a second (B, C, a) set for the reversed branch and
// y = shift(SS_f(x)) + flip(shift(SS_b(flip x))) + D⊙x.
// Attention: bias-free q/k/v/o projections, non-causal. FNet: none.
template <typename T>
class MixerLayer {
 public:
  struct Shape {
    std::size_t dim, heads, state, head_dim;
  };

  MixerLayer() = default;
  MixerLayer(ParamStore<T>& ps, const std::string& name, seqmix::MixerKind kind, const Shape& shape);

  seqmix::MixerKind kind() const noexcept { return kind_; }
  Var<T> self(const Var<T>& x) const;
  // Queries a against b: cross-attention, or [a; b] through the layer keeping
  // the first a.rows() outputs.
  Var<T> cross(const Var<T>& a, const Var<T>& b) const;

 private:
  Var<T> ssm(const Var<T>& x) const;

  seqmix::MixerKind kind_ = seqmix::MixerKind::kFNet;
  Shape shape_{};
  Var<T> wq_, wk_, wv_, wo_;
  Linear<T> in_proj_, out_proj_;
  Var<T> d_;
};

// x·W1 → relu → dropout → x·W2 as kernel-k convolutions over time.
template <typename T>
struct ConvFeedForward {
  Conv1d<T> c1, c2;
  ConvFeedForward() = default;
  ConvFeedForward(ParamStore<T>& ps, const std::string& name, std::size_t dim, std::size_t filter,
                  std::size_t kernel);
  Var<T> operator()(const Var<T>& x, T dropout, std::mt19937_64* rng) const;
};

// Sinusoidal embedding of a scalar time, 1×dim (sin half then cos half).
template <typename T>
Matrix<T> time_embedding(T t, std::size_t dim);

}  // namespace mxtts::model
