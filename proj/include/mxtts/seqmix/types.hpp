#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mxtts/tensor.hpp"

namespace mxtts::seqmix {

enum class MixerKind { kSelfAttention, kMamba2, kHydra, kFNet };

inline constexpr MixerKind kAllMixers[] = {MixerKind::kSelfAttention, MixerKind::kMamba2, MixerKind::kHydra,
                                           MixerKind::kFNet};

// CLI spelling: attention | mamba2 | hydra | fnet
std::string to_string(MixerKind k);
MixerKind parse_mixer(const std::string& s);

// Selective state-space parameters for one sequence. Step t uses
//   h_t = alpha[t] · h_{t-1} + B_bar[t] · x_t,   y_t = C[t] · h_t
// with B_bar[t] of shape (state_dim × in_dim) and C[t] of shape
// (out_dim × state_dim).
template <typename T>
struct SsdParams {
  std::vector<T> alpha;
  std::vector<Matrix<T>> B_bar;
  std::vector<Matrix<T>> C;

  std::size_t length() const noexcept { return alpha.size(); }
  std::size_t state_dim() const noexcept { return B_bar.empty() ? 0 : B_bar[0].rows(); }
  std::size_t in_dim() const noexcept { return B_bar.empty() ? 0 : B_bar[0].cols(); }
  std::size_t out_dim() const noexcept { return C.empty() ? 0 : C[0].rows(); }

  void validate() const {
    if (B_bar.size() != alpha.size() || C.size() != alpha.size())
      throw ShapeError("SsdParams: alpha, B_bar and C lengths differ");
    for (std::size_t t = 0; t < alpha.size(); ++t) {
      if (!std::isfinite(alpha[t]) || alpha[t] < T(0)) throw ShapeError("SsdParams: alpha must be finite and >= 0");
      if (B_bar[t].rows() != state_dim() || B_bar[t].cols() != in_dim())
        throw ShapeError("SsdParams: B_bar shape varies over time");
      if (C[t].rows() != out_dim() || C[t].cols() != state_dim())
        throw ShapeError("SsdParams: C shape does not match state_dim");
    }
  }

  static SsdParams zeros(std::size_t length, std::size_t state_dim, std::size_t in_dim, std::size_t out_dim) {
    SsdParams p;
    p.alpha.assign(length, T(0));
    p.B_bar.assign(length, Matrix<T>(state_dim, in_dim));
    p.C.assign(length, Matrix<T>(out_dim, state_dim));
    return p;
  }
};

// Bidirectional quasiseparable mixer:
//   QS(x) = shift(SS_fwd(x)) + flip(shift(SS_bwd(flip(x)))) + D ⊙ x
// backward_ss is indexed in reversed time: its step t acts on x_{L-1-t}.
template <typename T>
struct HydraParams {
  SsdParams<T> forward_ss;
  SsdParams<T> backward_ss;
  std::vector<T> D;

  std::size_t length() const noexcept { return forward_ss.length(); }

  void validate() const {
    forward_ss.validate();
    backward_ss.validate();
    if (forward_ss.length() != backward_ss.length()) throw ShapeError("HydraParams: branch lengths differ");
    const std::size_t dim = D.size();
    for (const auto* ss : {&forward_ss, &backward_ss})
      if (ss->length() > 0 && (ss->in_dim() != dim || ss->out_dim() != dim))
        throw ShapeError("HydraParams: SS branches must map dim -> dim with dim = |D|");
    for (T d : D)
      if (!std::isfinite(d)) throw ShapeError("HydraParams: non-finite D");
  }
};

// Multi-head softmax attention with x·W projections (dim × dim).
template <typename T>
struct AttentionParams {
  Matrix<T> wq, wk, wv, wo;
  std::size_t heads = 2;

  std::size_t dim() const noexcept { return wq.rows(); }
  std::size_t head_dim() const noexcept { return heads ? dim() / heads : 0; }

  void validate() const {
    const auto d = dim();
    for (const auto* w : {&wq, &wk, &wv, &wo})
      if (w->rows() != d || w->cols() != d) throw ShapeError("AttentionParams: projections must be dim x dim");
    if (heads == 0 || d % heads != 0) throw ShapeError("AttentionParams: dim must be divisible by heads");
  }
};

}  // namespace mxtts::seqmix
