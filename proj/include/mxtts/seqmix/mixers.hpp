#pragma once

#include <variant>

#include "mxtts/seqmix/kernels.hpp"
#include "mxtts/seqmix/types.hpp"

namespace mxtts::seqmix {

struct FNetParams {};

template <typename T>
using MixerParams = std::variant<AttentionParams<T>, SsdParams<T>, HydraParams<T>, FNetParams>;

// Selective SSM over a whole sequence with h_0 = 0. Evaluated chunk by
// chunk: inside a chunk every output is formed directly from the decayed
// inputs of that chunk plus the carried state; only the chunk-final state
// is passed on.
template <typename T>
Matrix<T> ssd_forward(const Matrix<T>& x, const SsdParams<T>& p, std::size_t chunk = 16);

template <typename T>
Matrix<T> hydra_forward(const Matrix<T>& x, const HydraParams<T>& p);

// Re(F_seq(F_hidden(x))) with unnormalized DFTs of the exact lengths.
template <typename T>
Matrix<T> fnet_forward(const Matrix<T>& x);

// Projections applied as x·W. `cache` (optional) receives the per-head
// attention weights.
template <typename T>
Matrix<T> attention_forward(const Matrix<T>& x, const AttentionParams<T>& p, bool causal,
                            kernels::AttentionCache<T>* cache = nullptr);

// Attention: queries from a, keys and values from b. Every other mixer
// runs on [a; b] stacked in time and keeps the first a.rows() outputs, so
// SSM parameters must cover a.rows() + b.rows() steps.
template <typename T>
Matrix<T> cross_mix(const Matrix<T>& a, const Matrix<T>& b, MixerKind kind, const MixerParams<T>& params);

// Dense L×L operator of a scalar-channel (in_dim = out_dim = 1) SSM or
// Hydra layer, so that y = M·x.
template <typename T>
Matrix<T> materialize_mixing_matrix(const SsdParams<T>& p, std::size_t L);
template <typename T>
Matrix<T> materialize_mixing_matrix(const HydraParams<T>& p, std::size_t L);

}  // namespace mxtts::seqmix
