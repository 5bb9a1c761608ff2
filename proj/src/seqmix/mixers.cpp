#include "mxtts/seqmix/mixers.hpp"

#include <cmath>
#include <stdexcept>

namespace mxtts::seqmix {

std::string to_string(MixerKind k) {
  switch (k) {
    case MixerKind::kSelfAttention:
      return "attention";
    case MixerKind::kMamba2:
      return "mamba2";
    case MixerKind::kHydra:
      return "hydra";
    case MixerKind::kFNet:
      return "fnet";
  }
  return "unknown";
}

MixerKind parse_mixer(const std::string& s) {
  for (MixerKind k : kAllMixers)
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown mixer '" + s + "' (expected attention, mamba2, hydra or fnet)");
}

namespace {

template <typename T>
void check_finite(const Matrix<T>& x, const char* what) {
  for (T v : x.flat())
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

template <typename T>
Matrix<T> flip(const Matrix<T>& x) {
  Matrix<T> out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(x.rows() - 1 - r, c);
  return out;
}

template <typename T>
Matrix<T> stack_rows(const Matrix<T>& a, const Matrix<T>& b) {
  if (b.rows() == 0) return a;
  if (a.cols() != b.cols())
    throw ShapeError("cross_mix: channel width mismatch " + shape_str(a) + " vs " + shape_str(b));
  Matrix<T> out(a.rows() + b.rows(), a.cols());
  std::copy(a.data(), a.data() + a.size(), out.data());
  std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
  return out;
}

template <typename T>
Matrix<T> first_rows(const Matrix<T>& x, std::size_t n) {
  Matrix<T> out(n, x.cols());
  std::copy(x.data(), x.data() + n * x.cols(), out.data());
  return out;
}

template <typename T>
void require_scalar_channel(const SsdParams<T>& p, std::size_t L) {
  p.validate();
  if (p.length() != L) throw ShapeError("materialize_mixing_matrix: parameter length differs from L");
  if (L > 0 && (p.in_dim() != 1 || p.out_dim() != 1))
    throw ShapeError("materialize_mixing_matrix: needs in_dim = out_dim = 1");
}

}  // namespace

template <typename T>
Matrix<T> ssd_forward(const Matrix<T>& x, const SsdParams<T>& p, std::size_t chunk) {
  p.validate();
  const std::size_t L = x.rows();
  if (L == 0) throw ShapeError("ssd_forward: empty sequence");
  if (p.length() != L || x.cols() != p.in_dim())
    throw ShapeError("ssd_forward: x " + shape_str(x) + " vs params of length " + std::to_string(p.length()) +
                     " and in_dim " + std::to_string(p.in_dim()));
  if (chunk == 0) throw std::invalid_argument("ssd_forward: chunk size must be positive");
  const std::size_t N = p.state_dim(), O = p.out_dim(), I = p.in_dim();

  // u_s = B̄_s x_s for every step.
  Matrix<T> u(L, N);
  for (std::size_t s = 0; s < L; ++s)
    for (std::size_t n = 0; n < N; ++n) {
      T acc = 0;
      for (std::size_t i = 0; i < I; ++i) acc += p.B_bar[s](n, i) * x(s, i);
      u(s, n) = acc;
    }

  Matrix<T> y(L, O);
  std::vector<T> carry(N, T(0)), h(N);
  for (std::size_t c0 = 0; c0 < L; c0 += chunk) {
    const std::size_t c1 = std::min(L, c0 + chunk);
    std::vector<T> last(N);
    for (std::size_t t = c0; t < c1; ++t) {
      // h_t = Σ_{s=c0..t} (Π_{r=s+1..t} α_r) u_s + (Π_{r=c0..t} α_r) carry
      std::fill(h.begin(), h.end(), T(0));
      T decay = 1;
      for (std::size_t s = t + 1; s-- > c0;) {
        for (std::size_t n = 0; n < N; ++n) h[n] += decay * u(s, n);
        decay *= p.alpha[s];
      }
      for (std::size_t n = 0; n < N; ++n) h[n] += decay * carry[n];
      for (std::size_t o = 0; o < O; ++o) {
        T acc = 0;
        for (std::size_t n = 0; n < N; ++n) acc += p.C[t](o, n) * h[n];
        y(t, o) = acc;
      }
      if (t + 1 == c1) last = h;
    }
    carry = std::move(last);
  }
  return y;
}

template <typename T>
Matrix<T> hydra_forward(const Matrix<T>& x, const HydraParams<T>& p) {
  p.validate();
  const std::size_t L = x.rows(), dim = x.cols();
  if (p.length() != L || p.D.size() != dim)
    throw ShapeError("hydra_forward: x " + shape_str(x) + " vs params of length " + std::to_string(p.length()) +
                     " and width " + std::to_string(p.D.size()));
  const Matrix<T> fwd = ssd_forward(x, p.forward_ss);
  const Matrix<T> bwd = flip(ssd_forward(flip(x), p.backward_ss));
  Matrix<T> y(L, dim);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t c = 0; c < dim; ++c) {
      T v = p.D[c] * x(t, c);
      if (t > 0) v += fwd(t - 1, c);
      // flip ∘ shift ∘ flip moves the reversed branch one step earlier.
      if (t + 1 < L) v += bwd(t + 1, c);
      y(t, c) = v;
    }
  return y;
}

template <typename T>
Matrix<T> fnet_forward(const Matrix<T>& x) {
  if (x.rows() == 0 || x.cols() == 0) throw ShapeError("fnet_forward: empty input");
  check_finite(x, "fnet_forward");
  return kernels::fnet2d(x);
}

template <typename T>
Matrix<T> attention_forward(const Matrix<T>& x, const AttentionParams<T>& p, bool causal,
                            kernels::AttentionCache<T>* cache) {
  p.validate();
  if (x.cols() != p.dim()) throw ShapeError("attention_forward: x " + shape_str(x) + " vs dim " + std::to_string(p.dim()));
  const Matrix<T> q = matmul(x, p.wq), k = matmul(x, p.wk), v = matmul(x, p.wv);
  return matmul(kernels::attention(q, k, v, p.heads, causal, cache), p.wo);
}

template <typename T>
Matrix<T> cross_mix(const Matrix<T>& a, const Matrix<T>& b, MixerKind kind, const MixerParams<T>& params) {
  if (b.rows() > 0 && a.cols() != b.cols())
    throw ShapeError("cross_mix: channel width mismatch " + shape_str(a) + " vs " + shape_str(b));
  switch (kind) {
    case MixerKind::kSelfAttention: {
      const auto& p = std::get<AttentionParams<T>>(params);
      p.validate();
      if (b.rows() == 0) throw ShapeError("cross_mix: attention needs at least one key row");
      const Matrix<T> q = matmul(a, p.wq), k = matmul(b, p.wk), v = matmul(b, p.wv);
      return matmul(kernels::attention(q, k, v, p.heads, false), p.wo);
    }
    case MixerKind::kMamba2:
      return first_rows(ssd_forward(stack_rows(a, b), std::get<SsdParams<T>>(params)), a.rows());
    case MixerKind::kHydra:
      return first_rows(hydra_forward(stack_rows(a, b), std::get<HydraParams<T>>(params)), a.rows());
    case MixerKind::kFNet:
      return first_rows(fnet_forward(stack_rows(a, b)), a.rows());
  }
  throw std::invalid_argument("cross_mix: unknown mixer");
}

template <typename T>
Matrix<T> materialize_mixing_matrix(const SsdParams<T>& p, std::size_t L) {
  require_scalar_channel(p, L);
  const std::size_t N = p.state_dim();
  Matrix<T> M(L, L);
  for (std::size_t t = 0; t < L; ++t) {
    T decay = 1;
    for (std::size_t s = t + 1; s-- > 0;) {
      T cb = 0;
      for (std::size_t n = 0; n < N; ++n) cb += p.C[t](0, n) * p.B_bar[s](n, 0);
      M(t, s) = cb * decay;
      decay *= p.alpha[s];
    }
  }
  return M;
}

template <typename T>
Matrix<T> materialize_mixing_matrix(const HydraParams<T>& p, std::size_t L) {
  p.validate();
  if (p.D.size() != 1) throw ShapeError("materialize_mixing_matrix: Hydra needs a single channel");
  const Matrix<T> Mf = materialize_mixing_matrix(p.forward_ss, L);
  const Matrix<T> Mb = materialize_mixing_matrix(p.backward_ss, L);
  // M = S·Mf + J·S·Mb·J + D, S the down-shift, J the exchange matrix.
  Matrix<T> M(L, L);
  for (std::size_t t = 0; t < L; ++t) {
    M(t, t) = p.D[0];
    for (std::size_t s = 0; s < L; ++s) {
      if (t > 0) M(t, s) += Mf(t - 1, s);
      const std::size_t tr = L - 1 - t, sr = L - 1 - s;
      if (tr > 0) M(t, s) += Mb(tr - 1, sr);
    }
  }
  return M;
}

#define MXTTS_MIXERS_INSTANTIATE(T)                                                                          \
  template Matrix<T> ssd_forward<T>(const Matrix<T>&, const SsdParams<T>&, std::size_t);                     \
  template Matrix<T> hydra_forward<T>(const Matrix<T>&, const HydraParams<T>&);                              \
  template Matrix<T> fnet_forward<T>(const Matrix<T>&);                                                      \
  template Matrix<T> attention_forward<T>(const Matrix<T>&, const AttentionParams<T>&, bool,                 \
                                          kernels::AttentionCache<T>*);                                      \
  template Matrix<T> cross_mix<T>(const Matrix<T>&, const Matrix<T>&, MixerKind, const MixerParams<T>&);     \
  template Matrix<T> materialize_mixing_matrix<T>(const SsdParams<T>&, std::size_t);                         \
  template Matrix<T> materialize_mixing_matrix<T>(const HydraParams<T>&, std::size_t);

MXTTS_MIXERS_INSTANTIATE(float)
MXTTS_MIXERS_INSTANTIATE(double)

#undef MXTTS_MIXERS_INSTANTIATE

}  // namespace mxtts::seqmix
