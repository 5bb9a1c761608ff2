#include "mxtts/model/layers.hpp"

#include <cmath>

namespace mxtts::model {

using seqmix::MixerKind;

template <typename T>
Linear<T>::Linear(ParamStore<T>& ps, const std::string& name, std::size_t in, std::size_t out, bool bias) {
  w = ps.add(name + ".w", in, out);
  if (bias) b = ps.add(name + ".b", 1, out, Init::constant(0.0));
}

template <typename T>
Conv1d<T>::Conv1d(ParamStore<T>& ps, const std::string& name, std::size_t in, std::size_t out, std::size_t k)
    : kernel(k) {
  w = ps.add(name + ".w", k * in, out);
  b = ps.add(name + ".b", 1, out, Init::constant(0.0));
}

template <typename T>
Var<T> Conv1d<T>::operator()(const Var<T>& x) const {
  return ad::linear(kernel == 1 ? x : ad::unfold_time(x, kernel), w, b);
}

template <typename T>
LayerNorm<T>::LayerNorm(ParamStore<T>& ps, const std::string& name, std::size_t dim) {
  gamma = ps.add(name + ".gamma", 1, dim, Init::constant(1.0));
  beta = ps.add(name + ".beta", 1, dim, Init::constant(0.0));
}

template <typename T>
ConvFeedForward<T>::ConvFeedForward(ParamStore<T>& ps, const std::string& name, std::size_t dim,
                                    std::size_t filter, std::size_t kernel)
    : c1(ps, name + ".conv1", dim, filter, kernel), c2(ps, name + ".conv2", filter, dim, kernel) {}

template <typename T>
Var<T> ConvFeedForward<T>::operator()(const Var<T>& x, T dropout, std::mt19937_64* rng) const {
  auto h = ad::relu(c1(x));
  if (rng) h = ad::dropout(h, dropout, *rng);
  return c2(h);
}

// ------------------------------------------------------------------ mixers

namespace {

// Bias so that a freshly initialized SSM starts with alpha ≈ 0.88, i.e. a
// memory of several steps rather than none.
constexpr double kAlphaBiasInit = 2.0;

}  // namespace

template <typename T>
MixerLayer<T>::MixerLayer(ParamStore<T>& ps, const std::string& name, MixerKind kind, const Shape& shape)
    : kind_(kind), shape_(shape) {
  const std::size_t d = shape.dim;
  switch (kind) {
    case MixerKind::kSelfAttention:
      wq_ = ps.add(name + ".wq", d, d);
      wk_ = ps.add(name + ".wk", d, d);
      wv_ = ps.add(name + ".wv", d, d);
      wo_ = ps.add(name + ".wo", d, d);
      break;
    case MixerKind::kMamba2:
    case MixerKind::kHydra: {
      const std::size_t heads = d / shape.head_dim;
      const std::size_t branches = kind == MixerKind::kHydra ? 2 : 1;
      const std::size_t width = 2 * d + branches * (2 * shape.state + heads);
      in_proj_ = Linear<T>(ps, name + ".in_proj", d, width);
      if (in_proj_.b.defined()) {
        auto& bias = in_proj_.b.mutable_value();
        for (std::size_t br = 0; br < branches; ++br) {
          const std::size_t a0 = 2 * d + branches * 2 * shape.state + br * heads;
          for (std::size_t h = 0; h < heads; ++h) bias[a0 + h] = static_cast<T>(kAlphaBiasInit);
        }
      }
      d_ = ps.add(name + ".D", 1, d, Init::constant(1.0));
      out_proj_ = Linear<T>(ps, name + ".out_proj", d, d);
      break;
    }
    case MixerKind::kFNet:
      break;
  }
}

template <typename T>
Var<T> MixerLayer<T>::ssm(const Var<T>& x) const {
  const std::size_t d = shape_.dim, N = shape_.state, P = shape_.head_dim, heads = d / P;
  const bool hydra = kind_ == MixerKind::kHydra;
  const std::size_t branches = hydra ? 2 : 1;
  auto proj = in_proj_(x);
  auto xi = ad::slice_cols(proj, 0, d);
  auto z = ad::slice_cols(proj, d, d);
  auto Bf = ad::slice_cols(proj, 2 * d, N);
  auto Cf = ad::slice_cols(proj, 2 * d + N, N);
  const std::size_t a0 = 2 * d + branches * 2 * N;
  auto alpha_f = ad::sigmoid(ad::slice_cols(proj, a0, heads));

  std::vector<Var<T>> outs;
  outs.reserve(heads);
  if (!hydra) {
    for (std::size_t h = 0; h < heads; ++h)
      outs.push_back(ad::ssd_scan(ad::slice_cols(xi, h * P, P), ad::slice_cols(alpha_f, h, 1), Bf, Cf));
  } else {
    auto Bb = ad::flip_rows(ad::slice_cols(proj, 2 * d + 2 * N, N));
    auto Cb = ad::flip_rows(ad::slice_cols(proj, 2 * d + 3 * N, N));
    auto alpha_b = ad::flip_rows(ad::sigmoid(ad::slice_cols(proj, a0 + heads, heads)));
    auto xr = ad::flip_rows(xi);
    for (std::size_t h = 0; h < heads; ++h) {
      auto fwd = ad::ssd_scan(ad::slice_cols(xi, h * P, P), ad::slice_cols(alpha_f, h, 1), Bf, Cf);
      auto bwd = ad::ssd_scan(ad::slice_cols(xr, h * P, P), ad::slice_cols(alpha_b, h, 1), Bb, Cb);
      outs.push_back(ad::add(ad::shift_rows(fwd), ad::flip_rows(ad::shift_rows(bwd))));
    }
  }
  auto y = ad::add(heads == 1 ? outs[0] : ad::concat_cols(outs), ad::mul_row(xi, d_));
  return out_proj_(ad::mul(y, ad::silu(z)));
}

template <typename T>
Var<T> MixerLayer<T>::self(const Var<T>& x) const {
  switch (kind_) {
    case MixerKind::kSelfAttention:
      return ad::matmul(ad::attention(ad::matmul(x, wq_), ad::matmul(x, wk_), ad::matmul(x, wv_), shape_.heads, false),
                        wo_);
    case MixerKind::kMamba2:
    case MixerKind::kHydra:
      return ssm(x);
    case MixerKind::kFNet:
      return ad::fnet(x);
  }
  throw std::logic_error("MixerLayer: unknown kind");
}

template <typename T>
Var<T> MixerLayer<T>::cross(const Var<T>& a, const Var<T>& b) const {
  if (kind_ == MixerKind::kSelfAttention)
    return ad::matmul(ad::attention(ad::matmul(a, wq_), ad::matmul(b, wk_), ad::matmul(b, wv_), shape_.heads, false),
                      wo_);
  return ad::slice_rows(self(ad::concat_rows<T>({a, b})), 0, a.rows());
}

template <typename T>
Matrix<T> time_embedding(T t, std::size_t dim) {
  const std::size_t half = dim / 2;
  Matrix<T> out(1, dim);
  // Scaled by 1000 so that t ∈ [0, 1] spans many periods of the fast terms.
  const double pos = 1000.0 * static_cast<double>(t);
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(half - 1, 1)));
    out[i] = static_cast<T>(std::sin(pos * freq));
    out[half + i] = static_cast<T>(std::cos(pos * freq));
  }
  return out;
}

#define MXTTS_LAYERS_INSTANTIATE(T)                       \
  template struct Linear<T>;                              \
  template struct Conv1d<T>;                              \
  template struct LayerNorm<T>;                           \
  template struct ConvFeedForward<T>;                     \
  template class MixerLayer<T>;                           \
  template Matrix<T> time_embedding<T>(T, std::size_t);

MXTTS_LAYERS_INSTANTIATE(float)
MXTTS_LAYERS_INSTANTIATE(double)

#undef MXTTS_LAYERS_INSTANTIATE

}  // namespace mxtts::model
