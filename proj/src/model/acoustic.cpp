#include "mxtts/model/acoustic.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mxtts::model {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
// Upper bound on a single predicted duration, in frames.
constexpr double kMaxLogDuration = 9.2;

template <typename T>
void require_finite(const Matrix<T>& m, const char* what) {
  for (T v : m.flat())
    if (!std::isfinite(static_cast<double>(v))) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

}  // namespace

// ------------------------------------------------------------------ alignment

template <typename T>
Matrix<double> alignment_log_likelihood(const Matrix<T>& mu, const Matrix<T>& y) {
  if (mu.cols() != y.cols()) throw ShapeError("alignment: means " + shape_str(mu) + " vs frames " + shape_str(y));
  const std::size_t L = mu.rows(), Tn = y.rows(), C = mu.cols();
  Matrix<double> ll(L, Tn);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < Tn; ++j) {
      double s = 0;
      for (std::size_t c = 0; c < C; ++c) {
        const double d = static_cast<double>(y(j, c)) - static_cast<double>(mu(i, c));
        s += d * d;
      }
      ll(i, j) = -0.5 * s - static_cast<double>(C) * kHalfLog2Pi;
    }
  return ll;
}

std::vector<int> monotonic_align(const Matrix<double>& ll) {
  const std::size_t L = ll.rows(), Tn = ll.cols();
  if (L == 0) throw std::invalid_argument("monotonic_align: no tokens");
  if (L > Tn)
    throw std::invalid_argument("monotonic_align: " + std::to_string(L) + " tokens cannot cover " +
                                std::to_string(Tn) + " frames");
  constexpr double kNeg = -std::numeric_limits<double>::infinity();
  Matrix<double> Q(L, Tn, kNeg);
  Q(0, 0) = ll(0, 0);
  for (std::size_t j = 1; j < Tn; ++j) {
    const std::size_t i_max = std::min(L - 1, j);
    for (std::size_t i = 0; i <= i_max; ++i) {
      const double stay = Q(i, j - 1);
      const double advance = i > 0 ? Q(i - 1, j - 1) : kNeg;
      Q(i, j) = ll(i, j) + std::max(stay, advance);
    }
  }
  std::vector<int> durations(L, 0);
  std::size_t i = L - 1;
  for (std::size_t j = Tn; j-- > 0;) {
    ++durations[i];
    if (j > 0 && i > 0 && (i == j || Q(i - 1, j - 1) > Q(i, j - 1))) --i;
  }
  return durations;
}

std::vector<std::size_t> expand_durations(const std::vector<int>& durations) {
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (durations[i] < 1) throw std::invalid_argument("durations must be >= 1");
    index.insert(index.end(), static_cast<std::size_t>(durations[i]), i);
  }
  return index;
}

std::vector<int> durations_from_log(const std::vector<double>& log_durations) {
  std::vector<int> d(log_durations.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double ld = std::isfinite(log_durations[i]) ? std::min(log_durations[i], kMaxLogDuration) : 0.0;
    d[i] = std::max(1, static_cast<int>(std::ceil(std::exp(ld))));
  }
  return d;
}

template <typename T>
Var<T> regulate_length(const Var<T>& token_states, const std::vector<int>& durations) {
  if (durations.size() != token_states.rows())
    throw ShapeError("regulate_length: " + std::to_string(durations.size()) + " durations for " +
                     std::to_string(token_states.rows()) + " tokens");
  return ad::gather_rows(token_states, expand_durations(durations));
}

// ------------------------------------------------------------------ flow matching

template <typename T>
CfmPoint<T> cfm_point(const Matrix<T>& x1, const Matrix<T>& x0, T t, T sigma_min) {
  if (!x1.same_shape(x0)) throw ShapeError("cfm: x1 " + shape_str(x1) + " vs x0 " + shape_str(x0));
  CfmPoint<T> p;
  p.t = t;
  p.x_t = Matrix<T>(x1.rows(), x1.cols());
  p.u = Matrix<T>(x1.rows(), x1.cols());
  const T keep = T(1) - (T(1) - sigma_min) * t;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    p.x_t[i] = keep * x0[i] + t * x1[i];
    p.u[i] = x1[i] - (T(1) - sigma_min) * x0[i];
  }
  return p;
}

template <typename T>
CfmPoint<T> draw_cfm_point(const Matrix<T>& x1, std::mt19937_64& rng, T sigma_min) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> normal;
  const T t = static_cast<T>(uni(rng));
  Matrix<T> x0(x1.rows(), x1.cols());
  for (auto& v : x0.flat()) v = static_cast<T>(normal(rng));
  return cfm_point(x1, x0, t, sigma_min);
}

template <typename T>
Var<T> cfm_loss(const Matrix<T>& x1, const FieldFn<T>& field, std::mt19937_64& rng, T sigma_min) {
  require_finite(x1, "cfm_loss");
  auto p = draw_cfm_point(x1, rng, sigma_min);
  return ad::mse(field(ad::constant(std::move(p.x_t)), p.t), ad::constant(std::move(p.u)));
}

template <typename T>
Matrix<T> euler_integrate(Matrix<T> x, int n_steps, const std::function<Matrix<T>(const Matrix<T>&, T)>& field) {
  if (n_steps < 1) throw std::invalid_argument("euler_integrate: n_steps must be >= 1");
  const T dt = T(1) / static_cast<T>(n_steps);
  for (int k = 0; k < n_steps; ++k) {
    const Matrix<T> v = field(x, static_cast<T>(k) * dt);
    if (!v.same_shape(x)) throw ShapeError("euler_integrate: field changed shape");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt * v[i];
  }
  return x;
}

// ------------------------------------------------------------------ stats

MelStats MelStats::identity(std::size_t n_mels) {
  return {std::vector<double>(n_mels, 0.0), std::vector<double>(n_mels, 1.0)};
}

template <typename T>
Matrix<T> MelStats::normalize(const Matrix<T>& frames) const {
  if (frames.cols() != mean.size()) throw ShapeError("MelStats: width mismatch");
  Matrix<T> out(frames.rows(), frames.cols());
  for (std::size_t r = 0; r < frames.rows(); ++r)
    for (std::size_t c = 0; c < frames.cols(); ++c)
      out(r, c) = static_cast<T>((static_cast<double>(frames(r, c)) - mean[c]) / std[c]);
  return out;
}

template <typename T>
Matrix<T> MelStats::denormalize(const Matrix<T>& frames) const {
  if (frames.cols() != mean.size()) throw ShapeError("MelStats: width mismatch");
  Matrix<T> out(frames.rows(), frames.cols());
  for (std::size_t r = 0; r < frames.rows(); ++r)
    for (std::size_t c = 0; c < frames.cols(); ++c)
      out(r, c) = static_cast<T>(static_cast<double>(frames(r, c)) * std[c] + mean[c]);
  return out;
}

// ------------------------------------------------------------------ model

template <typename T>
AcousticModel<T>::AcousticModel(const ModelConfig& cfg, std::uint64_t seed, bool shape_only)
    : cfg_(cfg), dims_(cfg.dims()), params_(seed, shape_only), stats_(MelStats::identity(cfg.dec_out)) {
  cfg_.validate();
  const auto& d = dims_;
  auto& ps = params_;
  const std::size_t ctx_dim = d.enc + d.spk + d.lang;

  tok_emb_ = ps.add("encoder.embedding", cfg.n_vocab, d.enc, Init::normal(1.0));
  spk_emb_ = ps.add("speaker_embedding", cfg.n_speakers, d.spk, Init::normal(1.0));
  lang_emb_ = ps.add("language_embedding", cfg.n_languages, d.lang, Init::normal(1.0));

  for (std::size_t i = 0; i < cfg.prenet_layers; ++i) {
    const std::string n = "encoder.prenet." + std::to_string(i);
    prenet_conv_.emplace_back(ps, n + ".conv", d.enc, d.enc, cfg.prenet_kernel);
    prenet_norm_.emplace_back(ps, n + ".norm", d.enc);
  }
  if (cfg.prenet_layers > 0) {
    prenet_proj_ = Linear<T>(ps, "encoder.prenet.proj", d.enc, d.enc);
    // Zero residual branch at initialization.
    if (prenet_proj_.w.defined()) prenet_proj_.w.mutable_value().fill(T(0));
  }

  const typename MixerLayer<T>::Shape enc_shape{d.enc, d.heads, d.ssm_state, d.ssm_head_dim};
  for (std::size_t i = 0; i < d.enc_blocks; ++i) {
    const std::string n = "encoder.block." + std::to_string(i);
    enc_blocks_.push_back({MixerLayer<T>(ps, n + ".mixer", cfg.mixer, enc_shape), LayerNorm<T>(ps, n + ".norm1", d.enc),
                           LayerNorm<T>(ps, n + ".norm2", d.enc),
                           ConvFeedForward<T>(ps, n + ".ffn", d.enc, d.enc_filter, cfg.ffn_kernel)});
  }

  mu_proj_ = Linear<T>(ps, "encoder.mu_proj", ctx_dim, d.dec_out);
  cond_proj_ = Linear<T>(ps, "encoder.cond_proj", ctx_dim, d.dec_in);
  key_proj_ = Linear<T>(ps, "encoder.key_proj", ctx_dim, d.dec_hidden);

  dp_conv1_ = Conv1d<T>(ps, "duration.conv1", ctx_dim, d.dp_filter, 3);
  dp_norm1_ = LayerNorm<T>(ps, "duration.norm1", d.dp_filter);
  dp_conv2_ = Conv1d<T>(ps, "duration.conv2", d.dp_filter, d.dp_filter, 3);
  dp_norm2_ = LayerNorm<T>(ps, "duration.norm2", d.dp_filter);
  dp_out_ = Linear<T>(ps, "duration.out", d.dp_filter, 1);

  dec_in_proj_ = Linear<T>(ps, "decoder.in_proj", d.dec_out + d.dec_in, d.dec_hidden);
  time_fc1_ = Linear<T>(ps, "decoder.time.fc1", d.time_emb, d.dec_hidden);
  time_fc2_ = Linear<T>(ps, "decoder.time.fc2", d.dec_hidden, d.dec_hidden);
  const typename MixerLayer<T>::Shape dec_shape{d.dec_hidden, d.heads, d.ssm_state, d.ssm_head_dim};
  for (std::size_t i = 0; i < d.dec_blocks; ++i) {
    const std::string n = "decoder.block." + std::to_string(i);
    dec_blocks_.push_back({MixerLayer<T>(ps, n + ".self_mix", cfg.mixer, dec_shape),
                           MixerLayer<T>(ps, n + ".cross_mix", cfg.mixer, dec_shape),
                           LayerNorm<T>(ps, n + ".norm1", d.dec_hidden), LayerNorm<T>(ps, n + ".norm2", d.dec_hidden),
                           LayerNorm<T>(ps, n + ".norm3", d.dec_hidden),
                           Linear<T>(ps, n + ".ff1", d.dec_hidden, d.dec_ffn),
                           Linear<T>(ps, n + ".ff2", d.dec_ffn, d.dec_hidden)});
  }
  dec_out_proj_ = Linear<T>(ps, "decoder.out_proj", d.dec_hidden, d.dec_out);
}

template <typename T>
typename AcousticModel<T>::Encoded AcousticModel<T>::encode(const text::TokenSequence& tokens,
                                                            std::mt19937_64* rng) const {
  if (tokens.ids.empty()) throw std::invalid_argument("encode: empty token sequence");
  if (tokens.speaker_id < 0 || static_cast<std::size_t>(tokens.speaker_id) >= cfg_.n_speakers)
    throw std::invalid_argument("encode: speaker id " + std::to_string(tokens.speaker_id) + " out of range");
  if (tokens.language_id < 0 || static_cast<std::size_t>(tokens.language_id) >= cfg_.n_languages)
    throw std::invalid_argument("encode: language id " + std::to_string(tokens.language_id) + " out of range");
  std::vector<std::size_t> ids;
  ids.reserve(tokens.ids.size());
  for (int id : tokens.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg_.n_vocab)
      throw std::invalid_argument("encode: token id " + std::to_string(id) + " out of range");
    ids.push_back(static_cast<std::size_t>(id));
  }
  const std::size_t L = ids.size();
  const T p = rng ? static_cast<T>(cfg_.enc_dropout) : T(0);
  auto drop = [&](const Var<T>& v) { return rng ? ad::dropout(v, p, *rng) : v; };

  Var<T> x = ad::gather_rows(tok_emb_, ids);
  if (!prenet_conv_.empty()) {
    Var<T> h = x;
    for (std::size_t i = 0; i < prenet_conv_.size(); ++i) h = drop(ad::relu(prenet_norm_[i](prenet_conv_[i](h))));
    x = ad::add(x, prenet_proj_(h));
  }
  for (const auto& b : enc_blocks_) {
    x = b.norm1(ad::add(x, drop(b.mixer.self(x))));
    x = b.norm2(ad::add(x, drop(b.ffn(x, p, rng))));
  }

  Encoded e;
  e.enc = x;
  auto spk = ad::gather_rows(spk_emb_, std::vector<std::size_t>(L, static_cast<std::size_t>(tokens.speaker_id)));
  auto lang = ad::gather_rows(lang_emb_, std::vector<std::size_t>(L, static_cast<std::size_t>(tokens.language_id)));
  e.ctx = ad::concat_cols<T>({x, spk, lang});
  e.mu = mu_proj_(e.ctx);
  e.cond_tokens = cond_proj_(e.ctx);
  e.keys = key_proj_(e.ctx);

  auto h = ad::detach(e.ctx);
  h = drop(dp_norm1_(ad::relu(dp_conv1_(h))));
  h = drop(dp_norm2_(ad::relu(dp_conv2_(h))));
  e.log_durations = dp_out_(h);
  return e;
}

template <typename T>
Var<T> AcousticModel<T>::field(const Var<T>& x_t, T t, const Var<T>& cond, const Var<T>& keys) const {
  if (x_t.rows() != cond.rows()) throw ShapeError("field: x_t and conditioning lengths differ");
  auto temb = ad::constant(time_embedding<T>(t, dims_.time_emb));
  temb = time_fc2_(ad::silu(time_fc1_(temb)));
  auto h = dec_in_proj_(ad::concat_cols<T>({x_t, cond}));
  for (const auto& b : dec_blocks_) {
    h = ad::add_row(h, temb);
    h = b.norm1(ad::add(h, b.self_mix.self(h)));
    h = b.norm2(ad::add(h, b.cross_mix.cross(h, keys)));
    h = b.norm3(ad::add(h, b.ff2(ad::silu(b.ff1(h)))));
  }
  return dec_out_proj_(h);
}

template <typename T>
typename AcousticModel<T>::LossParts AcousticModel<T>::loss(const text::TokenSequence& tokens,
                                                            const Matrix<T>& frames, std::mt19937_64& rng,
                                                            bool train) const {
  if (frames.cols() != dims_.dec_out)
    throw ShapeError("loss: target has " + std::to_string(frames.cols()) + " channels, model emits " +
                     std::to_string(dims_.dec_out));
  require_finite(frames, "loss");
  const Encoded e = encode(tokens, train ? &rng : nullptr);

  LossParts out;
  out.durations = monotonic_align(alignment_log_likelihood(e.mu.value(), frames));
  const auto index = expand_durations(out.durations);

  auto target = ad::constant(frames);
  auto prior = ad::add_scalar(ad::scale(ad::mse(ad::gather_rows(e.mu, index), target), T(0.5)), T(kHalfLog2Pi));

  Matrix<T> log_d(out.durations.size(), 1);
  for (std::size_t i = 0; i < out.durations.size(); ++i) log_d[i] = static_cast<T>(std::log(out.durations[i]));
  auto dur = ad::mse(e.log_durations, ad::constant(std::move(log_d)));

  auto cond = ad::gather_rows(e.cond_tokens, index);
  auto cfm = cfm_loss<T>(
      frames, [&](const Var<T>& x_t, T t) { return field(x_t, t, cond, e.keys); }, rng);

  out.total = ad::add(ad::add(cfm, dur), prior);
  out.cfm = static_cast<double>(cfm.item());
  out.duration = static_cast<double>(dur.item());
  out.prior = static_cast<double>(prior.item());
  return out;
}

template <typename T>
typename AcousticModel<T>::Synthesis AcousticModel<T>::synthesize(const text::TokenSequence& tokens,
                                                                  std::mt19937_64& rng, int n_steps) const {
  const Encoded e = encode(tokens);
  std::vector<double> log_d(e.log_durations.rows());
  for (std::size_t i = 0; i < log_d.size(); ++i) log_d[i] = static_cast<double>(e.log_durations.value()[i]);
  Synthesis s;
  s.durations = durations_from_log(log_d);
  auto cond = regulate_length(e.cond_tokens, s.durations);

  Matrix<T> x0(cond.rows(), dims_.dec_out);
  std::normal_distribution<double> normal;
  for (auto& v : x0.flat()) v = static_cast<T>(normal(rng));
  s.frames = euler_integrate<T>(std::move(x0), n_steps, [&](const Matrix<T>& x, T t) {
    return field(ad::constant(x), t, cond, e.keys).value();
  });
  return s;
}

std::size_t count_parameters(const ModelConfig& cfg) {
  return AcousticModel<float>(cfg, 0, true).params().count();
}

#define MXTTS_ACOUSTIC_INSTANTIATE(T)                                                                    \
  template Matrix<double> alignment_log_likelihood<T>(const Matrix<T>&, const Matrix<T>&);               \
  template Var<T> regulate_length<T>(const Var<T>&, const std::vector<int>&);                            \
  template CfmPoint<T> cfm_point<T>(const Matrix<T>&, const Matrix<T>&, T, T);                           \
  template CfmPoint<T> draw_cfm_point<T>(const Matrix<T>&, std::mt19937_64&, T);                         \
  template Var<T> cfm_loss<T>(const Matrix<T>&, const FieldFn<T>&, std::mt19937_64&, T);                 \
  template Matrix<T> euler_integrate<T>(Matrix<T>, int, const std::function<Matrix<T>(const Matrix<T>&, T)>&); \
  template Matrix<T> MelStats::normalize<T>(const Matrix<T>&) const;                                     \
  template Matrix<T> MelStats::denormalize<T>(const Matrix<T>&) const;                                   \
  template class AcousticModel<T>;

MXTTS_ACOUSTIC_INSTANTIATE(float)
MXTTS_ACOUSTIC_INSTANTIATE(double)

#undef MXTTS_ACOUSTIC_INSTANTIATE

}  // namespace mxtts::model
