#pragma once

// Random generators and slow reference implementations shared by the test
// binaries. Nothing here calls into the code under test except for types.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mxtts/dsp/audio.hpp"
#include "mxtts/seqmix/types.hpp"
#include "mxtts/tensor.hpp"

namespace testsupport {

using mxtts::Matrix;
using mxtts::seqmix::HydraParams;
using mxtts::seqmix::SsdParams;

// ---- generators

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  bool coin(double p = 0.5) { return uniform(0, 1) < p; }

  template <typename T = double>
  Matrix<T> matrix(std::size_t rows, std::size_t cols, double sd = 1.0) {
    Matrix<T> m(rows, cols);
    for (auto& v : m.flat()) v = static_cast<T>(normal(sd));
    return m;
  }

  SsdParams<double> ssd(std::size_t L, std::size_t N, std::size_t in, std::size_t out, double alpha_lo = 0.5,
                        double alpha_hi = 1.0) {
    SsdParams<double> p;
    for (std::size_t t = 0; t < L; ++t) {
      p.alpha.push_back(uniform(alpha_lo, alpha_hi));
      p.B_bar.push_back(matrix(N, in, 0.5));
      p.C.push_back(matrix(out, N, 0.5));
    }
    return p;
  }

  HydraParams<double> hydra(std::size_t L, std::size_t N, std::size_t dim) {
    HydraParams<double> p;
    p.forward_ss = ssd(L, N, dim, dim);
    p.backward_ss = ssd(L, N, dim, dim);
    for (std::size_t i = 0; i < dim; ++i) p.D.push_back(normal());
    return p;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Runs `body` on `cases` generators derived from `seed`; the case index is
// reported by the caller through `case_seed` when an assertion fails.
inline void for_all(std::size_t cases, std::uint64_t seed, const std::function<void(Gen&, std::uint64_t)>& body) {
  for (std::size_t i = 0; i < cases; ++i) {
    const std::uint64_t case_seed = seed * 1000003ULL + i;
    Gen g(case_seed);
    body(g, case_seed);
  }
}

// ---- comparisons

template <typename T>
double max_abs_diff(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  return m;
}

template <typename T>
double max_abs(const Matrix<T>& a) {
  double m = 0;
  for (auto v : a.flat()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

// max |a-b| / max(max|b|, 1)
template <typename T>
double rel_error(const Matrix<T>& a, const Matrix<T>& b) {
  return max_abs_diff(a, b) / std::max(max_abs(b), 1.0);
}

// ---- sequence-mixer oracles

// Step-by-step recurrence h_t = α_t h_{t−1} + B̄_t x_t, y_t = C_t h_t.
inline Matrix<double> naive_ssd(const Matrix<double>& x, const SsdParams<double>& p) {
  const std::size_t L = x.rows(), N = p.state_dim(), out = p.out_dim();
  std::vector<double> h(N, 0.0);
  Matrix<double> y(L, out);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      double s = p.alpha[t] * h[n];
      for (std::size_t i = 0; i < x.cols(); ++i) s += p.B_bar[t](n, i) * x(t, i);
      h[n] = s;
    }
    for (std::size_t o = 0; o < out; ++o) {
      double s = 0;
      for (std::size_t n = 0; n < N; ++n) s += p.C[t](o, n) * h[n];
      y(t, o) = s;
    }
  }
  return y;
}

// α ≡ 1: y_t = C_t Σ_{s≤t} B̄_s x_s.
inline Matrix<double> cumsum_form(const Matrix<double>& x, const SsdParams<double>& p) {
  const std::size_t L = x.rows(), N = p.state_dim(), out = p.out_dim();
  Matrix<double> y(L, out);
  for (std::size_t t = 0; t < L; ++t) {
    std::vector<double> acc(N, 0.0);
    for (std::size_t s = 0; s <= t; ++s)
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < x.cols(); ++i) acc[n] += p.B_bar[s](n, i) * x(s, i);
    for (std::size_t o = 0; o < out; ++o)
      for (std::size_t n = 0; n < N; ++n) y(t, o) += p.C[t](o, n) * acc[n];
  }
  return y;
}

inline Matrix<double> flip(const Matrix<double>& x) {
  Matrix<double> y(x.rows(), x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t c = 0; c < x.cols(); ++c) y(t, c) = x(x.rows() - 1 - t, c);
  return y;
}

inline Matrix<double> shift(const Matrix<double>& x) {
  Matrix<double> y(x.rows(), x.cols());
  for (std::size_t t = 1; t < x.rows(); ++t)
    for (std::size_t c = 0; c < x.cols(); ++c) y(t, c) = x(t - 1, c);
  return y;
}

// shift(SS_f(x)) + flip(shift(SS_b(flip x))) + D⊙x from the recurrences.
inline Matrix<double> naive_hydra(const Matrix<double>& x, const HydraParams<double>& p) {
  const auto f = shift(naive_ssd(x, p.forward_ss));
  const auto b = flip(shift(naive_ssd(flip(x), p.backward_ss)));
  Matrix<double> y(x.rows(), x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t c = 0; c < x.cols(); ++c) y(t, c) = f(t, c) + b(t, c) + p.D[c] * x(t, c);
  return y;
}

// Dense operator of a scalar-channel Hydra layer, column by column.
inline Matrix<double> hydra_matrix_by_columns(const HydraParams<double>& p) {
  const std::size_t L = p.length();
  Matrix<double> M(L, L);
  for (std::size_t s = 0; s < L; ++s) {
    Matrix<double> e(L, 1);
    e(s, 0) = 1.0;
    const auto col = naive_hydra(e, p);
    for (std::size_t t = 0; t < L; ++t) M(t, s) = col(t, 0);
  }
  return M;
}

// Re(Σ x[l'][h'] e^{-2πi(l l'/L + h h'/H)}), quadruple loop.
inline Matrix<double> naive_dft2(const Matrix<double>& x) {
  const std::size_t L = x.rows(), H = x.cols();
  Matrix<double> y(L, H);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t h = 0; h < H; ++h) {
      double re = 0;
      for (std::size_t a = 0; a < L; ++a)
        for (std::size_t b = 0; b < H; ++b) {
          const double ang = -2.0 * std::numbers::pi *
                             (static_cast<double>((l * a) % L) / static_cast<double>(L) +
                              static_cast<double>((h * b) % H) / static_cast<double>(H));
          re += x(a, b) * std::cos(ang);
        }
      y(l, h) = re;
    }
  return y;
}

inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> y(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      y[k] += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n));
  return y;
}

// Softmax attention written out per head with separate loops.
inline Matrix<double> naive_attention(const Matrix<double>& q, const Matrix<double>& k, const Matrix<double>& v,
                                      std::size_t heads, bool causal) {
  const std::size_t L = q.rows(), S = k.rows(), d = q.cols(), hd = d / heads;
  Matrix<double> out(L, d);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < L; ++i) {
      std::vector<double> w(S, 0.0);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < S; ++j) {
        if (causal && j > i) continue;
        double s = 0;
        for (std::size_t c = 0; c < hd; ++c) s += q(i, h * hd + c) * k(j, h * hd + c);
        w[j] = s / std::sqrt(static_cast<double>(hd));
        mx = std::max(mx, w[j]);
      }
      double z = 0;
      for (std::size_t j = 0; j < S; ++j) {
        w[j] = (causal && j > i) ? 0.0 : std::exp(w[j] - mx);
        z += w[j];
      }
      for (std::size_t j = 0; j < S; ++j)
        for (std::size_t c = 0; c < hd; ++c) out(i, h * hd + c) += w[j] / z * v(j, h * hd + c);
    }
  return out;
}

inline Matrix<double> matmul(const Matrix<double>& a, const Matrix<double>& b) {
  Matrix<double> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

// Singular values of a dense block, descending.
inline std::vector<double> singular_values(const Matrix<double>& m, std::size_t r0, std::size_t r1, std::size_t c0,
                                           std::size_t c1) {
  Eigen::MatrixXd e(static_cast<Eigen::Index>(r1 - r0), static_cast<Eigen::Index>(c1 - c0));
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = c0; j < c1; ++j) e(static_cast<Eigen::Index>(i - r0), static_cast<Eigen::Index>(j - c0)) = m(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  const auto s = svd.singularValues();
  return {s.data(), s.data() + s.size()};
}

// ---- alignment oracle

// Best monotonic segmentation by enumerating every composition of T into L
// positive parts.
inline std::vector<int> brute_force_align(const Matrix<double>& ll) {
  const std::size_t L = ll.rows(), T = ll.cols();
  std::vector<int> best, cur;
  double best_score = -INFINITY;
  std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t tok, std::size_t frame, double score) {
    if (tok == L) {
      if (frame == T && score > best_score) {
        best_score = score;
        best = cur;
      }
      return;
    }
    const std::size_t remaining_tokens = L - tok - 1;
    for (std::size_t d = 1; frame + d + remaining_tokens <= T; ++d) {
      double s = score;
      for (std::size_t f = frame; f < frame + d; ++f) s += ll(tok, f);
      cur.push_back(static_cast<int>(d));
      rec(tok + 1, frame + d, s);
      cur.pop_back();
    }
  };
  rec(0, 0, 0.0);
  return best;
}

// ---- signals

inline mxtts::dsp::Waveform tone(double hz, double seconds, double amp = 0.5, int rate = mxtts::dsp::kModelSampleRate) {
  mxtts::dsp::Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::lround(seconds * rate));
  for (std::size_t i = 0; i < n; ++i)
    w.samples.push_back(amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate));
  return w;
}

inline mxtts::dsp::Waveform noise(double seconds, double amp, std::uint64_t seed, int rate = mxtts::dsp::kModelSampleRate) {
  Gen g(seed);
  mxtts::dsp::Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::lround(seconds * rate));
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(amp * g.uniform(-1.0, 1.0));
  return w;
}

// Deterministic pseudo-noise with a closed form that other languages can
// reproduce bit for bit: frac(sin(12.9898 k) · 43758.5453) − 0.5.
inline double hash_noise(double k) {
  const double v = std::sin(k * 12.9898) * 43758.5453;
  return v - std::floor(v) - 0.5;
}

// Index of the largest magnitude bin of a real signal's DFT, 0..n/2.
inline std::size_t peak_bin(const std::vector<double>& x) {
  std::size_t best = 0;
  double best_mag = -1;
  for (std::size_t k = 0; k <= x.size() / 2; ++k) {
    std::complex<double> s = 0;
    for (std::size_t j = 0; j < x.size(); ++j)
      s += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>((j * k) % x.size()) /
                                      static_cast<double>(x.size()));
    if (std::abs(s) > best_mag) {
      best_mag = std::abs(s);
      best = k;
    }
  }
  return best;
}

// Scratch directory unique to the test binary; removed and recreated.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mxtts_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
