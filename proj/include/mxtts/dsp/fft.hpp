#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

namespace mxtts::dsp {

// Exact-length complex DFT. Powers of two use an iterative radix-2 kernel;
// every other length goes through Bluestein's chirp-z on a padded radix-2
// plan, so results are those of the length-n DFT with no visible padding.
template <typename T>
class FftPlan {
 public:
  using Complex = std::complex<T>;

  explicit FftPlan(std::size_t n);

  std::size_t size() const noexcept { return n_; }

  // X_k = Σ_j x_j e^{-2πi jk/n}
  void forward(std::span<Complex> data) const { transform(data, false); }
  // Unnormalized inverse: x_j = Σ_k X_k e^{+2πi jk/n}
  void backward(std::span<Complex> data) const { transform(data, true); }

 private:
  void transform(std::span<Complex> data, bool inverse) const;
  void radix2(std::span<Complex> data, bool inverse) const;

  std::size_t n_ = 0;
  bool pow2_ = true;
  std::vector<std::size_t> bitrev_;
  std::vector<Complex> twiddle_;  // e^{-2πi k/n}, k < n/2

  // Bluestein state
  std::unique_ptr<FftPlan> inner_;
  std::vector<Complex> chirp_;       // e^{-πi k²/n}
  std::vector<Complex> chirp_fft_;   // FFT of the conjugate chirp filter
};

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

template <typename T>
FftPlan<T>::FftPlan(std::size_t n) : n_(n), pow2_(is_pow2(n)) {
  if (n == 0) return;
  if (pow2_) {
    bitrev_.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      bitrev_[i] = r;
    }
    twiddle_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = Complex(static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a)));
    }
    return;
  }
  const std::size_t m = next_pow2(2 * n - 1);
  inner_ = std::make_unique<FftPlan>(m);
  chirp_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k² mod 2n keeps the angle argument small and exact.
    const auto kk = static_cast<double>((k * k) % (2 * n));
    const double a = -std::numbers::pi * kk / static_cast<double>(n);
    chirp_[k] = Complex(static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a)));
  }
  chirp_fft_.assign(m, Complex(0));
  chirp_fft_[0] = std::conj(chirp_[0]);
  for (std::size_t k = 1; k < n; ++k) {
    chirp_fft_[k] = std::conj(chirp_[k]);
    chirp_fft_[m - k] = std::conj(chirp_[k]);
  }
  inner_->forward(chirp_fft_);
}

template <typename T>
void FftPlan<T>::radix2(std::span<Complex> a, bool inverse) const {
  const std::size_t n = n_;
  for (std::size_t i = 0; i < n; ++i)
    if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < half; ++j) {
        Complex w = twiddle_[j * step];
        if (inverse) w = std::conj(w);
        const Complex u = a[i + j];
        const Complex v = a[i + j + half] * w;
        a[i + j] = u + v;
        a[i + j + half] = u - v;
      }
    }
  }
}

template <typename T>
void FftPlan<T>::transform(std::span<Complex> data, bool inverse) const {
  if (n_ <= 1) return;
  if (pow2_) {
    radix2(data, inverse);
    return;
  }
  // Inverse via conjugation: ifft(x) = conj(fft(conj(x))).
  const std::size_t m = inner_->size();
  std::vector<Complex> buf(m, Complex(0));
  for (std::size_t k = 0; k < n_; ++k) {
    const Complex x = inverse ? std::conj(data[k]) : data[k];
    buf[k] = x * chirp_[k];
  }
  inner_->forward(buf);
  for (std::size_t k = 0; k < m; ++k) buf[k] *= chirp_fft_[k];
  inner_->backward(buf);
  const T scale = T(1) / static_cast<T>(m);
  for (std::size_t k = 0; k < n_; ++k) {
    const Complex y = buf[k] * scale * chirp_[k];
    data[k] = inverse ? std::conj(y) : y;
  }
}

// Plans are cached per thread and per length.
template <typename T>
const FftPlan<T>& cached_plan(std::size_t n);

template <typename T>
void fft(std::span<std::complex<T>> data) {
  cached_plan<T>(data.size()).forward(data);
}

template <typename T>
void ifft_unnormalized(std::span<std::complex<T>> data) {
  cached_plan<T>(data.size()).backward(data);
}

}  // namespace mxtts::dsp
