#pragma once

#include <vector>

#include "mxtts/tensor.hpp"

// Inner kernels of the sequence mixers. `serial` is the reference; `omp`
// splits the independent loop (channels, heads × query rows, FFT lines)
// across OpenMP threads without reordering any per-element arithmetic, so
// both variants produce bit-identical results.
namespace mxtts::seqmix::kernels {

enum class Backend { kSerial, kOpenMP };

void set_backend(Backend b) noexcept;
Backend backend() noexcept;
bool openmp_available() noexcept;
int max_threads() noexcept;
void set_threads(int n) noexcept;

// Channelwise selective scan (Mamba2 head layout). x: L×P, alpha: L,
// B, C: L×N, shared across the P channels:
//   H_t = alpha_t H_{t-1} + B_t x_tᵀ,   y_t = H_tᵀ C_t
template <typename T>
struct ScanGrads {
  Matrix<T> dx, dB, dC;
  std::vector<T> dalpha;
};

// Multi-head softmax attention, optionally causal; q: L×d, k, v: S×d.
template <typename T>
struct AttentionCache {
  std::vector<Matrix<T>> probs;  // per head, L×S
};

template <typename T>
struct AttentionGrads {
  Matrix<T> dq, dk, dv;
};

namespace serial {
template <typename T>
Matrix<T> ssd_scan(const Matrix<T>& x, const std::vector<T>& alpha, const Matrix<T>& B, const Matrix<T>& C);
template <typename T>
ScanGrads<T> ssd_scan_backward(const Matrix<T>& x, const std::vector<T>& alpha, const Matrix<T>& B,
                               const Matrix<T>& C, const Matrix<T>& dy);
template <typename T>
Matrix<T> attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, std::size_t heads, bool causal,
                    AttentionCache<T>* cache);
template <typename T>
AttentionGrads<T> attention_backward(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, std::size_t heads,
                                     const AttentionCache<T>& cache, const Matrix<T>& dout);
// Re(F_seq(F_hidden(x))), unnormalized DFTs.
template <typename T>
Matrix<T> fnet2d(const Matrix<T>& x);
}  // namespace serial

namespace omp {
template <typename T>
Matrix<T> ssd_scan(const Matrix<T>& x, const std::vector<T>& alpha, const Matrix<T>& B, const Matrix<T>& C);
template <typename T>
ScanGrads<T> ssd_scan_backward(const Matrix<T>& x, const std::vector<T>& alpha, const Matrix<T>& B,
                               const Matrix<T>& C, const Matrix<T>& dy);
template <typename T>
Matrix<T> attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, std::size_t heads, bool causal,
                    AttentionCache<T>* cache);
template <typename T>
AttentionGrads<T> attention_backward(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, std::size_t heads,
                                     const AttentionCache<T>& cache, const Matrix<T>& dout);
// Re(F_seq(F_hidden(x))), unnormalized DFTs.
template <typename T>
Matrix<T> fnet2d(const Matrix<T>& x);
}  // namespace omp

// Dispatch on the active backend.
template <typename T>
Matrix<T> ssd_scan(const Matrix<T>& x, const std::vector<T>& alpha, const Matrix<T>& B, const Matrix<T>& C) {
  return backend() == Backend::kOpenMP ? omp::ssd_scan(x, alpha, B, C) : serial::ssd_scan(x, alpha, B, C);
}
template <typename T>
ScanGrads<T> ssd_scan_backward(const Matrix<T>& x, const std::vector<T>& alpha, const Matrix<T>& B,
                               const Matrix<T>& C, const Matrix<T>& dy) {
  return backend() == Backend::kOpenMP ? omp::ssd_scan_backward(x, alpha, B, C, dy)
                                       : serial::ssd_scan_backward(x, alpha, B, C, dy);
}
template <typename T>
Matrix<T> attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, std::size_t heads, bool causal,
                    AttentionCache<T>* cache = nullptr) {
  return backend() == Backend::kOpenMP ? omp::attention(q, k, v, heads, causal, cache)
                                       : serial::attention(q, k, v, heads, causal, cache);
}
template <typename T>
AttentionGrads<T> attention_backward(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, std::size_t heads,
                                     const AttentionCache<T>& cache, const Matrix<T>& dout) {
  return backend() == Backend::kOpenMP ? omp::attention_backward(q, k, v, heads, cache, dout)
                                       : serial::attention_backward(q, k, v, heads, cache, dout);
}
template <typename T>
Matrix<T> fnet2d(const Matrix<T>& x) {
  return backend() == Backend::kOpenMP ? omp::fnet2d(x) : serial::fnet2d(x);
}

}  // namespace mxtts::seqmix::kernels
