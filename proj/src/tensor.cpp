#include "mxtts/tensor.hpp"

#include <Eigen/Core>

namespace mxtts {

namespace mem {
namespace {
std::atomic<std::int64_t> g_live{0};
std::atomic<std::int64_t> g_peak{0};
}  // namespace

std::int64_t live_bytes() noexcept { return g_live.load(std::memory_order_relaxed); }
std::int64_t peak_bytes() noexcept { return g_peak.load(std::memory_order_relaxed); }
void reset_peak() noexcept { g_peak.store(g_live.load(std::memory_order_relaxed), std::memory_order_relaxed); }

void on_alloc(std::size_t bytes) noexcept {
  const auto now = g_live.fetch_add(static_cast<std::int64_t>(bytes), std::memory_order_relaxed) +
                   static_cast<std::int64_t>(bytes);
  auto prev = g_peak.load(std::memory_order_relaxed);
  while (now > prev && !g_peak.compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
  }
}

void on_free(std::size_t bytes) noexcept {
  g_live.fetch_sub(static_cast<std::int64_t>(bytes), std::memory_order_relaxed);
}
}  // namespace mem

template <typename T>
void gemm(const Matrix<T>& a, bool trans_a, const Matrix<T>& b, bool trans_b, Matrix<T>& out,
          bool accumulate) {
  using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (k != kb)
    throw ShapeError("gemm: inner dimension mismatch " + shape_str(a) + " · " + shape_str(b));
  if (accumulate) {
    if (out.rows() != m || out.cols() != n) throw ShapeError("gemm: accumulator shape mismatch");
  } else if (out.rows() != m || out.cols() != n) {
    out = Matrix<T>(m, n);
  }
  Eigen::Map<const EMat> ea(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
  Eigen::Map<const EMat> eb(b.data(), static_cast<Eigen::Index>(b.rows()), static_cast<Eigen::Index>(b.cols()));
  Eigen::Map<EMat> eo(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) eo.setZero();
    return;
  }
  if (!accumulate) eo.setZero();
  if (!trans_a && !trans_b)
    eo.noalias() += ea * eb;
  else if (!trans_a && trans_b)
    eo.noalias() += ea * eb.transpose();
  else if (trans_a && !trans_b)
    eo.noalias() += ea.transpose() * eb;
  else
    eo.noalias() += ea.transpose() * eb.transpose();
}

template void gemm<float>(const Matrix<float>&, bool, const Matrix<float>&, bool, Matrix<float>&, bool);
template void gemm<double>(const Matrix<double>&, bool, const Matrix<double>&, bool, Matrix<double>&, bool);

}  // namespace mxtts
