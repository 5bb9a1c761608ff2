#include "mxtts/seqmix/kernels.hpp"

#include <atomic>
#include <cmath>
#include <complex>
#include <limits>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "mxtts/dsp/fft.hpp"

namespace mxtts::seqmix::kernels {

namespace {
std::atomic<Backend> g_backend{
#if defined(_OPENMP)
    Backend::kOpenMP
#else
    Backend::kSerial
#endif
};

template <typename T>
void check_scan_shapes(const Matrix<T>& x, const std::vector<T>& alpha, const Matrix<T>& B, const Matrix<T>& C) {
  const auto L = x.rows();
  if (alpha.size() != L || B.rows() != L || C.rows() != L || B.cols() != C.cols())
    throw ShapeError("ssd_scan: x " + shape_str(x) + ", alpha " + std::to_string(alpha.size()) + ", B " +
                     shape_str(B) + ", C " + shape_str(C));
}

template <typename T>
void check_attention_shapes(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, std::size_t heads) {
  if (k.rows() != v.rows() || q.cols() != k.cols() || k.cols() != v.cols())
    throw ShapeError("attention: q " + shape_str(q) + ", k " + shape_str(k) + ", v " + shape_str(v));
  if (heads == 0 || q.cols() % heads != 0) throw ShapeError("attention: width not divisible by heads");
}

}  // namespace

void set_backend(Backend b) noexcept { g_backend.store(b); }
Backend backend() noexcept { return g_backend.load(); }

bool openmp_available() noexcept {
#if defined(_OPENMP)
  return true;
#else
  return false;
#endif
}

int max_threads() noexcept {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) noexcept {
#if defined(_OPENMP)
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// ===================================================================== serial

namespace serial {

template <typename T>
Matrix<T> ssd_scan(const Matrix<T>& x, const std::vector<T>& alpha, const Matrix<T>& B, const Matrix<T>& C) {
  check_scan_shapes(x, alpha, B, C);
  const std::size_t L = x.rows(), P = x.cols(), N = B.cols();
  Matrix<T> H(N, P);
  Matrix<T> y(L, P);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t p = 0; p < P; ++p) H(n, p) = alpha[t] * H(n, p) + B(t, n) * x(t, p);
    for (std::size_t p = 0; p < P; ++p) {
      T acc = 0;
      for (std::size_t n = 0; n < N; ++n) acc += C(t, n) * H(n, p);
      y(t, p) = acc;
    }
  }
  return y;
}

template <typename T>
ScanGrads<T> ssd_scan_backward(const Matrix<T>& x, const std::vector<T>& alpha, const Matrix<T>& B,
                               const Matrix<T>& C, const Matrix<T>& dy) {
  check_scan_shapes(x, alpha, B, C);
  const std::size_t L = x.rows(), P = x.cols(), N = B.cols();
  if (!dy.same_shape(x)) throw ShapeError("ssd_scan_backward: dy shape");

  // States H_t stacked as (L·N) × P, adjoints G_t likewise.
  Matrix<T> Hs(L * N, P), Gs(L * N, P);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t p = 0; p < P; ++p) {
        const T prev = t ? Hs((t - 1) * N + n, p) : T(0);
        Hs(t * N + n, p) = alpha[t] * prev + B(t, n) * x(t, p);
      }

  ScanGrads<T> g;
  g.dx = Matrix<T>(L, P);
  for (std::size_t tt = L; tt-- > 0;) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t p = 0; p < P; ++p) {
        const T carry = tt + 1 < L ? alpha[tt + 1] * Gs((tt + 1) * N + n, p) : T(0);
        Gs(tt * N + n, p) = carry + C(tt, n) * dy(tt, p);
      }
    for (std::size_t p = 0; p < P; ++p) {
      T acc = 0;
      for (std::size_t n = 0; n < N; ++n) acc += Gs(tt * N + n, p) * B(tt, n);
      g.dx(tt, p) = acc;
    }
  }

  g.dB = Matrix<T>(L, N);
  g.dC = Matrix<T>(L, N);
  g.dalpha.assign(L, T(0));
  for (std::size_t t = 0; t < L; ++t) {
    T da = 0;
    for (std::size_t n = 0; n < N; ++n) {
      T db = 0, dc = 0, dan = 0;
      for (std::size_t p = 0; p < P; ++p) {
        const T G = Gs(t * N + n, p);
        db += G * x(t, p);
        dc += Hs(t * N + n, p) * dy(t, p);
        if (t) dan += G * Hs((t - 1) * N + n, p);
      }
      g.dB(t, n) = db;
      g.dC(t, n) = dc;
      da += dan;
    }
    g.dalpha[t] = da;
  }
  return g;
}

template <typename T>
Matrix<T> attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, std::size_t heads, bool causal,
                    AttentionCache<T>* cache) {
  check_attention_shapes(q, k, v, heads);
  const std::size_t L = q.rows(), S = k.rows(), d = q.cols(), hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  Matrix<T> out(L, d);
  if (cache) cache->probs.assign(heads, Matrix<T>());
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hd;
    Matrix<T> P(L, S);
    for (std::size_t i = 0; i < L; ++i) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < S; ++j) {
        if (causal && j > i) {
          P(i, j) = -std::numeric_limits<T>::infinity();
          continue;
        }
        T s = 0;
        for (std::size_t c = 0; c < hd; ++c) s += q(i, off + c) * k(j, off + c);
        P(i, j) = s * scale;
        mx = std::max(mx, P(i, j));
      }
      T z = 0;
      for (std::size_t j = 0; j < S; ++j) {
        const T e = (causal && j > i) ? T(0) : std::exp(P(i, j) - mx);
        P(i, j) = e;
        z += e;
      }
      for (std::size_t j = 0; j < S; ++j) P(i, j) /= z;
      for (std::size_t c = 0; c < hd; ++c) {
        T acc = 0;
        for (std::size_t j = 0; j < S; ++j) acc += P(i, j) * v(j, off + c);
        out(i, off + c) = acc;
      }
    }
    if (cache) cache->probs[h] = std::move(P);
  }
  return out;
}

template <typename T>
AttentionGrads<T> attention_backward(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, std::size_t heads,
                                     const AttentionCache<T>& cache, const Matrix<T>& dout) {
  check_attention_shapes(q, k, v, heads);
  const std::size_t L = q.rows(), S = k.rows(), d = q.cols(), hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  AttentionGrads<T> g{Matrix<T>(L, d), Matrix<T>(S, d), Matrix<T>(S, d)};
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hd;
    const auto& P = cache.probs.at(h);
    Matrix<T> dS(L, S);
    for (std::size_t i = 0; i < L; ++i) {
      T rowdot = 0;
      for (std::size_t j = 0; j < S; ++j) {
        T dp = 0;
        for (std::size_t c = 0; c < hd; ++c) dp += dout(i, off + c) * v(j, off + c);
        dS(i, j) = dp;
        rowdot += dp * P(i, j);
      }
      for (std::size_t j = 0; j < S; ++j) dS(i, j) = P(i, j) * (dS(i, j) - rowdot) * scale;
      for (std::size_t c = 0; c < hd; ++c) {
        T acc = 0;
        for (std::size_t j = 0; j < S; ++j) acc += dS(i, j) * k(j, off + c);
        g.dq(i, off + c) = acc;
      }
    }
    for (std::size_t j = 0; j < S; ++j)
      for (std::size_t c = 0; c < hd; ++c) {
        T dk = 0, dv = 0;
        for (std::size_t i = 0; i < L; ++i) {
          dk += dS(i, j) * q(i, off + c);
          dv += P(i, j) * dout(i, off + c);
        }
        g.dk(j, off + c) = dk;
        g.dv(j, off + c) = dv;
      }
  }
  return g;
}

template <typename T>
Matrix<T> fnet2d(const Matrix<T>& x) {
  const std::size_t L = x.rows(), H = x.cols();
  Matrix<std::complex<T>> z(L, H);
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i];
  const auto& row_plan = dsp::cached_plan<T>(H);
  for (std::size_t t = 0; t < L; ++t) row_plan.forward(z.row(t));
  const auto& col_plan = dsp::cached_plan<T>(L);
  std::vector<std::complex<T>, CountingAllocator<std::complex<T>>> col(L);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t t = 0; t < L; ++t) col[t] = z(t, h);
    col_plan.forward(col);
    for (std::size_t t = 0; t < L; ++t) z(t, h) = col[t];
  }
  Matrix<T> y(L, H);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = z[i].real();
  return y;
}

}  // namespace serial

// ===================================================================== omp

namespace omp {

template <typename T>
Matrix<T> ssd_scan(const Matrix<T>& x, const std::vector<T>& alpha, const Matrix<T>& B, const Matrix<T>& C) {
  check_scan_shapes(x, alpha, B, C);
  const std::size_t L = x.rows(), P = x.cols(), N = B.cols();
  Matrix<T> y(L, P);
  Matrix<T> states(P, N);  // one state vector per channel
  const auto np = static_cast<std::ptrdiff_t>(P);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < np; ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    auto h = states.row(p);
    for (std::size_t t = 0; t < L; ++t) {
      const T xt = x(t, p);
      for (std::size_t n = 0; n < N; ++n) h[n] = alpha[t] * h[n] + B(t, n) * xt;
      T acc = 0;
      for (std::size_t n = 0; n < N; ++n) acc += C(t, n) * h[n];
      y(t, p) = acc;
    }
  }
  return y;
}

template <typename T>
ScanGrads<T> ssd_scan_backward(const Matrix<T>& x, const std::vector<T>& alpha, const Matrix<T>& B,
                               const Matrix<T>& C, const Matrix<T>& dy) {
  check_scan_shapes(x, alpha, B, C);
  const std::size_t L = x.rows(), P = x.cols(), N = B.cols();
  if (!dy.same_shape(x)) throw ShapeError("ssd_scan_backward: dy shape");
  Matrix<T> Hs(L * N, P), Gs(L * N, P);
  ScanGrads<T> g;
  g.dx = Matrix<T>(L, P);
  const auto np = static_cast<std::ptrdiff_t>(P);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < np; ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t n = 0; n < N; ++n) {
        const T prev = t ? Hs((t - 1) * N + n, p) : T(0);
        Hs(t * N + n, p) = alpha[t] * prev + B(t, n) * x(t, p);
      }
    for (std::size_t tt = L; tt-- > 0;) {
      for (std::size_t n = 0; n < N; ++n) {
        const T carry = tt + 1 < L ? alpha[tt + 1] * Gs((tt + 1) * N + n, p) : T(0);
        Gs(tt * N + n, p) = carry + C(tt, n) * dy(tt, p);
      }
      T acc = 0;
      for (std::size_t n = 0; n < N; ++n) acc += Gs(tt * N + n, p) * B(tt, n);
      g.dx(tt, p) = acc;
    }
  }

  g.dB = Matrix<T>(L, N);
  g.dC = Matrix<T>(L, N);
  g.dalpha.assign(L, T(0));
  const auto nl = static_cast<std::ptrdiff_t>(L);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ti = 0; ti < nl; ++ti) {
    const auto t = static_cast<std::size_t>(ti);
    T da = 0;
    for (std::size_t n = 0; n < N; ++n) {
      T db = 0, dc = 0, dan = 0;
      for (std::size_t p = 0; p < P; ++p) {
        const T G = Gs(t * N + n, p);
        db += G * x(t, p);
        dc += Hs(t * N + n, p) * dy(t, p);
        if (t) dan += G * Hs((t - 1) * N + n, p);
      }
      g.dB(t, n) = db;
      g.dC(t, n) = dc;
      da += dan;
    }
    g.dalpha[t] = da;
  }
  return g;
}

template <typename T>
Matrix<T> attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, std::size_t heads, bool causal,
                    AttentionCache<T>* cache) {
  check_attention_shapes(q, k, v, heads);
  const std::size_t L = q.rows(), S = k.rows(), d = q.cols(), hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  Matrix<T> out(L, d);
  std::vector<Matrix<T>> probs(heads, Matrix<T>(L, S));
  const auto work = static_cast<std::ptrdiff_t>(heads * L);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t wi = 0; wi < work; ++wi) {
    const std::size_t h = static_cast<std::size_t>(wi) / L, i = static_cast<std::size_t>(wi) % L;
    const std::size_t off = h * hd;
    auto row = probs[h].row(i);
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < S; ++j) {
      if (causal && j > i) {
        row[j] = -std::numeric_limits<T>::infinity();
        continue;
      }
      T s = 0;
      for (std::size_t c = 0; c < hd; ++c) s += q(i, off + c) * k(j, off + c);
      row[j] = s * scale;
      mx = std::max(mx, row[j]);
    }
    T z = 0;
    for (std::size_t j = 0; j < S; ++j) {
      const T e = (causal && j > i) ? T(0) : std::exp(row[j] - mx);
      row[j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < S; ++j) row[j] /= z;
    for (std::size_t c = 0; c < hd; ++c) {
      T acc = 0;
      for (std::size_t j = 0; j < S; ++j) acc += row[j] * v(j, off + c);
      out(i, off + c) = acc;
    }
  }
  if (cache) cache->probs = std::move(probs);
  return out;
}

template <typename T>
AttentionGrads<T> attention_backward(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, std::size_t heads,
                                     const AttentionCache<T>& cache, const Matrix<T>& dout) {
  check_attention_shapes(q, k, v, heads);
  const std::size_t L = q.rows(), S = k.rows(), d = q.cols(), hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  AttentionGrads<T> g{Matrix<T>(L, d), Matrix<T>(S, d), Matrix<T>(S, d)};
  std::vector<Matrix<T>> dS(heads, Matrix<T>(L, S));
  const auto rows = static_cast<std::ptrdiff_t>(heads * L);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t wi = 0; wi < rows; ++wi) {
    const std::size_t h = static_cast<std::size_t>(wi) / L, i = static_cast<std::size_t>(wi) % L;
    const std::size_t off = h * hd;
    const auto& P = cache.probs.at(h);
    auto ds = dS[h].row(i);
    T rowdot = 0;
    for (std::size_t j = 0; j < S; ++j) {
      T dp = 0;
      for (std::size_t c = 0; c < hd; ++c) dp += dout(i, off + c) * v(j, off + c);
      ds[j] = dp;
      rowdot += dp * P(i, j);
    }
    for (std::size_t j = 0; j < S; ++j) ds[j] = P(i, j) * (ds[j] - rowdot) * scale;
    for (std::size_t c = 0; c < hd; ++c) {
      T acc = 0;
      for (std::size_t j = 0; j < S; ++j) acc += ds[j] * k(j, off + c);
      g.dq(i, off + c) = acc;
    }
  }
  const auto cols = static_cast<std::ptrdiff_t>(heads * S);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t wi = 0; wi < cols; ++wi) {
    const std::size_t h = static_cast<std::size_t>(wi) / S, j = static_cast<std::size_t>(wi) % S;
    const std::size_t off = h * hd;
    const auto& P = cache.probs.at(h);
    for (std::size_t c = 0; c < hd; ++c) {
      T dk = 0, dv = 0;
      for (std::size_t i = 0; i < L; ++i) {
        dk += dS[h](i, j) * q(i, off + c);
        dv += P(i, j) * dout(i, off + c);
      }
      g.dk(j, off + c) = dk;
      g.dv(j, off + c) = dv;
    }
  }
  return g;
}

template <typename T>
Matrix<T> fnet2d(const Matrix<T>& x) {
  const std::size_t L = x.rows(), H = x.cols();
  Matrix<std::complex<T>> z(L, H);
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i];
  const auto nl = static_cast<std::ptrdiff_t>(L);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < nl; ++t) dsp::cached_plan<T>(H).forward(z.row(static_cast<std::size_t>(t)));
  Matrix<std::complex<T>> zt(H, L);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t h = 0; h < H; ++h) zt(h, t) = z(t, h);
  const auto nh = static_cast<std::ptrdiff_t>(H);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t h = 0; h < nh; ++h) dsp::cached_plan<T>(L).forward(zt.row(static_cast<std::size_t>(h)));
  Matrix<T> y(L, H);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t h = 0; h < H; ++h) y(t, h) = zt(h, t).real();
  return y;
}

}  // namespace omp

#define MXTTS_INSTANTIATE(NS, T)                                                                              \
  template Matrix<T> NS::ssd_scan<T>(const Matrix<T>&, const std::vector<T>&, const Matrix<T>&, const Matrix<T>&); \
  template ScanGrads<T> NS::ssd_scan_backward<T>(const Matrix<T>&, const std::vector<T>&, const Matrix<T>&,       \
                                                 const Matrix<T>&, const Matrix<T>&);                             \
  template Matrix<T> NS::attention<T>(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&, std::size_t, bool,    \
                                      AttentionCache<T>*);                                                        \
  template AttentionGrads<T> NS::attention_backward<T>(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&,      \
                                                       std::size_t, const AttentionCache<T>&, const Matrix<T>&);  \
  template Matrix<T> NS::fnet2d<T>(const Matrix<T>&);

MXTTS_INSTANTIATE(serial, float)
MXTTS_INSTANTIATE(serial, double)
MXTTS_INSTANTIATE(omp, float)
MXTTS_INSTANTIATE(omp, double)

#undef MXTTS_INSTANTIATE

}  // namespace mxtts::seqmix::kernels
