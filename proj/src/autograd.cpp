#include "mxtts/autograd.hpp"

#include <cmath>

#include "mxtts/seqmix/kernels.hpp"

namespace mxtts::ad {

namespace {

template <typename T>
thread_local Tape<T>* g_active_tape = nullptr;

template <typename T>
bool tracking(std::initializer_list<const Var<T>*> inputs) {
  if (!g_active_tape<T>) return false;
  for (const auto* v : inputs)
    if (v->defined() && v->requires_grad()) return true;
  return false;
}

template <typename T>
bool tracking(const std::vector<Var<T>>& inputs) {
  if (!g_active_tape<T>) return false;
  for (const auto& v : inputs)
    if (v.requires_grad()) return true;
  return false;
}

// Wraps `value` in a node; when `track` is set, `bw(grad_of_result)` is
// recorded on the active tape.
template <typename T, typename F>
Var<T> make(Matrix<T> value, bool track, F&& bw) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  if (track) {
    n->requires_grad = true;
    Node<T>* self = n.get();
    n->backward = [self, fn = std::forward<F>(bw)]() {
      if (self->grad.empty() && !self->value.empty()) return;
      fn(self->grad);
    };
    g_active_tape<T>->record(n);
  }
  return Var<T>(std::move(n));
}

template <typename T>
void accumulate(const Var<T>& v, const Matrix<T>& g) {
  if (!v.requires_grad()) return;
  auto& G = v.node()->grad_buffer();
  for (std::size_t i = 0; i < G.size(); ++i) G[i] += g[i];
}

template <typename T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " + shape_str(b.value()));
}

template <typename T, typename F>
Var<T> unary(const Var<T>& a, F&& f, auto&& dfdx) {
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.value()[i]);
  const bool tr = tracking<T>({&a});
  return make(std::move(out), tr, [a, dfdx](const Matrix<T>& g) {
    if (!a.requires_grad()) return;
    auto& G = a.node()->grad_buffer();
    for (std::size_t i = 0; i < G.size(); ++i) G[i] += g[i] * dfdx(a.value()[i]);
  });
}

template <typename T>
T sigmoid_scalar(T x) {
  return x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

}  // namespace

// ------------------------------------------------------------------ tape

template <typename T>
Tape<T>::Tape() : previous_(g_active_tape<T>) {
  g_active_tape<T> = this;
}

template <typename T>
Tape<T>::~Tape() {
  g_active_tape<T> = previous_;
}

template <typename T>
Tape<T>* Tape<T>::active() {
  return g_active_tape<T>;
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (loss.value().size() != 1) throw ShapeError("backward: loss must be 1x1");
  if (!loss.requires_grad()) return;
  loss.node()->grad_buffer()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if ((*it)->backward) (*it)->backward();
  nodes_.clear();
}

template <typename T>
Var<T> constant(Matrix<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return Var<T>(std::move(n));
}

template <typename T>
Var<T> parameter(Matrix<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var<T>(std::move(n));
}

// ------------------------------------------------------------------ linear algebra

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Matrix<T> out;
  gemm(a.value(), false, b.value(), false, out);
  return make(std::move(out), tracking<T>({&a, &b}), [a, b](const Matrix<T>& g) {
    if (a.requires_grad()) gemm(g, false, b.value(), true, a.node()->grad_buffer(), true);
    if (b.requires_grad()) gemm(a.value(), true, g, false, b.node()->grad_buffer(), true);
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  Matrix<T> out;
  gemm(x.value(), false, w.value(), false, out);
  if (b.defined()) {
    if (b.rows() != 1 || b.cols() != out.cols()) throw ShapeError("linear: bias shape " + shape_str(b.value()));
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += b.value()[c];
  }
  return make(std::move(out), tracking<T>({&x, &w, &b}), [x, w, b](const Matrix<T>& g) {
    if (x.requires_grad()) gemm(g, false, w.value(), true, x.node()->grad_buffer(), true);
    if (w.requires_grad()) gemm(x.value(), true, g, false, w.node()->grad_buffer(), true);
    if (b.defined() && b.requires_grad()) {
      auto& G = b.node()->grad_buffer();
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) G[c] += g(r, c);
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "add");
  Matrix<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make(std::move(out), tracking<T>({&a, &b}), [a, b](const Matrix<T>& g) {
    accumulate(a, g);
    accumulate(b, g);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "sub");
  Matrix<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make(std::move(out), tracking<T>({&a, &b}), [a, b](const Matrix<T>& g) {
    accumulate(a, g);
    if (b.requires_grad()) {
      auto& G = b.node()->grad_buffer();
      for (std::size_t i = 0; i < G.size(); ++i) G[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "mul");
  Matrix<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make(std::move(out), tracking<T>({&a, &b}), [a, b](const Matrix<T>& g) {
    if (a.requires_grad()) {
      auto& G = a.node()->grad_buffer();
      for (std::size_t i = 0; i < G.size(); ++i) G[i] += g[i] * b.value()[i];
    }
    if (b.requires_grad()) {
      auto& G = b.node()->grad_buffer();
      for (std::size_t i = 0; i < G.size(); ++i) G[i] += g[i] * a.value()[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Matrix<T> out = a.value();
  for (auto& v : out.flat()) v *= s;
  return make(std::move(out), tracking<T>({&a}), [a, s](const Matrix<T>& g) {
    if (!a.requires_grad()) return;
    auto& G = a.node()->grad_buffer();
    for (std::size_t i = 0; i < G.size(); ++i) G[i] += g[i] * s;
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Matrix<T> out = a.value();
  for (auto& v : out.flat()) v += s;
  return make(std::move(out), tracking<T>({&a}), [a](const Matrix<T>& g) { accumulate(a, g); });
}

template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: row shape " + shape_str(row.value()));
  Matrix<T> out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += row.value()[c];
  return make(std::move(out), tracking<T>({&a, &row}), [a, row](const Matrix<T>& g) {
    accumulate(a, g);
    if (row.requires_grad()) {
      auto& G = row.node()->grad_buffer();
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) G[c] += g(r, c);
    }
  });
}

template <typename T>
Var<T> mul_row(const Var<T>& a, const Var<T>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("mul_row: row shape " + shape_str(row.value()));
  Matrix<T> out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= row.value()[c];
  return make(std::move(out), tracking<T>({&a, &row}), [a, row](const Matrix<T>& g) {
    if (a.requires_grad()) {
      auto& G = a.node()->grad_buffer();
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) G(r, c) += g(r, c) * row.value()[c];
    }
    if (row.requires_grad()) {
      auto& G = row.node()->grad_buffer();
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) G[c] += g(r, c) * a.value()(r, c);
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return unary(a, [](T x) { return x > T(0) ? x : T(0); }, [](T x) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> silu(const Var<T>& a) {
  return unary(
      a, [](T x) { return x * sigmoid_scalar(x); },
      [](T x) {
        const T s = sigmoid_scalar(x);
        return s * (T(1) + x * (T(1) - s));
      });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary(a, [](T x) { return sigmoid_scalar(x); },
               [](T x) {
                 const T s = sigmoid_scalar(x);
                 return s * (T(1) - s);
               });
}

template <typename T>
Var<T> softplus(const Var<T>& a) {
  return unary(
      a, [](T x) { return x > T(20) ? x : std::log1p(std::exp(x)); }, [](T x) { return sigmoid_scalar(x); });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  return unary(a, [](T x) { return std::exp(x); }, [](T x) { return std::exp(x); });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  const std::size_t R = x.rows(), C = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != C || beta.rows() != 1 || beta.cols() != C)
    throw ShapeError("layer_norm: affine parameter shape");
  Matrix<T> xhat(R, C), out(R, C);
  std::vector<T> inv(R);
  for (std::size_t r = 0; r < R; ++r) {
    T mu = 0;
    for (std::size_t c = 0; c < C; ++c) mu += x.value()(r, c);
    mu /= static_cast<T>(C);
    T var = 0;
    for (std::size_t c = 0; c < C; ++c) {
      const T d = x.value()(r, c) - mu;
      var += d * d;
    }
    var /= static_cast<T>(C);
    inv[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < C; ++c) {
      xhat(r, c) = (x.value()(r, c) - mu) * inv[r];
      out(r, c) = xhat(r, c) * gamma.value()[c] + beta.value()[c];
    }
  }
  const bool tr = tracking<T>({&x, &gamma, &beta});
  return make(std::move(out), tr, [x, gamma, beta, xhat = std::move(xhat), inv = std::move(inv)](const Matrix<T>& g) {
    const std::size_t R = g.rows(), C = g.cols();
    if (gamma.requires_grad() || beta.requires_grad()) {
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          if (gamma.requires_grad()) gamma.node()->grad_buffer()[c] += g(r, c) * xhat(r, c);
          if (beta.requires_grad()) beta.node()->grad_buffer()[c] += g(r, c);
        }
    }
    if (!x.requires_grad()) return;
    auto& G = x.node()->grad_buffer();
    for (std::size_t r = 0; r < R; ++r) {
      T s1 = 0, s2 = 0;
      for (std::size_t c = 0; c < C; ++c) {
        const T dxh = g(r, c) * gamma.value()[c];
        s1 += dxh;
        s2 += dxh * xhat(r, c);
      }
      const T n = static_cast<T>(C);
      for (std::size_t c = 0; c < C; ++c) {
        const T dxh = g(r, c) * gamma.value()[c];
        G(r, c) += inv[r] / n * (n * dxh - s1 - xhat(r, c) * s2);
      }
    }
  });
}

template <typename T>
Var<T> detach(const Var<T>& a) {
  return constant(a.value());
}

// ------------------------------------------------------------------ structure

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t R = parts[0].rows();
  std::size_t C = 0;
  for (const auto& p : parts) {
    if (p.rows() != R) throw ShapeError("concat_cols: row count mismatch");
    C += p.cols();
  }
  Matrix<T> out(R, C);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, off + c) = p.value()(r, c);
    off += p.cols();
  }
  return make(std::move(out), tracking<T>(parts), [parts](const Matrix<T>& g) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      if (p.requires_grad()) {
        auto& G = p.node()->grad_buffer();
        for (std::size_t r = 0; r < G.rows(); ++r)
          for (std::size_t c = 0; c < G.cols(); ++c) G(r, c) += g(r, off + c);
      }
      off += p.cols();
    }
  });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t C = parts[0].cols();
  std::size_t R = 0;
  for (const auto& p : parts) {
    if (p.cols() != C && p.rows() != 0) throw ShapeError("concat_rows: column count mismatch");
    R += p.rows();
  }
  Matrix<T> out(R, C);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off * C);
    off += p.rows();
  }
  return make(std::move(out), tracking<T>(parts), [parts](const Matrix<T>& g) {
    std::size_t off = 0;
    const std::size_t C = g.cols();
    for (const auto& p : parts) {
      if (p.requires_grad()) {
        auto& G = p.node()->grad_buffer();
        for (std::size_t i = 0; i < G.size(); ++i) G[i] += g[off * C + i];
      }
      off += p.rows();
    }
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& x, std::size_t start, std::size_t count) {
  if (start + count > x.rows()) throw ShapeError("slice_rows: out of range");
  const std::size_t C = x.cols();
  Matrix<T> out(count, C);
  std::copy(x.value().data() + start * C, x.value().data() + (start + count) * C, out.data());
  return make(std::move(out), tracking<T>({&x}), [x, start](const Matrix<T>& g) {
    if (!x.requires_grad()) return;
    auto& G = x.node()->grad_buffer();
    const std::size_t C = g.cols();
    for (std::size_t i = 0; i < g.size(); ++i) G[start * C + i] += g[i];
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& x, std::size_t start, std::size_t count) {
  if (start + count > x.cols()) throw ShapeError("slice_cols: out of range");
  Matrix<T> out(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = x.value()(r, start + c);
  return make(std::move(out), tracking<T>({&x}), [x, start](const Matrix<T>& g) {
    if (!x.requires_grad()) return;
    auto& G = x.node()->grad_buffer();
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) G(r, start + c) += g(r, c);
  });
}

template <typename T>
Var<T> gather_rows(const Var<T>& x, const std::vector<std::size_t>& index) {
  const std::size_t C = x.cols();
  Matrix<T> out(index.size(), C);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy_n(x.value().data() + index[i] * C, C, out.data() + i * C);
  }
  return make(std::move(out), tracking<T>({&x}), [x, index](const Matrix<T>& g) {
    if (!x.requires_grad()) return;
    auto& G = x.node()->grad_buffer();
    const std::size_t C = g.cols();
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t c = 0; c < C; ++c) G(index[i], c) += g(i, c);
  });
}

template <typename T>
Var<T> flip_rows(const Var<T>& x) {
  const std::size_t R = x.rows(), C = x.cols();
  Matrix<T> out(R, C);
  for (std::size_t r = 0; r < R; ++r) std::copy_n(x.value().data() + (R - 1 - r) * C, C, out.data() + r * C);
  return make(std::move(out), tracking<T>({&x}), [x](const Matrix<T>& g) {
    if (!x.requires_grad()) return;
    auto& G = x.node()->grad_buffer();
    const std::size_t R = g.rows(), C = g.cols();
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) G(R - 1 - r, c) += g(r, c);
  });
}

template <typename T>
Var<T> shift_rows(const Var<T>& x) {
  const std::size_t R = x.rows(), C = x.cols();
  Matrix<T> out(R, C);
  if (R > 1) std::copy_n(x.value().data(), (R - 1) * C, out.data() + C);
  return make(std::move(out), tracking<T>({&x}), [x](const Matrix<T>& g) {
    if (!x.requires_grad()) return;
    auto& G = x.node()->grad_buffer();
    const std::size_t R = g.rows(), C = g.cols();
    for (std::size_t r = 0; r + 1 < R; ++r)
      for (std::size_t c = 0; c < C; ++c) G(r, c) += g(r + 1, c);
  });
}

template <typename T>
Var<T> unfold_time(const Var<T>& x, std::size_t kernel) {
  if (kernel % 2 == 0) throw ShapeError("unfold_time: kernel width must be odd");
  const std::size_t R = x.rows(), C = x.cols();
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  Matrix<T> out(R, kernel * C);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t k = 0; k < kernel; ++k) {
      const auto src = static_cast<std::ptrdiff_t>(r) + static_cast<std::ptrdiff_t>(k) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(R)) continue;
      std::copy_n(x.value().data() + static_cast<std::size_t>(src) * C, C, out.data() + r * kernel * C + k * C);
    }
  return make(std::move(out), tracking<T>({&x}), [x, kernel, half](const Matrix<T>& g) {
    if (!x.requires_grad()) return;
    auto& G = x.node()->grad_buffer();
    const std::size_t R = G.rows(), C = G.cols();
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t k = 0; k < kernel; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(r) + static_cast<std::ptrdiff_t>(k) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(R)) continue;
        for (std::size_t c = 0; c < C; ++c) G(static_cast<std::size_t>(src), c) += g(r, k * C + c);
      }
  });
}

template <typename T>
Var<T> dropout(const Var<T>& x, T p, std::mt19937_64& rng) {
  if (p <= T(0)) return x;
  Matrix<T> mask(x.rows(), x.cols());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const T keep = T(1) / (T(1) - p);
  for (auto& m : mask.flat()) m = u(rng) >= static_cast<double>(p) ? keep : T(0);
  Matrix<T> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make(std::move(out), tracking<T>({&x}), [x, mask = std::move(mask)](const Matrix<T>& g) {
    if (!x.requires_grad()) return;
    auto& G = x.node()->grad_buffer();
    for (std::size_t i = 0; i < G.size(); ++i) G[i] += g[i] * mask[i];
  });
}

// ------------------------------------------------------------------ sequence mixers

template <typename T>
Var<T> ssd_scan(const Var<T>& x, const Var<T>& alpha, const Var<T>& B, const Var<T>& C) {
  if (alpha.cols() != 1) throw ShapeError("ssd_scan: alpha must be an L×1 column");
  std::vector<T> a(alpha.value().data(), alpha.value().data() + alpha.rows());
  Matrix<T> y = seqmix::kernels::ssd_scan(x.value(), a, B.value(), C.value());
  return make(std::move(y), tracking<T>({&x, &alpha, &B, &C}), [x, alpha, B, C, a](const Matrix<T>& g) {
    auto grads = seqmix::kernels::ssd_scan_backward(x.value(), a, B.value(), C.value(), g);
    accumulate(x, grads.dx);
    accumulate(B, grads.dB);
    accumulate(C, grads.dC);
    if (alpha.requires_grad()) {
      auto& G = alpha.node()->grad_buffer();
      for (std::size_t t = 0; t < grads.dalpha.size(); ++t) G[t] += grads.dalpha[t];
    }
  });
}

template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, std::size_t heads, bool causal) {
  const bool tr = tracking<T>({&q, &k, &v});
  auto cache = std::make_shared<seqmix::kernels::AttentionCache<T>>();
  Matrix<T> out = seqmix::kernels::attention(q.value(), k.value(), v.value(), heads, causal, tr ? cache.get() : nullptr);
  return make(std::move(out), tr, [q, k, v, heads, cache](const Matrix<T>& g) {
    auto grads = seqmix::kernels::attention_backward(q.value(), k.value(), v.value(), heads, *cache, g);
    accumulate(q, grads.dq);
    accumulate(k, grads.dk);
    accumulate(v, grads.dv);
  });
}

template <typename T>
Var<T> fnet(const Var<T>& x) {
  // Re(F_seq · X · F_hidden) is self-adjoint: both DFT matrices are symmetric.
  return make(seqmix::kernels::fnet2d(x.value()), tracking<T>({&x}), [x](const Matrix<T>& g) {
    if (x.requires_grad()) accumulate(x, seqmix::kernels::fnet2d(g));
  });
}

// ------------------------------------------------------------------ reductions

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = 0;
  for (T v : x.value().flat()) s += v;
  return make(Matrix<T>(1, 1, s), tracking<T>({&x}), [x](const Matrix<T>& g) {
    if (!x.requires_grad()) return;
    auto& G = x.node()->grad_buffer();
    for (auto& v : G.flat()) v += g[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  if (x.value().empty()) throw ShapeError("mean: empty input");
  return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  auto d = sub(a, b);
  return mean(mul(d, d));
}

// ------------------------------------------------------------------ instantiation

#define MXTTS_AD_INSTANTIATE(T)                                                              \
  template class Tape<T>;                                                                    \
  template Var<T> constant<T>(Matrix<T>);                                                    \
  template Var<T> parameter<T>(Matrix<T>);                                                   \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                   \
  template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);                    \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> scale<T>(const Var<T>&, T);                                                \
  template Var<T> add_scalar<T>(const Var<T>&, T);                                           \
  template Var<T> add_row<T>(const Var<T>&, const Var<T>&);                                  \
  template Var<T> mul_row<T>(const Var<T>&, const Var<T>&);                                  \
  template Var<T> relu<T>(const Var<T>&);                                                    \
  template Var<T> silu<T>(const Var<T>&);                                                    \
  template Var<T> sigmoid<T>(const Var<T>&);                                                 \
  template Var<T> softplus<T>(const Var<T>&);                                                \
  template Var<T> exp<T>(const Var<T>&);                                                     \
  template Var<T> layer_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, T);             \
  template Var<T> detach<T>(const Var<T>&);                                                  \
  template Var<T> concat_cols<T>(const std::vector<Var<T>>&);                                \
  template Var<T> concat_rows<T>(const std::vector<Var<T>>&);                                \
  template Var<T> slice_rows<T>(const Var<T>&, std::size_t, std::size_t);                    \
  template Var<T> slice_cols<T>(const Var<T>&, std::size_t, std::size_t);                    \
  template Var<T> gather_rows<T>(const Var<T>&, const std::vector<std::size_t>&);            \
  template Var<T> flip_rows<T>(const Var<T>&);                                               \
  template Var<T> shift_rows<T>(const Var<T>&);                                              \
  template Var<T> unfold_time<T>(const Var<T>&, std::size_t);                                \
  template Var<T> dropout<T>(const Var<T>&, T, std::mt19937_64&);                            \
  template Var<T> ssd_scan<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&);   \
  template Var<T> attention<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t, bool); \
  template Var<T> fnet<T>(const Var<T>&);                                                    \
  template Var<T> sum<T>(const Var<T>&);                                                     \
  template Var<T> mean<T>(const Var<T>&);                                                    \
  template Var<T> mse<T>(const Var<T>&, const Var<T>&);

MXTTS_AD_INSTANTIATE(float)
MXTTS_AD_INSTANTIATE(double)

#undef MXTTS_AD_INSTANTIATE

}  // namespace mxtts::ad
