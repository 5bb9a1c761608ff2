#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "mxtts/tensor.hpp"

// Tape-based reverse-mode differentiation over row-major matrices.
//
// Operations record a backward closure only while a Tape<T> is active on
// the current thread and at least one input requires a gradient; without a
// tape every op is a plain forward computation and intermediates are freed
// as soon as their Var goes out of scope.
namespace mxtts::ad {

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  bool requires_grad = false;
  std::function<void()> backward;

  Matrix<T>& grad_buffer() {
    if (!grad.same_shape(value)) grad = Matrix<T>(value.rows(), value.cols());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  const Matrix<T>& value() const { return node_->value; }
  Matrix<T>& mutable_value() { return node_->value; }
  const Matrix<T>& grad() const { return node_->grad; }
  Matrix<T>& grad_buffer() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  T item() const { return node_->value[0]; }
  bool defined() const { return static_cast<bool>(node_); }
  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();
  void record(std::shared_ptr<Node<T>> n) { nodes_.push_back(std::move(n)); }
  // Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  void backward(const Var<T>& loss);
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  std::vector<std::shared_ptr<Node<T>>> nodes_;
  Tape* previous_ = nullptr;
};

template <typename T>
Var<T> constant(Matrix<T> value);
// Leaf that accumulates gradients across backward passes.
template <typename T>
Var<T> parameter(Matrix<T> value);
template <typename T>
Var<T> scalar(T v) {
  return constant(Matrix<T>(1, 1, v));
}

// ---- linear algebra / elementwise
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// x · W + b, b a 1×out row (may be undefined).
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> add_scalar(const Var<T>& a, T s);
// a + row, row being 1×cols, broadcast over rows.
template <typename T> Var<T> add_row(const Var<T>& a, const Var<T>& row);
// a ⊙ row, row being 1×cols, broadcast over rows.
template <typename T> Var<T> mul_row(const Var<T>& a, const Var<T>& row);
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> silu(const Var<T>& a);
template <typename T> Var<T> sigmoid(const Var<T>& a);
template <typename T> Var<T> softplus(const Var<T>& a);
template <typename T> Var<T> exp(const Var<T>& a);
template <typename T> Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5));
template <typename T> Var<T> detach(const Var<T>& a);

// ---- structure
template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
template <typename T> Var<T> slice_rows(const Var<T>& x, std::size_t start, std::size_t count);
template <typename T> Var<T> slice_cols(const Var<T>& x, std::size_t start, std::size_t count);
// out.row(i) = x.row(index[i]); gradients scatter-add back.
template <typename T> Var<T> gather_rows(const Var<T>& x, const std::vector<std::size_t>& index);
template <typename T> Var<T> flip_rows(const Var<T>& x);
// Moves every row one step later in time, inserting a zero first row and
// dropping the last.
template <typename T> Var<T> shift_rows(const Var<T>& x);
// Row t becomes [x_{t-k/2}, …, x_{t+k/2}] (zero padded), for a same-length
// convolution of odd kernel width k as unfold_time(x, k) · W.
template <typename T> Var<T> unfold_time(const Var<T>& x, std::size_t kernel);
template <typename T> Var<T> dropout(const Var<T>& x, T p, std::mt19937_64& rng);

// ---- sequence mixers
// alpha: L×1 column.
template <typename T> Var<T> ssd_scan(const Var<T>& x, const Var<T>& alpha, const Var<T>& B, const Var<T>& C);
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, std::size_t heads, bool causal);
template <typename T> Var<T> fnet(const Var<T>& x);

// ---- reductions (1×1 results)
template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x);
template <typename T> Var<T> mse(const Var<T>& a, const Var<T>& b);

}  // namespace mxtts::ad
