#include "mxtts/model/params.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace mxtts::model {

template <typename T>
ad::Var<T> ParamStore<T>::add(const std::string& name, std::size_t rows, std::size_t cols, Init init) {
  if (find(name)) throw std::logic_error("duplicate parameter name " + name);
  Entry e{name, rows, cols, {}};
  if (!shape_only_) {
    Matrix<T> m(rows, cols);
    switch (init.kind) {
      case Init::Kind::kFanIn: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(rows, 1)));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& v : m.flat()) v = static_cast<T>(u(rng_));
        break;
      }
      case Init::Kind::kNormal: {
        std::normal_distribution<double> n(0.0, init.value);
        for (auto& v : m.flat()) v = static_cast<T>(n(rng_));
        break;
      }
      case Init::Kind::kConstant:
        m.fill(static_cast<T>(init.value));
        break;
    }
    e.var = ad::parameter(std::move(m));
  }
  entries_.push_back(std::move(e));
  return entries_.back().var;
}

template <typename T>
const typename ParamStore<T>::Entry* ParamStore<T>::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

template <typename T>
std::size_t ParamStore<T>::count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.rows * e.cols;
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_)
    if (e.var.defined()) e.var.grad_buffer().fill(T(0));
}

template <typename T>
std::uint64_t ParamStore<T>::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& e : entries_) {
    if (!e.var.defined()) continue;
    const auto* bytes = reinterpret_cast<const unsigned char*>(e.var.value().data());
    for (std::size_t i = 0; i < e.var.value().size() * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace mxtts::model
