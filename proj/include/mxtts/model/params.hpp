#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mxtts/autograd.hpp"

namespace mxtts::model {

struct Init {
  enum class Kind { kFanIn, kNormal, kConstant } kind = Kind::kFanIn;
  double value = 0.0;  // std for kNormal, fill for kConstant

  static Init fan_in() { return {}; }
  static Init normal(double std) { return {Kind::kNormal, std}; }
  static Init constant(double v) { return {Kind::kConstant, v}; }
};

// Ordered, named set of trainable matrices. In shape-only mode nothing is
// allocated; only names and shapes are recorded (used for counting at full
// scale).
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::size_t rows = 0, cols = 0;
    ad::Var<T> var;
  };

  explicit ParamStore(std::uint64_t seed = 0, bool shape_only = false) : rng_(seed), shape_only_(shape_only) {}

  // kFanIn draws U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = rows.
  ad::Var<T> add(const std::string& name, std::size_t rows, std::size_t cols, Init init = Init::fan_in());

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }
  const Entry* find(const std::string& name) const;
  std::size_t count() const noexcept;
  bool shape_only() const noexcept { return shape_only_; }
  void zero_grad();
  // Order-sensitive FNV-1a over the raw bytes of every parameter.
  std::uint64_t checksum() const;

 private:
  std::mt19937_64 rng_;
  bool shape_only_;
  std::vector<Entry> entries_;
};

}  // namespace mxtts::model
