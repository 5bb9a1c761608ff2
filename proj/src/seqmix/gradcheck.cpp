#include "mxtts/seqmix/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace mxtts::seqmix {

namespace {

double projected(const ad::Var<double>& y, const Matrix<double>& R) {
  double s = 0;
  for (std::size_t i = 0; i < R.size(); ++i) s += y.value()[i] * R[i];
  return s;
}

}  // namespace

GradCheckReport backward_check(const LayerFn& forward, const std::vector<Matrix<double>>& inputs,
                               const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;

  std::vector<ad::Var<double>> leaves;
  for (const auto& m : inputs) leaves.push_back(ad::parameter(m));

  Matrix<double> R;
  std::vector<Matrix<double>> analytic;
  {
    ad::Tape<double> tape;
    auto y = forward(leaves);
    R = Matrix<double>(y.rows(), y.cols());
    for (auto& v : R.flat()) v = normal(rng);
    auto loss = ad::sum(ad::mul(y, ad::constant(R)));
    tape.backward(loss);
    for (auto& l : leaves) {
      if (l.grad().same_shape(l.value()))
        analytic.push_back(l.grad());
      else
        analytic.emplace_back(l.rows(), l.cols());
    }
  }

  struct Probe {
    std::size_t input, entry;
    double a, n;
  };
  std::vector<Probe> probes;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<std::size_t> entries(inputs[k].size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries_per_input > 0 && entries.size() > options.max_entries_per_input) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_input);
    }
    for (std::size_t e : entries) {
      double& slot = leaves[k].mutable_value()[e];
      const double orig = slot;
      slot = orig + options.step;
      const double up = projected(forward(leaves), R);
      slot = orig - options.step;
      const double down = projected(forward(leaves), R);
      slot = orig;
      probes.push_back({k, e, analytic[k][e], (up - down) / (2 * options.step)});
    }
  }

  GradCheckReport report;
  report.checked = probes.size();
  double scale = 0;
  for (const auto& p : probes) scale = std::max(scale, std::abs(p.n));
  const double floor = std::max(1e-3 * scale, 1e-300);
  for (const auto& p : probes) {
    const double err = std::abs(p.a - p.n) / std::max({std::abs(p.a), std::abs(p.n), floor});
    if (err > report.max_rel_error || report.worst.empty()) {
      report.max_rel_error = std::max(report.max_rel_error, err);
      std::ostringstream os;
      os << "input[" << p.input << "] entry " << p.entry << ": analytic " << p.a << ", numeric " << p.n;
      if (err >= report.max_rel_error) report.worst = os.str();
    }
  }
  return report;
}

}  // namespace mxtts::seqmix
