#include "mxtts/model/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace mxtts::model {

void Adam::step(ParamStore<float>& params, double lr, const OptimConfig& cfg) {
  auto& entries = params.entries();
  if (m.size() != entries.size()) {
    m.clear();
    v.clear();
    for (const auto& e : entries) {
      m.emplace_back(e.rows, e.cols);
      v.emplace_back(e.rows, e.cols);
    }
  }
  ++t;
  double scale = 1.0;
  if (cfg.grad_clip > 0) {
    double sq = 0;
    for (auto& e : entries)
      for (float g : e.var.grad_buffer().flat()) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip) scale = cfg.grad_clip / norm;
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const auto b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
  const auto step_size = static_cast<float>(lr / bc1);
  const auto inv_bc2 = static_cast<float>(1.0 / bc2);
  const auto eps = static_cast<float>(cfg.eps);
  const auto gscale = static_cast<float>(scale);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto& p = entries[k].var.mutable_value();
    const auto& g = entries[k].var.grad_buffer();
    auto& mk = m[k];
    auto& vk = v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const float gi = g[i] * gscale;
      mk[i] = b1 * mk[i] + (1.0f - b1) * gi;
      vk[i] = b2 * vk[i] + (1.0f - b2) * gi * gi;
      p[i] -= step_size * mk[i] / (std::sqrt(vk[i] * inv_bc2) + eps);
    }
  }
}

TrainState::TrainState(const ModelConfig& cfg, std::uint64_t seed_) : model(cfg, seed_), seed(seed_), rng(seed_ ^ 0x9e3779b97f4a7c15ull) {}

std::size_t batches_per_epoch(std::size_t n_items, std::size_t batch_size) {
  return (n_items + batch_size - 1) / batch_size;
}

double scheduled_lr(const OptimConfig& cfg, std::uint64_t step, std::size_t steps_per_epoch) {
  if (!cfg.cosine) return cfg.lr;
  const double total = static_cast<double>(std::max<std::size_t>(1, cfg.total_epochs * steps_per_epoch));
  const double progress = std::min(1.0, static_cast<double>(step) / total);
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

EpochStats train_epoch(TrainState& state, const std::vector<TrainItem>& data, const OptimConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  if (cfg.batch_size == 0) throw std::invalid_argument("train_epoch: batch_size must be positive");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), state.rng);

  auto& params = state.model.params();
  const std::size_t spe = batches_per_epoch(data.size(), cfg.batch_size);
  EpochStats stats;
  for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
    const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
    const auto inv = 1.0f / static_cast<float>(b1 - b0);
    params.zero_grad();
    for (std::size_t k = b0; k < b1; ++k) {
      const TrainItem& item = data[order[k]];
      ad::Tape<float> tape;
      auto parts = state.model.loss(item.tokens, item.frames, state.rng, true);
      const double total = parts.total.item();
      if (!std::isfinite(total)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << state.epoch + 1 << " step " << state.step << " item " << item.id
           << " (cfm " << parts.cfm << ", duration " << parts.duration << ", prior " << parts.prior << ")";
        throw NonFiniteLoss(os.str());
      }
      tape.backward(ad::scale(parts.total, inv));
      stats.total += total;
      stats.cfm += parts.cfm;
      stats.duration += parts.duration;
      stats.prior += parts.prior;
    }
    const double lr = scheduled_lr(cfg, state.step, spe);
    state.adam.step(params, lr, cfg);
    ++state.step;
    ++stats.steps;
    stats.lr_last = lr;
    for (const auto& e : params.entries())
      for (float v : e.var.value().flat())
        if (!std::isfinite(v)) throw NonFiniteLoss("parameter " + e.name + " became non-finite at step " + std::to_string(state.step));
  }
  const auto n = static_cast<double>(data.size());
  stats.total /= n;
  stats.cfm /= n;
  stats.duration /= n;
  stats.prior /= n;
  ++state.epoch;
  return stats;
}

MelStats compute_mel_stats(const std::vector<Matrix<float>>& frames) {
  if (frames.empty()) throw std::invalid_argument("compute_mel_stats: no data");
  const std::size_t C = frames[0].cols();
  std::vector<double> sum(C, 0.0), sq(C, 0.0);
  double n = 0;
  for (const auto& f : frames) {
    if (f.cols() != C) throw ShapeError("compute_mel_stats: width mismatch");
    for (std::size_t r = 0; r < f.rows(); ++r)
      for (std::size_t c = 0; c < C; ++c) {
        sum[c] += f(r, c);
        sq[c] += static_cast<double>(f(r, c)) * f(r, c);
      }
    n += static_cast<double>(f.rows());
  }
  MelStats s;
  s.mean.resize(C);
  s.std.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    s.mean[c] = sum[c] / n;
    s.std[c] = std::max(1e-3, std::sqrt(std::max(0.0, sq[c] / n - s.mean[c] * s.mean[c])));
  }
  return s;
}

seqmix::GradCheckReport loss_gradient_check(AcousticModel<double>& model, const text::TokenSequence& tokens,
                                            const Matrix<double>& frames, std::size_t n_entries,
                                            std::uint64_t seed, double step) {
  auto loss_at = [&]() {
    std::mt19937_64 noise(seed);
    return model.loss(tokens, frames, noise, false);
  };
  auto& entries = model.params().entries();
  for (auto& e : entries) e.var.grad_buffer().fill(0.0);
  {
    ad::Tape<double> tape;
    auto parts = loss_at();
    tape.backward(parts.total);
  }
  const auto reference = loss_at().durations;

  std::mt19937_64 pick(seed + 1);
  const std::size_t total = model.params().count();
  struct Probe {
    std::size_t entry, index;
    double a, n;
  };
  std::vector<Probe> probes;
  while (probes.size() < n_entries) {
    std::size_t flat = std::uniform_int_distribution<std::size_t>(0, total - 1)(pick);
    std::size_t k = 0;
    while (flat >= entries[k].var.value().size()) flat -= entries[k++].var.value().size();
    double& slot = entries[k].var.mutable_value()[flat];
    const double orig = slot;
    slot = orig + step;
    const auto up = loss_at();
    slot = orig - step;
    const auto down = loss_at();
    slot = orig;
    // A perturbation that changes the discrete alignment has no derivative.
    if (up.durations != reference || down.durations != reference) continue;
    // The duration predictor reads a detached copy of the encoder context,
    // so the duration term moves only with the predictor's own weights.
    const bool predictor = entries[k].name.rfind("duration.", 0) == 0;
    const double up_l = predictor ? up.total.item() : up.cfm + up.prior;
    const double down_l = predictor ? down.total.item() : down.cfm + down.prior;
    probes.push_back({k, flat, entries[k].var.grad()[flat], (up_l - down_l) / (2 * step)});
  }

  seqmix::GradCheckReport report;
  report.checked = probes.size();
  double scale = 0;
  for (const auto& p : probes) scale = std::max(scale, std::abs(p.n));
  const double floor = std::max(1e-3 * scale, 1e-300);
  for (const auto& p : probes) {
    const double err = std::abs(p.a - p.n) / std::max({std::abs(p.a), std::abs(p.n), floor});
    if (err >= report.max_rel_error) {
      report.max_rel_error = err;
      std::ostringstream os;
      os << entries[p.entry].name << "[" << p.index << "]: analytic " << p.a << ", numeric " << p.n;
      report.worst = os.str();
    }
  }
  return report;
}

}  // namespace mxtts::model
