#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mxtts/model/acoustic.hpp"
#include "mxtts/seqmix/kernels.hpp"
#include "mxtts/seqmix/types.hpp"

namespace mxtts::bench {

class BenchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TimingOptions {
  int warmup = 2;
  int repeats = 5;  // reported value is the median
};

// Pins the kernel backend and OpenMP thread count for its lifetime.
// threads == 1 selects the serial kernels.
class ScopedThreads {
 public:
  explicit ScopedThreads(int threads);
  ~ScopedThreads();
  ScopedThreads(const ScopedThreads&) = delete;
  ScopedThreads& operator=(const ScopedThreads&) = delete;

 private:
  seqmix::kernels::Backend prev_backend_;
  int prev_threads_;
};

double median(std::vector<double> v);

// Seconds of audio represented by n mel frames at the model hop and rate.
double frames_to_seconds(std::size_t n_frames);

struct Throughput {
  double utterances_per_s = 0;
  double audio_seconds_per_s = 0;
};

// Synthesizes `batch_size` utterances per batch, cycling through `inputs`.
// Median per-batch rate over n_batches after opts.warmup discarded batches.
template <typename T>
Throughput measure_throughput(const model::AcousticModel<T>& model, const std::vector<text::TokenSequence>& inputs,
                              std::size_t batch_size, std::size_t n_batches, std::uint64_t seed,
                              const TimingOptions& opts = {});

// Median synthesis wall time of one utterance over its generated duration.
template <typename T>
double measure_rtf(const model::AcousticModel<T>& model, const text::TokenSequence& input, std::uint64_t seed,
                   const TimingOptions& opts = {});

std::size_t parameter_bytes(std::size_t n_params, std::size_t value_size);

// Parameter bytes plus the high-water mark of bytes allocated while a batch
// of `batch_size` inputs of `seq_len` tokens is synthesized, every output
// held until the batch ends.
template <typename T>
std::int64_t measure_peak_memory(const model::AcousticModel<T>& model, std::size_t batch_size, std::size_t seq_len,
                                 std::uint64_t seed);

// Same accounting for one mixing layer of width `dim` applied to a batch of
// seq_len × dim inputs.
struct MixerBenchShape {
  std::size_t dim = 64, heads = 2, state = 16, head_dim = 16;
};
std::int64_t measure_mixer_peak_memory(seqmix::MixerKind kind, const MixerBenchShape& shape, std::size_t batch_size,
                                       std::size_t seq_len, std::uint64_t seed);

// Median seconds for one mixing-layer forward at seq_len.
double time_mixer(seqmix::MixerKind kind, const MixerBenchShape& shape, std::size_t seq_len, std::uint64_t seed,
                  const TimingOptions& opts = {});

struct PowerLawFit {
  double slope = 0, intercept = 0, r2 = 0;
};
// Least squares of log y on log x.
PowerLawFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

inline constexpr double kMinReliableR2 = 0.95;

struct ScalingRow {
  seqmix::MixerKind mixer;
  std::vector<std::size_t> seq_lens;
  std::vector<double> seconds;
  PowerLawFit fit;
  bool reliable() const noexcept { return fit.r2 >= kMinReliableR2; }
};

// seq_lens: at least four, geometrically spaced. Runs on the serial kernels.
std::vector<ScalingRow> scaling_report(const std::vector<seqmix::MixerKind>& mixers,
                                       const std::vector<std::size_t>& seq_lens, const MixerBenchShape& shape,
                                       std::uint64_t seed, const TimingOptions& opts = {});

inline constexpr double kNotMeasured = std::numeric_limits<double>::quiet_NaN();

// One measured configuration. Fields that were not measured stay NaN / -1.
struct BenchReport {
  std::string mixer;
  std::string dtype = "float32";
  int threads = 1;
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  double throughput_ups = kNotMeasured;
  double audio_seconds_per_s = kNotMeasured;
  double rtf = kNotMeasured;
  std::int64_t peak_bytes = -1;
  std::int64_t mixer_peak_bytes = -1;
  double slope = kNotMeasured, r2 = kNotMeasured;
  bool slope_reliable = false;
};

std::string to_tsv(const std::vector<BenchReport>& rows);
std::vector<std::pair<std::string, std::string>> to_kv(const std::vector<BenchReport>& rows);

}  // namespace mxtts::bench
