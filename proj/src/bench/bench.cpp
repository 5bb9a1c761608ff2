#include "mxtts/bench/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "mxtts/dsp/mel.hpp"
#include "mxtts/model/layers.hpp"
#include "mxtts/seqmix/kernels.hpp"

namespace mxtts::bench {

namespace {

using Clock = std::chrono::steady_clock;
namespace kernels = seqmix::kernels;

template <typename F>
double seconds_of(F&& f) {
  const auto t0 = Clock::now();
  f();
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename F>
std::vector<double> timed_runs(const TimingOptions& opts, std::size_t runs, F&& f) {
  for (int i = 0; i < opts.warmup; ++i) f();
  std::vector<double> out;
  for (std::size_t i = 0; i < runs; ++i) out.push_back(seconds_of(f));
  return out;
}

void check_opts(const TimingOptions& opts) {
  if (opts.warmup < 0 || opts.repeats <= 0) throw BenchError("timing needs warmup >= 0 and repeats > 0");
}

// Token IDs cycle through the non-pad vocabulary; speaker and language 0.
text::TokenSequence probe_tokens(std::size_t len, std::size_t n_vocab) {
  text::TokenSequence ts;
  for (std::size_t i = 0; i < len; ++i) ts.ids.push_back(static_cast<int>(1 + i % std::max<std::size_t>(n_vocab - 1, 1)));
  return ts;
}

template <typename T>
Matrix<T> random_input(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix<T> m(rows, cols);
  for (auto& v : m.flat()) v = static_cast<T>(nd(rng));
  return m;
}

model::MixerLayer<float> make_layer(model::ParamStore<float>& ps, seqmix::MixerKind kind, const MixerBenchShape& s) {
  if (s.dim == 0 || s.head_dim == 0 || s.dim % s.head_dim != 0 || s.heads == 0 || s.dim % s.heads != 0)
    throw BenchError("mixer shape: dim must be a positive multiple of heads and head_dim");
  return model::MixerLayer<float>(ps, "bench", kind, {s.dim, s.heads, s.state, s.head_dim});
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

ScopedThreads::ScopedThreads(int threads) : prev_backend_(kernels::backend()), prev_threads_(kernels::max_threads()) {
  if (threads < 1) throw BenchError("thread count must be >= 1");
  if (threads == 1 || !kernels::openmp_available()) {
    kernels::set_backend(kernels::Backend::kSerial);
  } else {
    kernels::set_backend(kernels::Backend::kOpenMP);
    kernels::set_threads(threads);
  }
}

ScopedThreads::~ScopedThreads() {
  kernels::set_backend(prev_backend_);
  kernels::set_threads(prev_threads_);
}

double median(std::vector<double> v) {
  if (v.empty()) throw BenchError("median of no samples");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double frames_to_seconds(std::size_t n_frames) {
  const dsp::MelConfig cfg;
  return static_cast<double>(n_frames) * cfg.hop / cfg.sample_rate;
}

template <typename T>
Throughput measure_throughput(const model::AcousticModel<T>& model, const std::vector<text::TokenSequence>& inputs,
                              std::size_t batch_size, std::size_t n_batches, std::uint64_t seed,
                              const TimingOptions& opts) {
  check_opts(opts);
  if (n_batches == 0) throw BenchError("measure_throughput: n_batches must be > 0");
  if (batch_size == 0) throw BenchError("measure_throughput: batch_size must be > 0");
  if (inputs.empty()) throw BenchError("measure_throughput: no inputs");
  std::size_t next = 0;
  std::vector<double> ups, aps;
  auto run_batch = [&](bool record) {
    std::mt19937_64 rng(seed);
    std::size_t frames = 0;
    const double s = seconds_of([&] {
      for (std::size_t b = 0; b < batch_size; ++b) {
        frames += model.synthesize(inputs[next], rng).frames.rows();
        next = (next + 1) % inputs.size();
      }
    });
    if (record) {
      ups.push_back(static_cast<double>(batch_size) / s);
      aps.push_back(frames_to_seconds(frames) / s);
    }
  };
  for (int i = 0; i < opts.warmup; ++i) run_batch(false);
  for (std::size_t i = 0; i < n_batches; ++i) run_batch(true);
  return {median(ups), median(aps)};
}

template <typename T>
double measure_rtf(const model::AcousticModel<T>& model, const text::TokenSequence& input, std::uint64_t seed,
                   const TimingOptions& opts) {
  check_opts(opts);
  std::size_t frames = 0;
  const auto runs = timed_runs(opts, static_cast<std::size_t>(opts.repeats), [&] {
    std::mt19937_64 rng(seed);
    frames = model.synthesize(input, rng).frames.rows();
  });
  const double audio = frames_to_seconds(frames);
  if (!(audio > 0)) throw BenchError("measure_rtf: synthesis produced no audio");
  return median(runs) / audio;
}

std::size_t parameter_bytes(std::size_t n_params, std::size_t value_size) { return n_params * value_size; }

template <typename T>
std::int64_t measure_peak_memory(const model::AcousticModel<T>& model, std::size_t batch_size, std::size_t seq_len,
                                 std::uint64_t seed) {
  if (batch_size == 0) throw BenchError("measure_peak_memory: batch_size must be > 0");
  if (seq_len == 0) throw BenchError("measure_peak_memory: seq_len must be > 0");
  const auto tokens = probe_tokens(seq_len, model.config().n_vocab);
  const std::int64_t base = mem::live_bytes();
  mem::reset_peak();
  {
    std::mt19937_64 rng(seed);
    std::vector<Matrix<T>> outputs;
    for (std::size_t b = 0; b < batch_size; ++b) outputs.push_back(model.synthesize(tokens, rng).frames);
  }
  const std::int64_t transient = mem::peak_bytes() - base;
  return static_cast<std::int64_t>(parameter_bytes(model.params().count(), sizeof(T))) + transient;
}

std::int64_t measure_mixer_peak_memory(seqmix::MixerKind kind, const MixerBenchShape& shape, std::size_t batch_size,
                                       std::size_t seq_len, std::uint64_t seed) {
  if (batch_size == 0) throw BenchError("measure_mixer_peak_memory: batch_size must be > 0");
  if (seq_len == 0) throw BenchError("measure_mixer_peak_memory: seq_len must be > 0");
  model::ParamStore<float> ps(seed);
  const auto layer = make_layer(ps, kind, shape);
  std::mt19937_64 rng(seed);
  const std::int64_t base = mem::live_bytes();
  mem::reset_peak();
  {
    std::vector<ad::Var<float>> inputs, outputs;
    for (std::size_t b = 0; b < batch_size; ++b)
      inputs.push_back(ad::constant(random_input<float>(seq_len, shape.dim, rng)));
    for (const auto& x : inputs) outputs.push_back(layer.self(x));
  }
  return static_cast<std::int64_t>(parameter_bytes(ps.count(), sizeof(float))) + (mem::peak_bytes() - base);
}

double time_mixer(seqmix::MixerKind kind, const MixerBenchShape& shape, std::size_t seq_len, std::uint64_t seed,
                  const TimingOptions& opts) {
  check_opts(opts);
  if (seq_len == 0) throw BenchError("time_mixer: seq_len must be > 0");
  model::ParamStore<float> ps(seed);
  const auto layer = make_layer(ps, kind, shape);
  std::mt19937_64 rng(seed);
  const auto x = ad::constant(random_input<float>(seq_len, shape.dim, rng));
  return median(timed_runs(opts, static_cast<std::size_t>(opts.repeats), [&] { (void)layer.self(x); }));
}

PowerLawFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw BenchError("fit_power_law: need matching samples, at least two");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw BenchError("fit_power_law: samples must be positive");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
    sx += lx.back();
    sy += ly.back();
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0) throw BenchError("fit_power_law: x values are all equal");
  PowerLawFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

std::vector<ScalingRow> scaling_report(const std::vector<seqmix::MixerKind>& mixers,
                                       const std::vector<std::size_t>& seq_lens, const MixerBenchShape& shape,
                                       std::uint64_t seed, const TimingOptions& opts) {
  if (seq_lens.size() < 4) throw BenchError("scaling_report: need at least four sequence lengths");
  const double ratio = static_cast<double>(seq_lens[1]) / static_cast<double>(seq_lens[0]);
  if (!(ratio > 1)) throw BenchError("scaling_report: sequence lengths must increase");
  for (std::size_t i = 1; i < seq_lens.size(); ++i) {
    const double r = static_cast<double>(seq_lens[i]) / static_cast<double>(seq_lens[i - 1]);
    if (std::abs(r / ratio - 1.0) > 0.05) throw BenchError("scaling_report: sequence lengths must be geometric");
  }
  ScopedThreads pin(1);
  std::vector<ScalingRow> rows;
  for (auto kind : mixers) {
    ScalingRow row{kind, seq_lens, {}, {}};
    std::vector<double> xs;
    for (auto L : seq_lens) {
      row.seconds.push_back(time_mixer(kind, shape, L, seed, opts));
      xs.push_back(static_cast<double>(L));
    }
    row.fit = fit_power_law(xs, row.seconds);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_tsv(const std::vector<BenchReport>& rows) {
  std::ostringstream os;
  os << "mixer\tdtype\tthreads\tbatch\tseq_len\tthroughput_ups\taudio_s_per_s\trtf\tpeak_bytes\tmixer_peak_bytes\tslope"
        "\tr2\tslope_reliable\n";
  for (const auto& r : rows)
    os << r.mixer << '\t' << r.dtype << '\t' << r.threads << '\t' << r.batch << '\t' << r.seq_len << '\t'
       << num(r.throughput_ups) << '\t' << num(r.audio_seconds_per_s) << '\t' << num(r.rtf) << '\t' << r.peak_bytes
       << '\t' << r.mixer_peak_bytes << '\t' << num(r.slope) << '\t' << num(r.r2) << '\t'
       << (r.slope_reliable ? "yes" : "no") << '\n';
  return os.str();
}

std::vector<std::pair<std::string, std::string>> to_kv(const std::vector<BenchReport>& rows) {
  std::vector<std::pair<std::string, std::string>> kv;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string p = "row" + std::to_string(i) + ".";
    kv.emplace_back(p + "mixer", r.mixer);
    kv.emplace_back(p + "dtype", r.dtype);
    kv.emplace_back(p + "threads", std::to_string(r.threads));
    kv.emplace_back(p + "batch", std::to_string(r.batch));
    kv.emplace_back(p + "seq_len", std::to_string(r.seq_len));
    kv.emplace_back(p + "throughput_ups", num(r.throughput_ups));
    kv.emplace_back(p + "audio_s_per_s", num(r.audio_seconds_per_s));
    kv.emplace_back(p + "rtf", num(r.rtf));
    kv.emplace_back(p + "peak_bytes", std::to_string(r.peak_bytes));
    kv.emplace_back(p + "mixer_peak_bytes", std::to_string(r.mixer_peak_bytes));
    kv.emplace_back(p + "slope", num(r.slope));
    kv.emplace_back(p + "r2", num(r.r2));
    kv.emplace_back(p + "slope_reliable", r.slope_reliable ? "true" : "false");
  }
  return kv;
}

#define MXTTS_BENCH_INSTANTIATE(T)                                                                              \
  template Throughput measure_throughput<T>(const model::AcousticModel<T>&, const std::vector<text::TokenSequence>&, \
                                            std::size_t, std::size_t, std::uint64_t, const TimingOptions&);     \
  template double measure_rtf<T>(const model::AcousticModel<T>&, const text::TokenSequence&, std::uint64_t,      \
                                 const TimingOptions&);                                                          \
  template std::int64_t measure_peak_memory<T>(const model::AcousticModel<T>&, std::size_t, std::size_t,         \
                                               std::uint64_t);

MXTTS_BENCH_INSTANTIATE(float)
MXTTS_BENCH_INSTANTIATE(double)

}  // namespace mxtts::bench
