#include <doctest.h>

#include <cmath>

#include "mxtts/bench/bench.hpp"
#include "mxtts/model/acoustic.hpp"
#include "mxtts/seqmix/kernels.hpp"
#include "support.hpp"

using namespace mxtts;
using namespace mxtts::bench;
using seqmix::MixerKind;

namespace {

model::ModelConfig desk(MixerKind kind) {
  model::ModelConfig c;
  c.mixer = kind;
  c.n_vocab = 20;
  c.desk_scale = true;
  return c;
}

text::TokenSequence seq(std::size_t n) {
  text::TokenSequence t;
  for (std::size_t i = 0; i < n; ++i) t.ids.push_back(static_cast<int>(i % 20));
  return t;
}

}  // namespace

TEST_SUITE("bench") {
  TEST_CASE("median, frame arithmetic, power-law fit") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 2, 3}) == 2.5);
    CHECK_THROWS(median({}));
    CHECK(frames_to_seconds(861) == doctest::Approx(861 * 256 / 22050.0));

    const auto f = fit_power_law({256, 512, 1024, 2048}, {3 * 256.0 * 256, 3 * 512.0 * 512, 3 * 1024.0 * 1024,
                                                         3 * 2048.0 * 2048});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(std::log(3.0)));
    CHECK(f.r2 == doctest::Approx(1.0));

    testsupport::Gen g(501);
    std::vector<double> x, y;
    for (int i = 0; i < 8; ++i) {
      x.push_back(std::pow(2.0, 8 + i));
      y.push_back(g.uniform(0.1, 1.0));
    }
    CHECK(fit_power_law(x, y).r2 < kMinReliableR2);
    CHECK_THROWS(fit_power_law({1, 2}, {1, 2, 3}));
  }

  TEST_CASE("scoped thread pinning restores the previous backend") {
    namespace k = seqmix::kernels;
    const auto before = k::backend();
    {
      ScopedThreads pin(1);
      CHECK(k::backend() == k::Backend::kSerial);
    }
    CHECK(k::backend() == before);
  }

  TEST_CASE("throughput and RTF: errors, positivity, bounds, repeatability") {
    const model::AcousticModel<float> m(desk(MixerKind::kMamba2), 1);
    const std::vector<text::TokenSequence> inputs = {seq(12)};
    CHECK_THROWS_AS(measure_throughput(m, inputs, 1, 0, 0), BenchError);
    CHECK_THROWS_AS(measure_throughput(m, inputs, 0, 1, 0), BenchError);
    CHECK_THROWS_AS(measure_throughput(m, {}, 1, 1, 0), BenchError);

    TimingOptions opts;
    opts.warmup = 1;
    const auto one = measure_throughput(m, inputs, 1, 5, 7, opts);
    const auto two = measure_throughput(m, inputs, 2, 5, 7, opts);
    CHECK(one.utterances_per_s > 0);
    CHECK(one.audio_seconds_per_s > 0);
    // Items run one after another, so doubling the batch cannot do better
    // than double the single-item rate; timer noise gets 10% slack below.
    CHECK(two.utterances_per_s >= 0.9 * one.utterances_per_s);
    CHECK(two.utterances_per_s <= 2.0 * one.utterances_per_s);
    const auto again = measure_throughput(m, inputs, 1, 5, 7, opts);
    CHECK(std::abs(again.utterances_per_s / one.utterances_per_s - 1.0) <= 0.2);

    std::vector<double> rtfs;
    for (std::size_t n : {6, 12, 24, 48}) {
      const double r = measure_rtf(m, seq(n), 3, opts);
      CHECK(r > 0);
      rtfs.push_back(r);
    }
    const auto [lo, hi] = std::minmax_element(rtfs.begin(), rtfs.end());
    CHECK(*hi / *lo <= 2.0);
  }

  TEST_CASE("peak memory: parameters included, monotone in batch, exact across runs") {
    for (auto k : seqmix::kAllMixers) {
      const model::AcousticModel<float> m(desk(k), 2);
      const auto p1 = measure_peak_memory(m, 1, 10, 0);
      const auto p32 = measure_peak_memory(m, 32, 10, 0);
      INFO(seqmix::to_string(k));
      CHECK(p1 >= static_cast<std::int64_t>(parameter_bytes(m.params().count(), sizeof(float))));
      CHECK(p1 <= p32);
      CHECK(measure_peak_memory(m, 1, 10, 0) == p1);
      CHECK_THROWS_AS(measure_peak_memory(m, 0, 10, 0), BenchError);

      const MixerBenchShape shape;
      const auto a = measure_mixer_peak_memory(k, shape, 1, 128, 0);
      CHECK(a > 0);
      CHECK(measure_mixer_peak_memory(k, shape, 1, 128, 0) == a);
      CHECK(measure_mixer_peak_memory(k, shape, 2, 128, 0) >= a);
    }
  }

  TEST_CASE("benchmarks leave parameters untouched") {
    const model::AcousticModel<float> m(desk(MixerKind::kHydra), 3);
    const auto before = m.params().checksum();
    TimingOptions opts;
    opts.warmup = 0;
    opts.repeats = 1;
    measure_throughput(m, {seq(8)}, 2, 1, 0, opts);
    measure_rtf(m, seq(8), 0, opts);
    measure_peak_memory(m, 2, 8, 0);
    CHECK(m.params().checksum() == before);
  }

  TEST_CASE("scaling report: input validation and row shape") {
    TimingOptions opts;
    opts.warmup = 0;
    opts.repeats = 1;
    const MixerBenchShape shape;
    CHECK_THROWS_AS(scaling_report({MixerKind::kFNet}, {64, 128, 256}, shape, 0, opts), BenchError);
    CHECK_THROWS_AS(scaling_report({MixerKind::kFNet}, {64, 100, 256, 300}, shape, 0, opts), BenchError);
    const auto rows = scaling_report({MixerKind::kSelfAttention, MixerKind::kFNet}, {64, 128, 256, 512}, shape, 0, opts);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].mixer == MixerKind::kSelfAttention);
    CHECK(rows[1].seconds.size() == 4);
    for (const auto& r : rows)
      for (double s : r.seconds) CHECK(s > 0);
    CHECK(rows[0].reliable() == (rows[0].fit.r2 >= kMinReliableR2));
  }

  TEST_CASE("report schema is stable and marks unmeasured fields") {
    BenchReport r;
    r.mixer = "fnet";
    r.batch = 4;
    r.seq_len = 48;
    r.rtf = 0.5 / 10.0;
    const auto tsv = to_tsv({r, r});
    const auto header = tsv.substr(0, tsv.find('\n'));
    for (const char* key : {"mixer", "batch", "seq_len", "throughput_ups", "rtf", "peak_bytes", "slope", "r2"})
      CHECK(header.find(key) != std::string::npos);
    CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 3);
    const auto kv = to_kv({r});
    bool saw_rtf = false;
    for (const auto& [k, v] : kv) {
      CHECK(k.rfind("row0.", 0) == 0);
      if (k == "row0.rtf") {
        saw_rtf = true;
        CHECK(std::stod(v) == doctest::Approx(0.05));
      }
      if (k == "row0.peak_bytes") CHECK(v == "-1");
    }
    CHECK(saw_rtf);
  }
}
