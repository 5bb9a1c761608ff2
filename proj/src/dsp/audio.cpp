#include "mxtts/dsp/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

#include "mxtts/binio.hpp"

namespace mxtts::dsp {

void Waveform::validate() const {
  if (sample_rate <= 0) throw AudioError("waveform sample rate must be positive");
  for (double s : samples)
    if (!std::isfinite(s)) throw AudioError("waveform contains non-finite samples");
}

namespace {

struct WavInfo {
  int channels = 0;
  int sample_rate = 0;
  int bits = 0;
  std::uint32_t data_bytes = 0;
};

WavInfo read_header(std::istream& in, const std::filesystem::path& path) {
  char tag[4];
  auto read_tag = [&] {
    if (!in.read(tag, 4)) throw AudioError(path.string() + ": truncated WAV header");
    return std::string(tag, 4);
  };
  if (read_tag() != "RIFF") throw AudioError(path.string() + ": not a RIFF file");
  binio::get<std::uint32_t>(in);
  if (read_tag() != "WAVE") throw AudioError(path.string() + ": not a WAVE file");
  WavInfo info;
  bool have_fmt = false;
  while (true) {
    const auto id = read_tag();
    const auto size = binio::get<std::uint32_t>(in);
    if (id == "fmt ") {
      const auto format = binio::get<std::uint16_t>(in);
      info.channels = binio::get<std::uint16_t>(in);
      info.sample_rate = static_cast<int>(binio::get<std::uint32_t>(in));
      binio::get<std::uint32_t>(in);
      binio::get<std::uint16_t>(in);
      info.bits = binio::get<std::uint16_t>(in);
      if (size > 16) in.ignore(size - 16);
      if (format != 1 && format != 0xFFFE) throw AudioError(path.string() + ": only PCM WAV is supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw AudioError(path.string() + ": data chunk before fmt chunk");
      info.data_bytes = size;
      break;
    } else {
      in.ignore(size + (size & 1));
    }
  }
  if (info.bits != 16) throw AudioError(path.string() + ": only 16-bit PCM is supported");
  if (info.channels < 1 || info.sample_rate <= 0) throw AudioError(path.string() + ": bad fmt chunk");
  return info;
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError("cannot open " + path.string());
  const auto info = read_header(in, path);
  const std::size_t frames = info.data_bytes / (2u * static_cast<unsigned>(info.channels));
  Waveform w;
  w.sample_rate = info.sample_rate;
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < info.channels; ++c) acc += binio::get<std::int16_t>(in) / 32768.0;
    w.samples[i] = acc / info.channels;
  }
  return w;
}

double wav_duration_seconds(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError("cannot open " + path.string());
  const auto info = read_header(in, path);
  return static_cast<double>(info.data_bytes) / (2.0 * info.channels) / info.sample_rate;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  w.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AudioError("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  binio::put<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  binio::put<std::uint32_t>(out, 16);
  binio::put<std::uint16_t>(out, 1);
  binio::put<std::uint16_t>(out, 1);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  binio::put<std::uint16_t>(out, 2);
  binio::put<std::uint16_t>(out, 16);
  out.write("data", 4);
  binio::put<std::uint32_t>(out, data_bytes);
  for (double s : w.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    binio::put<std::int16_t>(out, static_cast<std::int16_t>(std::lround(c * 32767.0)));
  }
}

Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw AudioError("resample: target rate must be positive");
  w.validate();
  if (target_rate == w.sample_rate) return w;

  const double ratio = static_cast<double>(target_rate) / w.sample_rate;
  const auto n_in = static_cast<std::ptrdiff_t>(w.samples.size());
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * ratio));

  constexpr double kRolloff = 0.95;
  constexpr double kZeroCrossings = 24.0;
  constexpr double kBeta = 9.0;
  // Cutoff in cycles per input sample.
  const double fc = 0.5 * std::min(1.0, ratio) * kRolloff;
  const double half_width = kZeroCrossings / (2.0 * fc);
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);
  constexpr std::size_t kTable = 8192;
  std::vector<double> kaiser(kTable + 2);
  for (std::size_t i = 0; i <= kTable + 1; ++i) {
    const double u = std::min(1.0, static_cast<double>(i) / kTable);
    kaiser[i] = std::cyl_bessel_i(0.0, kBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
  }

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t m = 0; m < n_out; ++m) {
    const double t = static_cast<double>(m) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double tau = t - static_cast<double>(k);
      const double pos = std::abs(tau) / half_width * kTable;
      const auto idx = std::min(static_cast<std::size_t>(pos), kTable);
      const double frac = pos - static_cast<double>(idx);
      const double win = kaiser[idx] + frac * (kaiser[idx + 1] - kaiser[idx]);
      const double x = 2.0 * fc * tau;
      const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      acc += w.samples[static_cast<std::size_t>(k)] * 2.0 * fc * sinc * win;
    }
    out.samples[m] = acc;
  }
  return out;
}

}  // namespace mxtts::dsp
