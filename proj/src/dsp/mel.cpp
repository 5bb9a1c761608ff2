#include "mxtts/dsp/mel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "mxtts/binio.hpp"
#include "mxtts/dsp/fft.hpp"

namespace mxtts::dsp {

void MelConfig::validate() const {
  if (sample_rate <= 0 || n_fft <= 0 || hop <= 0 || win <= 0 || n_mels <= 0)
    throw AudioError("MelConfig: sizes must be positive");
  if (!(hop <= win && win <= n_fft)) throw AudioError("MelConfig: require hop <= win <= n_fft");
  if (!(0.0 <= fmin && fmin < fmax && fmax <= sample_rate / 2.0))
    throw AudioError("MelConfig: require 0 <= fmin < fmax <= sample_rate/2");
  if (!(log_floor > 0.0)) throw AudioError("MelConfig: log_floor must be positive");
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / length);
  return w;
}

namespace {

// Analysis window of length n_fft with a centered win-length Hann.
std::vector<double> padded_window(int n_fft, int win) {
  std::vector<double> w(static_cast<std::size_t>(n_fft), 0.0);
  const auto h = hann_window(win);
  const int off = (n_fft - win) / 2;
  for (int i = 0; i < win; ++i) w[static_cast<std::size_t>(off + i)] = h[static_cast<std::size_t>(i)];
  return w;
}

std::ptrdiff_t reflect(std::ptrdiff_t j, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  j %= period;
  if (j < 0) j += period;
  return j < n ? j : period - j;
}

}  // namespace

ComplexMatrix stft(std::span<const double> samples, int n_fft, int hop, int win) {
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  if (n == 0) throw AudioError("stft: empty signal");
  const std::size_t frames = samples.size() / static_cast<std::size_t>(hop) + 1;
  const std::size_t bins = static_cast<std::size_t>(n_fft / 2 + 1);
  const auto window = padded_window(n_fft, win);
  const std::ptrdiff_t pad = n_fft / 2;
  const auto& plan = cached_plan<double>(static_cast<std::size_t>(n_fft));

  ComplexMatrix out(frames, bins);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(n_fft));
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t) * hop - pad;
    for (int i = 0; i < n_fft; ++i)
      buf[static_cast<std::size_t>(i)] = samples[static_cast<std::size_t>(reflect(start + i, n))] * window[static_cast<std::size_t>(i)];
    plan.forward(buf);
    for (std::size_t k = 0; k < bins; ++k) out(t, k) = buf[k];
  }
  return out;
}

std::vector<double> istft(const ComplexMatrix& spec, int n_fft, int hop, int win, std::size_t length) {
  const std::size_t frames = spec.rows();
  const std::size_t bins = spec.cols();
  if (bins != static_cast<std::size_t>(n_fft / 2 + 1)) throw AudioError("istft: bin count mismatch");
  const auto window = padded_window(n_fft, win);
  const std::size_t pad = static_cast<std::size_t>(n_fft / 2);
  const std::size_t total = (frames - 1) * static_cast<std::size_t>(hop) + static_cast<std::size_t>(n_fft);
  std::vector<double> y(total, 0.0), wsum(total, 0.0);
  const auto& plan = cached_plan<double>(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(n_fft));
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) buf[k] = spec(t, k);
    for (std::size_t k = bins; k < static_cast<std::size_t>(n_fft); ++k) buf[k] = std::conj(spec(t, static_cast<std::size_t>(n_fft) - k));
    buf[0] = {buf[0].real(), 0.0};
    if (n_fft % 2 == 0) buf[bins - 1] = {buf[bins - 1].real(), 0.0};
    plan.backward(buf);
    const std::size_t start = t * static_cast<std::size_t>(hop);
    for (int i = 0; i < n_fft; ++i) {
      const auto w = window[static_cast<std::size_t>(i)];
      y[start + static_cast<std::size_t>(i)] += buf[static_cast<std::size_t>(i)].real() / n_fft * w;
      wsum[start + static_cast<std::size_t>(i)] += w * w;
    }
  }
  std::vector<double> out(length, 0.0);
  for (std::size_t i = 0; i < length && i + pad < total; ++i) {
    const double ws = wsum[i + pad];
    out[i] = ws > 1e-10 ? y[i + pad] / ws : 0.0;
  }
  return out;
}

double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_hz / f_sp + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

namespace {
std::vector<double> mel_points_hz(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> pts(static_cast<std::size_t>(cfg.n_mels + 2));
  for (std::size_t i = 0; i < pts.size(); ++i)
    pts[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  return pts;
}
}  // namespace

double mel_band_center_hz(const MelConfig& cfg, int band) {
  return mel_points_hz(cfg).at(static_cast<std::size_t>(band + 1));
}

Matrix<double> mel_filterbank(const MelConfig& cfg) {
  cfg.validate();
  const auto pts = mel_points_hz(cfg);
  const int bins = cfg.n_bins();
  Matrix<double> fb(static_cast<std::size_t>(cfg.n_mels), static_cast<std::size_t>(bins));
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double f0 = pts[static_cast<std::size_t>(m)], f1 = pts[static_cast<std::size_t>(m + 1)],
                 f2 = pts[static_cast<std::size_t>(m + 2)];
    const double enorm = 2.0 / (f2 - f0);
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      const double lower = (f - f0) / (f1 - f0);
      const double upper = (f2 - f) / (f2 - f1);
      fb(static_cast<std::size_t>(m), static_cast<std::size_t>(k)) = std::max(0.0, std::min(lower, upper)) * enorm;
    }
  }
  return fb;
}

MelSpectrogram melspectrogram(const Waveform& w, const MelConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate)
    throw AudioError("melspectrogram: waveform rate " + std::to_string(w.sample_rate) + " != config rate " +
                     std::to_string(cfg.sample_rate));
  if (w.samples.size() < static_cast<std::size_t>(cfg.win))
    throw AudioError("melspectrogram: waveform shorter than one analysis window");
  const auto spec = stft(w.samples, cfg.n_fft, cfg.hop, cfg.win);
  const auto fb = mel_filterbank(cfg);
  const std::size_t frames = spec.rows();
  Matrix<double> mag(frames, spec.cols());
  for (std::size_t i = 0; i < spec.size(); ++i) mag[i] = std::abs(spec[i]);
  Matrix<double> mel;
  gemm(fb, false, mag, true, mel);  // n_mels × frames
  MelSpectrogram out;
  out.config = cfg;
  out.values = Matrix<float>(mel.rows(), mel.cols());
  for (std::size_t i = 0; i < mel.size(); ++i)
    out.values[i] = static_cast<float>(std::log(std::max(mel[i], cfg.log_floor)));
  return out;
}

Waveform griffin_lim_invert(const MelSpectrogram& m, int iterations, std::uint64_t seed) {
  if (iterations < 1) throw AudioError("griffin_lim_invert: iterations must be >= 1");
  const auto& cfg = m.config;
  cfg.validate();
  for (std::size_t i = 0; i < m.values.size(); ++i)
    if (!std::isfinite(m.values[i])) throw AudioError("griffin_lim_invert: non-finite mel input");
  if (m.values.rows() != static_cast<std::size_t>(cfg.n_mels)) throw AudioError("griffin_lim_invert: mel count mismatch");
  const std::size_t frames = m.values.cols();
  const std::size_t bins = static_cast<std::size_t>(cfg.n_bins());

  const auto fb = mel_filterbank(cfg);
  using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const EMat> efb(fb.data(), static_cast<Eigen::Index>(fb.rows()), static_cast<Eigen::Index>(fb.cols()));
  const EMat pinv = efb.completeOrthogonalDecomposition().pseudoInverse();  // bins × n_mels

  EMat mel_lin(m.values.rows(), frames);
  for (std::size_t r = 0; r < m.values.rows(); ++r)
    for (std::size_t c = 0; c < frames; ++c) mel_lin(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::exp(static_cast<double>(m.values(r, c)));
  const EMat lin = (pinv * mel_lin).cwiseMax(0.0);  // bins × frames

  Matrix<double> mag(frames, bins);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < bins; ++k) mag(t, k) = lin(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  ComplexMatrix spec(frames, bins);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = std::polar(mag[i], phase(rng));

  const std::size_t length = (frames - 1) * static_cast<std::size_t>(cfg.hop);
  Waveform out;
  out.sample_rate = cfg.sample_rate;
  if (length == 0) return out;
  std::vector<double> x;
  for (int it = 0; it < iterations; ++it) {
    x = istft(spec, cfg.n_fft, cfg.hop, cfg.win, length);
    const auto re = stft(x, cfg.n_fft, cfg.hop, cfg.win);
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const double a = std::abs(re[i]);
      spec[i] = a > 1e-12 ? mag[i] * (re[i] / a) : std::complex<double>(mag[i], 0.0);
    }
  }
  out.samples = istft(spec, cfg.n_fft, cfg.hop, cfg.win, length);
  for (auto& s : out.samples) s = std::clamp(s, -1.0, 1.0);
  return out;
}

namespace {
constexpr char kMelMagic[4] = {'M', 'X', 'M', 'C'};
constexpr std::uint32_t kMelVersion = 1;
}  // namespace

void write_mel_cache(const std::filesystem::path& path, const Matrix<float>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AudioError("cannot write " + path.string());
  out.write(kMelMagic, 4);
  binio::put<std::uint32_t>(out, kMelVersion);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(values.rows()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(values.cols()));
  for (std::size_t i = 0; i < values.size(); ++i) binio::put<float>(out, values[i]);
}

Matrix<float> read_mel_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMelMagic))
    throw AudioError(path.string() + ": bad mel cache magic");
  const auto version = binio::get<std::uint32_t>(in);
  if (version != kMelVersion) throw AudioError(path.string() + ": unsupported mel cache version");
  const auto rows = binio::get<std::uint32_t>(in);
  const auto cols = binio::get<std::uint32_t>(in);
  Matrix<float> m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = binio::get<float>(in);
  return m;
}

}  // namespace mxtts::dsp
