#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>

#include "mxtts/dsp/audio.hpp"
#include "mxtts/tensor.hpp"

namespace mxtts::dsp {

struct MelConfig {
  int sample_rate = kModelSampleRate;
  int n_fft = 1024;
  int hop = 256;
  int win = 1024;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-5;

  int n_bins() const { return n_fft / 2 + 1; }
  // Frame count under center padding.
  std::size_t frames_for(std::size_t n_samples) const { return n_samples / static_cast<std::size_t>(hop) + 1; }
  void validate() const;
};

// Log-magnitude mel spectrogram, n_mels × frames.
struct MelSpectrogram {
  Matrix<float> values;
  MelConfig config;

  std::size_t n_mels() const { return values.rows(); }
  std::size_t frames() const { return values.cols(); }
};

using ComplexMatrix = Matrix<std::complex<double>>;

std::vector<double> hann_window(int length);

// frames × (n_fft/2 + 1), center reflect-padded by n_fft/2.
ComplexMatrix stft(std::span<const double> samples, int n_fft, int hop, int win);
// Windowed overlap-add inverse with window-square normalization; trims the
// center padding and returns `length` samples.
std::vector<double> istft(const ComplexMatrix& spec, int n_fft, int hop, int win, std::size_t length);

double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Slaney-scale triangular filters with area normalization, n_mels × n_bins.
Matrix<double> mel_filterbank(const MelConfig& cfg);
// Frequency (Hz) at the peak of filter `band`.
double mel_band_center_hz(const MelConfig& cfg, int band);

MelSpectrogram melspectrogram(const Waveform& w, const MelConfig& cfg = {});

// Pseudo-inverse mel→linear projection followed by Griffin–Lim phase
// recovery. Initial phases are drawn from `seed`.
Waveform griffin_lim_invert(const MelSpectrogram& m, int iterations = 32, std::uint64_t seed = 0);

// Mel cache: 16-byte header (magic "MXMC", u32 version, u32 rows, u32 cols)
// then row-major little-endian float32 values. Any matrix can be dumped in
// this layout for debugging.
void write_mel_cache(const std::filesystem::path& path, const Matrix<float>& values);
Matrix<float> read_mel_cache(const std::filesystem::path& path);

}  // namespace mxtts::dsp
