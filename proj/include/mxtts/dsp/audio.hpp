#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace mxtts::dsp {

class AudioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kModelSampleRate = 22050;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kModelSampleRate;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
  void validate() const;
};

// 16-bit PCM RIFF/WAVE. Multi-channel input is averaged to mono.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);
double wav_duration_seconds(const std::filesystem::path& path);

// Band-limited (Kaiser-windowed sinc) rational resampler. Output length is
// round(n · target / source).
Waveform resample(const Waveform& w, int target_rate);

}  // namespace mxtts::dsp
