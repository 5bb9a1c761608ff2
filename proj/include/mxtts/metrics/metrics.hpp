#pragma once

#include <filesystem>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mxtts/dsp/audio.hpp"
#include "mxtts/tensor.hpp"
#include "mxtts/text/frontend.hpp"

namespace mxtts::metrics {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- pitch

struct F0Config {
  double window_s = 0.025;
  double hop_s = 0.010;
  double fmin = 50.0;
  double fmax = 550.0;
  // Cumulative-mean-normalized difference threshold for voicing.
  double threshold = 0.15;
  // Frames whose RMS is below this are unvoiced without analysis.
  double silence_rms = 1e-3;
};

struct F0Track {
  std::vector<double> f0;  // Hz, 0 when unvoiced
  std::vector<bool> voiced;
  double frame_hop_s = 0.0;

  std::size_t size() const noexcept { return f0.size(); }
};

// YIN-style tracker. Input is resampled to 22050 Hz when needed.
F0Track extract_f0(const dsp::Waveform& w, const F0Config& cfg = {});

// RMSE over frames voiced in both tracks (truncated to the shorter).
double f0_rmse(const F0Track& a, const F0Track& b);

struct VoicingCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};
VoicingCounts voicing_counts(const F0Track& truth, const F0Track& test);
double f1_score(const VoicingCounts& c);
// F1 of b's voicing decisions against a's as ground truth.
double vuv_f1(const F0Track& a, const F0Track& b);

// ---- spectral

// RMSE between floored log10 STFT magnitudes (1024-point, hop 256), over
// the common frame count.
double las_rmse(const dsp::Waveform& a, const dsp::Waveform& b);

// c0..c12 per frame: orthonormal DCT-II of the natural-log mel spectrum of
// the model front end (80 bands). frames × 13.
Matrix<double> mel_cepstra(const dsp::Waveform& w);

struct DtwResult {
  double total_cost = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> path;  // (frame in a, frame in b)
};

// Dynamic time warping with unit steps (1,0), (0,1), (1,1) minimizing the
// summed Euclidean distance of rows over columns [first_col, cols).
DtwResult dtw(const Matrix<double>& a, const Matrix<double>& b, std::size_t first_col = 1);

inline constexpr double kMcdScale = 10.0 * std::numbers::sqrt2 / std::numbers::ln10;

// Mean cepstral distance (c1..c12) along the DTW path, or along the
// frame-by-frame truncation when use_dtw is false, scaled to dB.
double mcd_from_cepstra(const Matrix<double>& a, const Matrix<double>& b, bool use_dtw = true);
double mcd(const dsp::Waveform& a, const dsp::Waveform& b);

// Short-time objective intelligibility: 10 kHz, 256-sample frames with
// 512-point FFT, 15 third-octave bands from 150 Hz, 30-frame segments,
// clipping at β = −15 dB, silent frames (40 dB below the loudest) removed.
double stoi(const dsp::Waveform& reference, const dsp::Waveform& degraded);

// ---- distribution

// Fréchet distance between Gaussian fits of two pools of feature rows.
double frechet_distance(const Matrix<double>& frames_a, const Matrix<double>& frames_b);
// 13-dim MFCC (mel_cepstra) frames pooled per set.
double mfcc_fid(const std::vector<dsp::Waveform>& set_a, const std::vector<dsp::Waveform>& set_b);

// ---- test sets

struct PairMetrics {
  std::string name;
  double f0_rmse = 0;  // NaN when the pair has no co-voiced frames
  double stoi = 0;     // NaN when too short to score
  double las_rmse = 0, mcd = 0, vuv_f1 = 0;
};

struct MetricReport {
  double f0_rmse = 0, las_rmse = 0, mcd = 0, stoi = 0, vuv_f1 = 0, mfcc_fid = 0;
  std::size_t n_pairs = 0;
  std::size_t n_f0_pairs = 0;  // pairs that entered the f0_rmse mean
  std::size_t n_stoi_pairs = 0;
  std::vector<PairMetrics> pairs;

  std::vector<std::pair<std::string, std::string>> to_kv() const;
  std::string to_tsv() const;
};

// Pairs every manifest entry with <syn_dir>/<basename of audio_path>.
MetricReport evaluate_testset(const std::filesystem::path& ref_manifest, const text::Registry& registry,
                              const std::filesystem::path& syn_dir);
MetricReport evaluate_pairs(const std::vector<std::pair<std::string, std::pair<dsp::Waveform, dsp::Waveform>>>& pairs);

// Writes report.tsv and report.kv into dir.
void write_report(const std::filesystem::path& dir, const MetricReport& report);

// Runs `<binary> <ref.wav> <deg.wav>` and parses the last number printed.
// Used for PESQ when a user supplies an implementation.
double run_external_metric(const std::string& binary, const std::filesystem::path& ref,
                           const std::filesystem::path& deg);

}  // namespace mxtts::metrics
