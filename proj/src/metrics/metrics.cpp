#include "mxtts/metrics/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>

#include "mxtts/dsp/fft.hpp"
#include "mxtts/dsp/mel.hpp"
#include "mxtts/kvfile.hpp"

namespace mxtts::metrics {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

dsp::Waveform at_rate(const dsp::Waveform& w, int rate) {
  return w.sample_rate == rate ? w : dsp::resample(w, rate);
}

void require_same_rate(const dsp::Waveform& a, const dsp::Waveform& b, const char* what) {
  if (a.sample_rate != b.sample_rate)
    throw MetricError(std::string(what) + ": sample rates differ (" + std::to_string(a.sample_rate) + " vs " +
                      std::to_string(b.sample_rate) + ")");
}

// Very short clips are zero-padded to one analysis window so that every
// spectral metric is defined.
dsp::Waveform padded_to(const dsp::Waveform& w, std::size_t n) {
  if (w.samples.size() >= n) return w;
  dsp::Waveform out = w;
  out.samples.resize(n, 0.0);
  return out;
}

// Symmetric PSD square root with eigenvalues clamped at zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

// ------------------------------------------------------------------ pitch

F0Track extract_f0(const dsp::Waveform& input, const F0Config& cfg) {
  const dsp::Waveform w = at_rate(input, dsp::kModelSampleRate);
  const double sr = w.sample_rate;
  const auto W = static_cast<std::size_t>(std::lround(cfg.window_s * sr));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_s * sr));
  const auto tau_min = static_cast<std::size_t>(std::floor(sr / cfg.fmax));
  const auto tau_max = static_cast<std::size_t>(std::ceil(sr / cfg.fmin));
  if (w.samples.size() < W)
    throw MetricError("extract_f0: waveform of " + std::to_string(w.samples.size()) +
                      " samples is shorter than one analysis window (" + std::to_string(W) + ")");

  // Zero tail so the last frames still have tau_max samples of lookahead.
  std::vector<double> x(w.samples);
  x.resize(x.size() + tau_max + 1, 0.0);

  F0Track track;
  track.frame_hop_s = static_cast<double>(hop) / sr;
  const std::size_t frames = 1 + (w.samples.size() - W) / hop;
  track.f0.assign(frames, 0.0);
  track.voiced.assign(frames, false);
  std::vector<double> d(tau_max + 2, 0.0), cmnd(tau_max + 2, 1.0);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* frame = x.data() + f * hop;
    double energy = 0;
    for (std::size_t j = 0; j < W; ++j) energy += frame[j] * frame[j];
    if (std::sqrt(energy / static_cast<double>(W)) < cfg.silence_rms) continue;

    for (std::size_t tau = 1; tau <= tau_max + 1; ++tau) {
      double s = 0;
      for (std::size_t j = 0; j < W; ++j) {
        const double diff = frame[j] - frame[j + tau];
        s += diff * diff;
      }
      d[tau] = s;
    }
    double running = 0;
    for (std::size_t tau = 1; tau <= tau_max + 1; ++tau) {
      running += d[tau];
      cmnd[tau] = running > 0 ? d[tau] * static_cast<double>(tau) / running : 1.0;
    }
    std::size_t best = 0;
    for (std::size_t tau = std::max<std::size_t>(tau_min, 2); tau <= tau_max; ++tau) {
      if (cmnd[tau] < cfg.threshold) {
        while (tau + 1 <= tau_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
        best = tau;
        break;
      }
    }
    if (best == 0) continue;
    // Parabolic refinement around the chosen lag.
    const double y0 = cmnd[best - 1], y1 = cmnd[best], y2 = cmnd[best + 1];
    const double denom = y0 - 2 * y1 + y2;
    double lag = static_cast<double>(best);
    if (std::abs(denom) > 1e-12) lag += std::clamp(0.5 * (y0 - y2) / denom, -0.5, 0.5);
    const double f0 = sr / lag;
    if (f0 < cfg.fmin || f0 > cfg.fmax) continue;
    track.f0[f] = f0;
    track.voiced[f] = true;
  }
  return track;
}

double f0_rmse(const F0Track& a, const F0Track& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double sq = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!a.voiced[i] || !b.voiced[i]) continue;
    const double d = a.f0[i] - b.f0[i];
    sq += d * d;
    ++count;
  }
  if (count == 0) throw MetricError("f0_rmse: no frames are voiced in both tracks");
  return std::sqrt(sq / static_cast<double>(count));
}

VoicingCounts voicing_counts(const F0Track& truth, const F0Track& test) {
  VoicingCounts c;
  const std::size_t n = std::min(truth.size(), test.size());
  for (std::size_t i = 0; i < n; ++i) {
    const bool t = truth.voiced[i], p = test.voiced[i];
    if (t && p)
      ++c.tp;
    else if (!t && p)
      ++c.fp;
    else if (t && !p)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double f1_score(const VoicingCounts& c) {
  const double p = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  const double r = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

double vuv_f1(const F0Track& a, const F0Track& b) { return f1_score(voicing_counts(a, b)); }

// ------------------------------------------------------------------ spectral

double las_rmse(const dsp::Waveform& a, const dsp::Waveform& b) {
  require_same_rate(a, b, "las_rmse");
  constexpr int kFft = 1024, kHop = 256;
  constexpr double kFloor = 1e-5;
  const auto sa = dsp::stft(padded_to(a, kFft).samples, kFft, kHop, kFft);
  const auto sb = dsp::stft(padded_to(b, kFft).samples, kFft, kHop, kFft);
  const std::size_t frames = std::min(sa.rows(), sb.rows());
  double sq = 0;
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < sa.cols(); ++k) {
      const double la = std::log10(std::max(std::abs(sa(t, k)), kFloor));
      const double lb = std::log10(std::max(std::abs(sb(t, k)), kFloor));
      sq += (la - lb) * (la - lb);
    }
  return std::sqrt(sq / static_cast<double>(frames * sa.cols()));
}

Matrix<double> mel_cepstra(const dsp::Waveform& input) {
  constexpr std::size_t kCoeffs = 13;
  const dsp::MelConfig cfg;
  const auto mel = dsp::melspectrogram(padded_to(at_rate(input, dsp::kModelSampleRate), cfg.win), cfg);
  const std::size_t M = mel.n_mels(), T = mel.frames();
  Matrix<double> out(T, kCoeffs);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < kCoeffs; ++k) {
      double s = 0;
      for (std::size_t m = 0; m < M; ++m)
        s += mel.values(m, t) * std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(m) + 0.5) /
                                         static_cast<double>(M));
      out(t, k) = s * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(M));
    }
  return out;
}

DtwResult dtw(const Matrix<double>& a, const Matrix<double>& b, std::size_t first_col) {
  if (a.rows() == 0 || b.rows() == 0) throw MetricError("dtw: empty sequence");
  if (a.cols() != b.cols()) throw MetricError("dtw: feature widths differ");
  const std::size_t n = a.rows(), m = b.rows();
  auto dist = [&](std::size_t i, std::size_t j) {
    double s = 0;
    for (std::size_t c = first_col; c < a.cols(); ++c) {
      const double d = a(i, c) - b(j, c);
      s += d * d;
    }
    return std::sqrt(s);
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Matrix<double> D(n, m, kInf);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double prev = 0;
      if (i > 0 || j > 0) {
        prev = kInf;
        if (i > 0) prev = std::min(prev, D(i - 1, j));
        if (j > 0) prev = std::min(prev, D(i, j - 1));
        if (i > 0 && j > 0) prev = std::min(prev, D(i - 1, j - 1));
      }
      D(i, j) = prev + dist(i, j);
    }
  DtwResult r;
  r.total_cost = D(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  r.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0)
      --j;
    else if (j == 0)
      --i;
    else {
      const double diag = D(i - 1, j - 1), up = D(i - 1, j), left = D(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    r.path.emplace_back(i, j);
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

double mcd_from_cepstra(const Matrix<double>& a, const Matrix<double>& b, bool use_dtw) {
  if (a.cols() != b.cols() || a.cols() < 2) throw MetricError("mcd: cepstra widths differ or too narrow");
  if (use_dtw) {
    const auto r = dtw(a, b, 1);
    return kMcdScale * r.total_cost / static_cast<double>(r.path.size());
  }
  const std::size_t n = std::min(a.rows(), b.rows());
  if (n == 0) throw MetricError("mcd: empty sequence");
  double total = 0;
  for (std::size_t t = 0; t < n; ++t) {
    double s = 0;
    for (std::size_t c = 1; c < a.cols(); ++c) s += (a(t, c) - b(t, c)) * (a(t, c) - b(t, c));
    total += std::sqrt(s);
  }
  return kMcdScale * total / static_cast<double>(n);
}

double mcd(const dsp::Waveform& a, const dsp::Waveform& b) {
  require_same_rate(a, b, "mcd");
  return mcd_from_cepstra(mel_cepstra(a), mel_cepstra(b), true);
}

// ------------------------------------------------------------------ STOI

namespace {

constexpr int kStoiRate = 10000;
constexpr std::size_t kStoiFrame = 256;
constexpr std::size_t kStoiFft = 512;
constexpr std::size_t kStoiHop = kStoiFrame / 2;
constexpr std::size_t kStoiBands = 15;
constexpr double kStoiMinFreq = 150.0;
constexpr std::size_t kStoiSegment = 30;
constexpr double kStoiBeta = -15.0;
constexpr double kStoiDynRange = 40.0;

// Symmetric Hann of length n without its zero end points.
std::vector<double> stoi_window() {
  std::vector<double> w(kStoiFrame);
  for (std::size_t i = 0; i < kStoiFrame; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) / static_cast<double>(kStoiFrame + 1));
  return w;
}

void remove_silent_frames(const std::vector<double>& x, const std::vector<double>& y, std::vector<double>& xs,
                          std::vector<double>& ys) {
  const auto w = stoi_window();
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i + kStoiFrame < x.size(); i += kStoiHop) starts.push_back(i);
  std::vector<double> energy(starts.size());
  double max_e = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < starts.size(); ++f) {
    double s = 0;
    for (std::size_t j = 0; j < kStoiFrame; ++j) {
      const double v = w[j] * x[starts[f] + j];
      s += v * v;
    }
    energy[f] = 20.0 * std::log10(std::sqrt(s) + kEps);
    max_e = std::max(max_e, energy[f]);
  }
  std::vector<std::size_t> kept;
  for (std::size_t f = 0; f < starts.size(); ++f)
    if (max_e - kStoiDynRange - energy[f] < 0) kept.push_back(starts[f]);
  const std::size_t len = kept.empty() ? 0 : (kept.size() - 1) * kStoiHop + kStoiFrame;
  xs.assign(len, 0.0);
  ys.assign(len, 0.0);
  for (std::size_t k = 0; k < kept.size(); ++k)
    for (std::size_t j = 0; j < kStoiFrame; ++j) {
      xs[k * kStoiHop + j] += w[j] * x[kept[k] + j];
      ys[k * kStoiHop + j] += w[j] * y[kept[k] + j];
    }
}

// Third-octave band envelopes, bands × frames.
Matrix<double> band_envelopes(const std::vector<double>& x) {
  const auto w = stoi_window();
  const std::size_t bins = kStoiFft / 2 + 1;
  // Band edges snapped to the nearest FFT bin, [lo, hi).
  std::vector<std::pair<std::size_t, std::size_t>> edges(kStoiBands);
  for (std::size_t b = 0; b < kStoiBands; ++b) {
    const double k = static_cast<double>(b);
    const double lo = kStoiMinFreq * std::pow(2.0, (2 * k - 1) / 6);
    const double hi = kStoiMinFreq * std::pow(2.0, (2 * k + 1) / 6);
    auto nearest = [&](double f) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < bins; ++i) {
        const double fi = static_cast<double>(i) * kStoiRate / static_cast<double>(kStoiFft);
        const double d = (fi - f) * (fi - f);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      return best;
    };
    edges[b] = {nearest(lo), nearest(hi)};
  }
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i + kStoiFrame < x.size(); i += kStoiHop) starts.push_back(i);
  Matrix<double> env(kStoiBands, starts.size());
  const auto& plan = dsp::cached_plan<double>(kStoiFft);
  std::vector<std::complex<double>> buf(kStoiFft);
  for (std::size_t f = 0; f < starts.size(); ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    for (std::size_t j = 0; j < kStoiFrame; ++j) buf[j] = w[j] * x[starts[f] + j];
    plan.forward(buf);
    for (std::size_t b = 0; b < kStoiBands; ++b) {
      double s = 0;
      for (std::size_t i = edges[b].first; i < edges[b].second; ++i) s += std::norm(buf[i]);
      env(b, f) = std::sqrt(s);
    }
  }
  return env;
}

}  // namespace

double stoi(const dsp::Waveform& reference, const dsp::Waveform& degraded) {
  require_same_rate(reference, degraded, "stoi");
  if (reference.samples.size() != degraded.samples.size())
    throw MetricError("stoi: signals must have equal length");
  const auto x10 = at_rate(reference, kStoiRate).samples;
  const auto y10 = at_rate(degraded, kStoiRate).samples;
  std::vector<double> x, y;
  remove_silent_frames(x10, y10, x, y);
  const auto X = band_envelopes(x), Y = band_envelopes(y);
  const std::size_t frames = X.cols();
  if (frames < kStoiSegment)
    throw MetricError("stoi: fewer than " + std::to_string(kStoiSegment) + " non-silent frames (" +
                      std::to_string(frames) + ")");
  const double clip = std::pow(10.0, -kStoiBeta / 20.0);
  double total = 0;
  std::size_t count = 0;
  std::vector<double> xs(kStoiSegment), ys(kStoiSegment);
  for (std::size_t m = kStoiSegment; m <= frames; ++m) {
    for (std::size_t b = 0; b < kStoiBands; ++b) {
      double nx = 0, ny = 0;
      for (std::size_t k = 0; k < kStoiSegment; ++k) {
        xs[k] = X(b, m - kStoiSegment + k);
        ys[k] = Y(b, m - kStoiSegment + k);
        nx += xs[k] * xs[k];
        ny += ys[k] * ys[k];
      }
      const double scale = std::sqrt(nx) / (std::sqrt(ny) + kEps);
      double mx = 0, my = 0;
      for (std::size_t k = 0; k < kStoiSegment; ++k) {
        ys[k] = std::min(ys[k] * scale, xs[k] * (1.0 + clip));
        mx += xs[k];
        my += ys[k];
      }
      mx /= kStoiSegment;
      my /= kStoiSegment;
      double sxy = 0, sxx = 0, syy = 0;
      for (std::size_t k = 0; k < kStoiSegment; ++k) {
        const double dx = xs[k] - mx, dy = ys[k] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
      }
      total += sxy / ((std::sqrt(sxx) + kEps) * (std::sqrt(syy) + kEps));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

// ------------------------------------------------------------------ FID

double frechet_distance(const Matrix<double>& a, const Matrix<double>& b) {
  if (a.cols() != b.cols()) throw MetricError("frechet_distance: feature widths differ");
  if (a.rows() < 2 || b.rows() < 2) throw MetricError("frechet_distance: need at least two frames per set");
  const auto D = static_cast<Eigen::Index>(a.cols());
  auto fit = [&](const Matrix<double>& m, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
        m.data(), static_cast<Eigen::Index>(m.rows()), D);
    mu = X.colwise().mean().transpose();
    const Eigen::MatrixXd centered = X.rowwise() - mu.transpose();
    cov = centered.transpose() * centered / static_cast<double>(m.rows() - 1);
  };
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a, cov_b;
  fit(a, mu_a, cov_a);
  fit(b, mu_b, cov_b);
  // tr((Σa Σb)^{1/2}) = tr((Σa^{1/2} Σb Σa^{1/2})^{1/2}), the inner matrix being symmetric PSD.
  const Eigen::MatrixXd ra = psd_sqrt(cov_a);
  const double tr_sqrt = psd_sqrt(ra * cov_b * ra).trace();
  const double d = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d);
}

double mfcc_fid(const std::vector<dsp::Waveform>& set_a, const std::vector<dsp::Waveform>& set_b) {
  if (set_a.size() < 2 || set_b.size() < 2) throw MetricError("mfcc_fid: each set needs at least two utterances");
  auto pool = [](const std::vector<dsp::Waveform>& set) {
    std::vector<Matrix<double>> parts;
    std::size_t rows = 0;
    for (const auto& w : set) {
      parts.push_back(mel_cepstra(w));
      rows += parts.back().rows();
    }
    Matrix<double> out(rows, parts[0].cols());
    std::size_t off = 0;
    for (const auto& p : parts) {
      std::copy(p.data(), p.data() + p.size(), out.data() + off);
      off += p.size();
    }
    return out;
  };
  return frechet_distance(pool(set_a), pool(set_b));
}

// ------------------------------------------------------------------ reports

std::vector<std::pair<std::string, std::string>> MetricReport::to_kv() const {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  return {{"f0_rmse", num(f0_rmse)}, {"las_rmse", num(las_rmse)}, {"mcd", num(mcd)},
          {"stoi", num(stoi)},       {"vuv_f1", num(vuv_f1)},     {"mfcc_fid", num(mfcc_fid)},
          {"n_pairs", std::to_string(n_pairs)}, {"n_f0_pairs", std::to_string(n_f0_pairs)},
          {"n_stoi_pairs", std::to_string(n_stoi_pairs)}};
}

std::string MetricReport::to_tsv() const {
  std::ostringstream os;
  os << "name\tf0_rmse\tlas_rmse\tmcd\tstoi\tvuv_f1\n";
  for (const auto& p : pairs)
    os << p.name << '\t' << p.f0_rmse << '\t' << p.las_rmse << '\t' << p.mcd << '\t' << p.stoi << '\t' << p.vuv_f1
       << '\n';
  os << "mean\t" << f0_rmse << '\t' << las_rmse << '\t' << mcd << '\t' << stoi << '\t' << vuv_f1 << '\n';
  return os.str();
}

MetricReport evaluate_pairs(
    const std::vector<std::pair<std::string, std::pair<dsp::Waveform, dsp::Waveform>>>& pairs) {
  if (pairs.empty()) throw MetricError("evaluate: no pairs");
  MetricReport r;
  std::vector<dsp::Waveform> refs, syns;
  double f0_sum = 0, stoi_sum = 0;
  for (const auto& [name, pr] : pairs) {
    const dsp::Waveform ref = at_rate(pr.first, dsp::kModelSampleRate);
    dsp::Waveform syn = at_rate(pr.second, dsp::kModelSampleRate);
    // Frame-aligned metrics (pitch, voicing, STOI) see the synthesized side
    // padded with silence or trimmed to the reference length.
    dsp::Waveform syn_eq = syn;
    syn_eq.samples.resize(ref.samples.size(), 0.0);

    PairMetrics m;
    m.name = name;
    F0Track fa, fb;
    m.f0_rmse = std::numeric_limits<double>::quiet_NaN();
    try {
      fa = extract_f0(ref);
      fb = extract_f0(syn_eq);
      m.f0_rmse = f0_rmse(fa, fb);
      f0_sum += m.f0_rmse;
      ++r.n_f0_pairs;
    } catch (const MetricError&) {
      // Reference shorter than one window, or nothing voiced in both.
    }
    m.las_rmse = las_rmse(ref, syn);
    m.mcd = mcd(ref, syn);
    try {
      m.stoi = stoi(ref, syn_eq);
      stoi_sum += m.stoi;
      ++r.n_stoi_pairs;
    } catch (const MetricError&) {
      // Too short after silence removal.
      m.stoi = std::numeric_limits<double>::quiet_NaN();
    }
    m.vuv_f1 = vuv_f1(fa, fb);
    r.las_rmse += m.las_rmse;
    r.mcd += m.mcd;
    r.vuv_f1 += m.vuv_f1;
    r.pairs.push_back(m);
    refs.push_back(ref);
    syns.push_back(std::move(syn));
  }
  r.n_pairs = pairs.size();
  const auto n = static_cast<double>(r.n_pairs);
  r.las_rmse /= n;
  r.mcd /= n;
  r.stoi = r.n_stoi_pairs ? stoi_sum / static_cast<double>(r.n_stoi_pairs) : std::numeric_limits<double>::quiet_NaN();
  r.vuv_f1 /= n;
  r.f0_rmse = r.n_f0_pairs ? f0_sum / static_cast<double>(r.n_f0_pairs) : std::numeric_limits<double>::quiet_NaN();
  r.mfcc_fid = refs.size() >= 2 ? mfcc_fid(refs, syns) : 0.0;
  return r;
}

MetricReport evaluate_testset(const std::filesystem::path& ref_manifest, const text::Registry& registry,
                              const std::filesystem::path& syn_dir) {
  const auto records = text::load_manifest(ref_manifest, registry);
  std::vector<std::pair<std::string, std::pair<dsp::Waveform, dsp::Waveform>>> pairs;
  for (const auto& r : records) {
    const std::string base = std::filesystem::path(r.audio_path).filename().string();
    const auto syn_path = syn_dir / base;
    if (!std::filesystem::exists(syn_path))
      throw MetricError("no synthesized counterpart for " + base + " in " + syn_dir.string());
    pairs.push_back({base, {dsp::read_wav(r.audio_path), dsp::read_wav(syn_path)}});
  }
  return evaluate_pairs(pairs);
}

void write_report(const std::filesystem::path& dir, const MetricReport& report) {
  std::filesystem::create_directories(dir);
  write_key_values(dir / "report.kv", report.to_kv());
  std::FILE* f = std::fopen((dir / "report.tsv").c_str(), "w");
  if (!f) throw MetricError("cannot write " + (dir / "report.tsv").string());
  const std::string tsv = report.to_tsv();
  std::fwrite(tsv.data(), 1, tsv.size(), f);
  std::fclose(f);
}

double run_external_metric(const std::string& binary, const std::filesystem::path& ref,
                           const std::filesystem::path& deg) {
  auto quote = [](const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
  };
  const std::string cmd = quote(binary) + " " + quote(ref.string()) + " " + quote(deg.string()) + " 2>/dev/null";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) throw MetricError("cannot run " + binary);
  std::string out;
  char buf[256];
  while (std::fgets(buf, sizeof buf, pipe.get())) out += buf;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::istringstream is(out);
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used == tok.size()) value = v;
    } catch (const std::exception&) {
    }
  }
  if (!std::isfinite(value)) throw MetricError(binary + " printed no number");
  return value;
}

}  // namespace mxtts::metrics
