#include "mxtts/model/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

namespace mxtts::corpus {

namespace {

constexpr int kHop = 256;
constexpr double kMaxHarmonicHz = 5000.0;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

struct Segment {
  int frames = 0;
  bool silent = false;
  double f1 = 0, f2 = 0;
  double noise = 0;  // fraction of aspiration noise
};

Segment segment_for(char32_t c) {
  Segment s;
  if (c == U' ') {
    s.frames = 2;
    s.silent = true;
    return s;
  }
  if (c == U'\'') {
    s.frames = 1;
    s.silent = true;
    return s;
  }
  const std::uint64_t h = mix64(static_cast<std::uint64_t>(c));
  s.frames = 3 + static_cast<int>(h % 4);
  s.f1 = 250.0 + static_cast<double>((h >> 8) % 700);
  s.f2 = 1000.0 + static_cast<double>((h >> 20) % 1800);
  s.noise = ((h >> 40) % 3 == 0) ? 0.3 : 0.0;
  return s;
}

struct SpeakerSpec {
  const char* name;
  const char* language;
  double f0;
};

constexpr SpeakerSpec kSpeakers[] = {
    {"JJ", "ojibwe", 110.0},
    {"NJ", "ojibwe", 205.0},
    {"MJ", "mikmaq", 150.0},
    {"AT", "maliseet", 240.0},
};

// Utterance → speaker cycle; uneven on purpose so oversampling has work.
constexpr int kSpeakerCycle[] = {0, 2, 0, 1, 3, 0, 2, 0, 1, 0, 3, 2, 0, 1, 0, 2,
                                 0, 3, 0, 1, 2, 0, 3, 0, 2, 1, 0, 3, 0, 2, 1, 0};

const std::vector<std::string>& syllables(const std::string& language) {
  static const std::vector<std::string> ojibwe = {"ma", "'i", "in", "gan", "ni", "shi", "bi", "ji", "gi",
                                                  "wa", "ko", "da", "zhi", "noo", "we", "g'"};
  static const std::vector<std::string> mikmaq = {"aq", "q", "ma", "ta", "lu", "wi", "je", "pu",
                                                  "ki", "sm", "ne", "to", "ql", "ik"};
  static const std::vector<std::string> maliseet = {"wol", "ast", "ok", "pe", "ciw", "te", "mi",
                                                    "ko", "nuh", "kis", "ona", "yu"};
  if (language == "ojibwe") return ojibwe;
  if (language == "mikmaq") return mikmaq;
  return maliseet;
}

std::string make_text(const std::string& language, std::mt19937_64& rng) {
  const auto& syl = syllables(language);
  std::uniform_int_distribution<std::size_t> pick(0, syl.size() - 1);
  std::uniform_int_distribution<int> n_words(1, 3), n_syl(1, 3);
  static const char* endings[] = {"", ".", ",", "?", "!"};
  std::uniform_int_distribution<int> end(0, 4);
  std::string text;
  const int words = n_words(rng);
  for (int w = 0; w < words; ++w) {
    if (w) text += ' ';
    std::string word;
    const int k = n_syl(rng);
    for (int s = 0; s < k; ++s) word += syl[pick(rng)];
    if (w == 0) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
    text += word;
  }
  // Non-preserving languages get a stray apostrophe to exercise filtering.
  if (language != "ojibwe" && end(rng) == 0) text += "'";
  return text + endings[end(rng)];
}

}  // namespace

dsp::Waveform render_text(const std::u32string& normalized_text, double f0_hz, std::uint64_t seed) {
  std::vector<Segment> segs;
  segs.push_back({2, true, 0, 0, 0});
  for (char32_t c : normalized_text) segs.push_back(segment_for(c));
  segs.push_back({2, true, 0, 0, 0});

  const int sr = dsp::kModelSampleRate;
  const int K = static_cast<int>(kMaxHarmonicHz / f0_hz);
  std::size_t total = 0;
  for (const auto& s : segs) total += static_cast<std::size_t>(s.frames) * kHop;

  auto amplitudes = [&](const Segment& s) {
    std::vector<double> a(static_cast<std::size_t>(K), 0.0);
    if (s.silent) return a;
    constexpr double bw = 140.0;
    for (int k = 1; k <= K; ++k) {
      const double f = k * f0_hz;
      const double r1 = (f - s.f1) / bw, r2 = (f - s.f2) / bw;
      a[static_cast<std::size_t>(k - 1)] = std::exp(-0.5 * r1 * r1) + 0.6 * std::exp(-0.5 * r2 * r2) + 0.03;
    }
    return a;
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  dsp::Waveform w;
  w.sample_rate = sr;
  w.samples.resize(total);
  std::vector<double> prev = amplitudes(segs[0]);
  double prev_noise = 0;
  std::size_t n = 0;
  double phase = 0;  // fundamental phase, harmonics use k·phase
  for (const auto& s : segs) {
    const std::vector<double> cur = amplitudes(s);
    const std::size_t len = static_cast<std::size_t>(s.frames) * kHop;
    const std::size_t fade = std::min<std::size_t>(len, kHop);
    for (std::size_t i = 0; i < len; ++i, ++n) {
      const double progress = static_cast<double>(n) / static_cast<double>(total);
      const double f0 = f0_hz * (1.0 - 0.08 * progress);
      phase += 2.0 * std::numbers::pi * f0 / sr;
      const double mix = i < fade ? static_cast<double>(i) / static_cast<double>(fade) : 1.0;
      double v = 0;
      for (int k = 1; k <= K; ++k) {
        const auto idx = static_cast<std::size_t>(k - 1);
        const double a = (1.0 - mix) * prev[idx] + mix * cur[idx];
        if (a > 0) v += a * std::sin(k * phase);
      }
      const double noise = (1.0 - mix) * prev_noise + mix * s.noise;
      v += noise * normal(rng);
      w.samples[n] = v;
    }
    prev = cur;
    prev_noise = s.noise;
  }
  double peak = 0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0)
    for (double& v : w.samples) v *= 0.5 / peak;
  return w;
}

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options) {
  SyntheticCorpus c;
  c.registry.add_language("ojibwe", 0, true);
  c.registry.add_language("mikmaq", 1, false);
  c.registry.add_language("maliseet", 2, false);
  for (int i = 0; i < 4; ++i) c.registry.add_speaker(kSpeakers[i].name, i);

  std::mt19937_64 rng(options.seed);
  for (std::size_t u = 0; u < options.n_utterances; ++u) {
    const int spk = kSpeakerCycle[u % std::size(kSpeakerCycle)];
    const auto& spec = kSpeakers[spk];
    const int lang = c.registry.language_id(spec.language);
    text::UtteranceRecord r;
    r.text = make_text(spec.language, rng);
    r.speaker_id = spk;
    r.language_id = lang;
    char name[32];
    std::snprintf(name, sizeof name, "utt_%03zu.wav", u);
    r.audio_path = name;
    auto normalized = text::normalize_text(r.text, c.registry.apostrophe_preserving(lang));
    c.audio.push_back(render_text(normalized, spec.f0, options.seed * 1000003ull + u));
    r.duration_s = c.audio.back().duration_s();
    c.records.push_back(std::move(r));
  }
  return c;
}

std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticOptions& options) {
  const auto corpus = make_synthetic_corpus(options);
  std::filesystem::create_directories(dir / "wav");
  std::vector<text::UtteranceRecord> records = corpus.records;
  for (std::size_t i = 0; i < records.size(); ++i) {
    dsp::write_wav(dir / "wav" / records[i].audio_path, corpus.audio[i]);
    records[i].audio_path = "wav/" + records[i].audio_path;
  }
  {
    std::ofstream reg(dir / "registry.cfg");
    if (!reg) throw std::runtime_error("cannot write " + (dir / "registry.cfg").string());
    reg << corpus.registry.render();
  }
  const auto manifest = dir / "manifest.tsv";
  text::write_manifest(manifest, records, corpus.registry);
  return manifest;
}

}  // namespace mxtts::corpus
