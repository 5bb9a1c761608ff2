#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mxtts/dsp/audio.hpp"
#include "mxtts/text/frontend.hpp"

// Deterministic stand-in corpus: every character maps to a fixed sustained
// harmonic sound (speaker-specific pitch, character-specific resonances and
// length), so text fully determines the mel sequence up to speaker.
namespace mxtts::corpus {

struct SyntheticOptions {
  std::size_t n_utterances = 64;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  text::Registry registry;
  std::vector<text::UtteranceRecord> records;  // audio_path is a bare file name
  std::vector<dsp::Waveform> audio;
};

// Four speakers over three languages: JJ and NJ (ojibwe, apostrophe
// preserving), MJ (mikmaq), AT (maliseet), with unequal utterance counts.
SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options = {});

// Renders one utterance at 22050 Hz.
dsp::Waveform render_text(const std::u32string& normalized_text, double f0_hz, std::uint64_t seed);

// Writes <dir>/wav/*.wav, <dir>/manifest.tsv and <dir>/registry.cfg.
// Returns the manifest path.
std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticOptions& options = {});

}  // namespace mxtts::corpus
