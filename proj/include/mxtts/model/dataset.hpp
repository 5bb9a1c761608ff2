#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mxtts/dsp/audio.hpp"
#include "mxtts/model/trainer.hpp"
#include "mxtts/text/frontend.hpp"

// On-disk layout written by prepare_dataset:
//   registry.cfg      speaker/language table
//   vocab.txt         UTF-8 symbols in ID order
//   manifest.tsv      oversampled training manifest
//   mels/<stem>.mel   raw log-mel cache (frames × n_mels) per unique audio file
namespace mxtts::model {

struct PreparedDataset {
  text::Registry registry;
  text::CharVocab vocab;
  std::vector<text::UtteranceRecord> records;  // oversampled
  std::size_t n_unique = 0;
};

// Cache file for an audio path: <dir>/mels/<stem>.mel
std::filesystem::path mel_cache_path(const std::filesystem::path& dir, const std::string& audio_path);

PreparedDataset prepare_dataset(const std::filesystem::path& manifest, const std::filesystem::path& registry,
                                const std::filesystem::path& out_dir);
PreparedDataset load_prepared(const std::filesystem::path& dir);

struct TrainingSet {
  std::vector<TrainItem> items;
  MelStats stats;
};

// Tokenizes every record and attaches its normalized cached mel. Statistics
// come from the unique utterances only, so duplicates do not weigh in twice.
TrainingSet load_training_set(const std::filesystem::path& dir, const PreparedDataset& ds);

// In-memory variant used by tests and benchmarks: waveforms are given in
// record order and oversampling is applied here.
TrainingSet make_training_set(const std::vector<text::UtteranceRecord>& records,
                              const std::vector<dsp::Waveform>& audio, const text::Registry& registry,
                              const text::CharVocab& vocab);

}  // namespace mxtts::model
