#include "mxtts/model/dataset.hpp"

#include <fstream>
#include <iterator>
#include <map>

#include "mxtts/dsp/mel.hpp"

namespace mxtts::model {

namespace fs = std::filesystem;

fs::path mel_cache_path(const fs::path& dir, const std::string& audio_path) {
  return dir / "mels" / (fs::path(audio_path).stem().string() + ".mel");
}

PreparedDataset prepare_dataset(const fs::path& manifest, const fs::path& registry_path, const fs::path& out_dir) {
  PreparedDataset ds;
  ds.registry = text::Registry::load(registry_path);
  auto records = text::load_manifest(manifest, ds.registry);
  // The prepared manifest lives elsewhere, so its paths must not be relative.
  for (auto& r : records) r.audio_path = fs::absolute(r.audio_path).lexically_normal().string();
  if (records.empty()) throw std::runtime_error("manifest " + manifest.string() + " has no utterances");
  ds.vocab = text::build_vocab(records, ds.registry);

  fs::create_directories(out_dir / "mels");
  std::map<std::string, std::string> stem_owner;
  for (const auto& r : records) {
    const auto cache = mel_cache_path(out_dir, r.audio_path);
    const auto [it, fresh] = stem_owner.emplace(cache.string(), r.audio_path);
    if (!fresh) {
      if (it->second != r.audio_path)
        throw std::runtime_error("audio files " + it->second + " and " + r.audio_path + " share a file stem");
      continue;
    }
    try {
      const auto mel = dsp::melspectrogram(dsp::read_wav(r.audio_path));
      dsp::write_mel_cache(cache, mel.values.transposed());
    } catch (const std::exception& e) {
      throw std::runtime_error("utterance " + r.audio_path + ": " + e.what());
    }
  }
  ds.n_unique = stem_owner.size();
  ds.records = text::oversample(text::group_by_speaker(records));

  {
    std::ofstream os(out_dir / "vocab.txt", std::ios::binary);
    os << ds.vocab.serialize();
    std::ofstream rs(out_dir / "registry.cfg");
    rs << ds.registry.render();
    if (!os || !rs) throw std::runtime_error("cannot write to " + out_dir.string());
  }
  text::write_manifest(out_dir / "manifest.tsv", ds.records, ds.registry);
  return ds;
}

PreparedDataset load_prepared(const fs::path& dir) {
  PreparedDataset ds;
  ds.registry = text::Registry::load(dir / "registry.cfg");
  std::ifstream is(dir / "vocab.txt", std::ios::binary);
  if (!is) throw std::runtime_error("prepared data " + dir.string() + " has no vocab.txt");
  ds.vocab = text::CharVocab::deserialize(std::string(std::istreambuf_iterator<char>(is), {}));
  ds.records = text::load_manifest(dir / "manifest.tsv", ds.registry);
  std::map<std::string, int> unique;
  for (const auto& r : ds.records) unique[r.audio_path] = 0;
  ds.n_unique = unique.size();
  return ds;
}

namespace {

TrainingSet assemble(const std::vector<text::UtteranceRecord>& records, const std::map<std::string, Matrix<float>>& raw,
                     const text::Registry& registry, const text::CharVocab& vocab) {
  std::vector<Matrix<float>> unique;
  for (const auto& [path, m] : raw) unique.push_back(m);
  TrainingSet ts;
  ts.stats = compute_mel_stats(unique);
  for (const auto& r : records) {
    TrainItem item;
    item.id = r.audio_path;
    try {
      item.tokens = text::tokenize(r.text, r.language_id, r.speaker_id, vocab, registry);
    } catch (const std::exception& e) {
      throw std::runtime_error("utterance " + r.audio_path + ": " + e.what());
    }
    item.frames = ts.stats.normalize(raw.at(r.audio_path));
    ts.items.push_back(std::move(item));
  }
  return ts;
}

}  // namespace

TrainingSet load_training_set(const fs::path& dir, const PreparedDataset& ds) {
  std::map<std::string, Matrix<float>> raw;
  for (const auto& r : ds.records) {
    if (raw.count(r.audio_path)) continue;
    const auto cache = mel_cache_path(dir, r.audio_path);
    if (!fs::exists(cache)) throw std::runtime_error("missing mel cache " + cache.string() + " for " + r.audio_path);
    raw.emplace(r.audio_path, dsp::read_mel_cache(cache));
  }
  return assemble(ds.records, raw, ds.registry, ds.vocab);
}

TrainingSet make_training_set(const std::vector<text::UtteranceRecord>& records,
                              const std::vector<dsp::Waveform>& audio, const text::Registry& registry,
                              const text::CharVocab& vocab) {
  if (records.size() != audio.size()) throw std::invalid_argument("make_training_set: one waveform per record");
  std::map<std::string, Matrix<float>> raw;
  for (std::size_t i = 0; i < records.size(); ++i)
    raw.emplace(records[i].audio_path, dsp::melspectrogram(audio[i]).values.transposed());
  return assemble(text::oversample(text::group_by_speaker(records)), raw, registry, vocab);
}

}  // namespace mxtts::model
