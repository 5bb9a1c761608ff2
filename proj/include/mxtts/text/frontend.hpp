#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mxtts/kvfile.hpp"

namespace mxtts::text {

class TextError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LanguageInfo {
  std::string name;
  int id = 0;
  bool apostrophe_preserving = false;
};

struct SpeakerInfo {
  std::string name;
  int id = 0;
};

// Speaker and language names → integer IDs, plus per-language flags.
//
//   speaker.JJ = 0
//   language.ojibwe = 0
//   language.ojibwe.apostrophe_preserving = true
//
// IDs must be contiguous from 0 within each table.
class Registry {
 public:
  static Registry parse(const KeyValueFile& kv);
  static Registry load(const std::filesystem::path& path);

  void add_language(const std::string& name, int id, bool apostrophe_preserving);
  void add_speaker(const std::string& name, int id);

  int speaker_id(const std::string& name) const;
  int language_id(const std::string& name) const;
  const LanguageInfo& language(int id) const;
  const SpeakerInfo& speaker(int id) const;
  bool apostrophe_preserving(int language_id) const { return language(language_id).apostrophe_preserving; }

  std::size_t n_speakers() const noexcept { return speakers_.size(); }
  std::size_t n_languages() const noexcept { return languages_.size(); }
  const std::vector<LanguageInfo>& languages() const noexcept { return languages_; }
  const std::vector<SpeakerInfo>& speakers() const noexcept { return speakers_; }

  std::string render() const;
  void validate() const;

 private:
  std::vector<LanguageInfo> languages_;
  std::vector<SpeakerInfo> speakers_;
};

struct UtteranceRecord {
  std::string audio_path;
  std::string text;
  int speaker_id = 0;
  int language_id = 0;
  double duration_s = 0.0;
};

enum class UnkPolicy { kError };

struct CharVocab {
  std::vector<char32_t> symbols;
  std::unordered_map<char32_t, int> id_of;
  UnkPolicy unk_policy = UnkPolicy::kError;

  std::size_t size() const noexcept { return symbols.size(); }
  // One past the last symbol; never produced by tokenize.
  int pad_id() const noexcept { return static_cast<int>(symbols.size()); }

  static CharVocab from_symbols(std::vector<char32_t> symbols);
  std::string serialize() const;  // UTF-8 string of all symbols in ID order
  static CharVocab deserialize(const std::string& utf8);
};

struct TokenSequence {
  std::vector<int> ids;
  int language_id = 0;
  int speaker_id = 0;
};

// NFC-normalize, lowercase, collapse whitespace runs to one space and drop
// punctuation (Unicode P*). U+0027 survives when `keep_apostrophe` is set.
std::u32string normalize_text(const std::string& utf8, bool keep_apostrophe);
bool is_punctuation(char32_t c);

std::string to_utf8(const std::u32string& s);
std::u32string from_utf8(const std::string& s);

CharVocab build_vocab(const std::vector<UtteranceRecord>& records, const Registry& registry);

TokenSequence tokenize(const std::string& text, int language_id, int speaker_id, const CharVocab& vocab,
                       const Registry& registry);
std::string detokenize(const std::vector<int>& ids, const CharVocab& vocab);

// Duplicates whole utterances so each speaker's total lands in
// [max_total, 1.2 · max_total]. Output is ordered by speaker ID, then the
// original record order, then appended duplication rounds.
std::vector<UtteranceRecord> oversample(const std::map<int, std::vector<UtteranceRecord>>& records_by_speaker);

inline constexpr double kOversampleBand = 1.2;

std::map<int, std::vector<UtteranceRecord>> group_by_speaker(const std::vector<UtteranceRecord>& records);

// Tab-separated `audio_path speaker language text [duration_s]`. When the
// duration column is absent it is read from the WAV header. Relative audio
// paths are resolved against the manifest directory.
std::vector<UtteranceRecord> load_manifest(const std::filesystem::path& path, const Registry& registry);
void write_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records,
                    const Registry& registry);

}  // namespace mxtts::text
