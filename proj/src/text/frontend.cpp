#include "mxtts/text/frontend.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mxtts/dsp/audio.hpp"

namespace mxtts::text {

// ---------------------------------------------------------------- registry

void Registry::add_language(const std::string& name, int id, bool apostrophe_preserving) {
  for (const auto& l : languages_)
    if (l.name == name) throw TextError("duplicate language `" + name + "`");
  languages_.push_back({name, id, apostrophe_preserving});
  std::sort(languages_.begin(), languages_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
}

void Registry::add_speaker(const std::string& name, int id) {
  for (const auto& s : speakers_)
    if (s.name == name) throw TextError("duplicate speaker `" + name + "`");
  speakers_.push_back({name, id});
  std::sort(speakers_.begin(), speakers_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
}

void Registry::validate() const {
  for (std::size_t i = 0; i < languages_.size(); ++i)
    if (languages_[i].id != static_cast<int>(i))
      throw TextError("language IDs must be contiguous from 0 (offending: " + languages_[i].name + ")");
  for (std::size_t i = 0; i < speakers_.size(); ++i)
    if (speakers_[i].id != static_cast<int>(i))
      throw TextError("speaker IDs must be contiguous from 0 (offending: " + speakers_[i].name + ")");
}

Registry Registry::parse(const KeyValueFile& kv) {
  Registry reg;
  std::map<std::string, bool> flags;
  for (const auto& e : kv.entries) {
    if (e.key.rfind("speaker.", 0) == 0) {
      reg.add_speaker(e.key.substr(8), static_cast<int>(parse_int(e.value, e.key)));
    } else if (e.key.rfind("language.", 0) == 0) {
      const auto rest = e.key.substr(9);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) {
        reg.add_language(rest, static_cast<int>(parse_int(e.value, e.key)), false);
      } else if (rest.substr(dot + 1) == "apostrophe_preserving") {
        flags[rest.substr(0, dot)] = parse_bool(e.value, e.key);
      } else {
        throw ConfigError("registry line " + std::to_string(e.line) + ": unknown key `" + e.key + "`");
      }
    } else {
      throw ConfigError("registry line " + std::to_string(e.line) + ": unknown key `" + e.key + "`");
    }
  }
  for (const auto& [name, flag] : flags) {
    auto it = std::find_if(reg.languages_.begin(), reg.languages_.end(),
                           [&](const auto& l) { return l.name == name; });
    if (it == reg.languages_.end()) throw ConfigError("flag for unregistered language `" + name + "`");
    it->apostrophe_preserving = flag;
  }
  reg.validate();
  return reg;
}

Registry Registry::load(const std::filesystem::path& path) { return parse(KeyValueFile::load(path)); }

int Registry::speaker_id(const std::string& name) const {
  for (const auto& s : speakers_)
    if (s.name == name) return s.id;
  throw TextError("unknown speaker `" + name + "`");
}

int Registry::language_id(const std::string& name) const {
  for (const auto& l : languages_)
    if (l.name == name) return l.id;
  throw TextError("unknown language `" + name + "`");
}

const LanguageInfo& Registry::language(int id) const {
  if (id < 0 || id >= static_cast<int>(languages_.size()))
    throw TextError("language id " + std::to_string(id) + " not registered");
  return languages_[static_cast<std::size_t>(id)];
}

const SpeakerInfo& Registry::speaker(int id) const {
  if (id < 0 || id >= static_cast<int>(speakers_.size()))
    throw TextError("speaker id " + std::to_string(id) + " not registered");
  return speakers_[static_cast<std::size_t>(id)];
}

std::string Registry::render() const {
  std::ostringstream ss;
  for (const auto& s : speakers_) ss << "speaker." << s.name << " = " << s.id << '\n';
  for (const auto& l : languages_) {
    ss << "language." << l.name << " = " << l.id << '\n';
    ss << "language." << l.name << ".apostrophe_preserving = " << (l.apostrophe_preserving ? "true" : "false")
       << '\n';
  }
  return ss.str();
}

// ---------------------------------------------------------------- unicode

std::string to_utf8(const std::u32string& s) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF32(reinterpret_cast<const UChar32*>(s.data()),
                                                        static_cast<int32_t>(s.size()));
  std::string out;
  u.toUTF8String(out);
  return out;
}

std::u32string from_utf8(const std::string& s) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(s);
  std::u32string out(static_cast<std::size_t>(u.countChar32()), U'\0');
  UErrorCode status = U_ZERO_ERROR;
  u.toUTF32(reinterpret_cast<UChar32*>(out.data()), static_cast<int32_t>(out.size()), status);
  if (U_FAILURE(status)) throw TextError("invalid UTF-8 input");
  return out;
}

bool is_punctuation(char32_t c) { return u_ispunct(static_cast<UChar32>(c)) != 0; }

namespace {

icu::UnicodeString nfc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw TextError("ICU NFC normalizer unavailable");
  auto out = n->normalize(s, status);
  if (U_FAILURE(status)) throw TextError("NFC normalization failed");
  return out;
}

}  // namespace

std::u32string normalize_text(const std::string& utf8, bool keep_apostrophe) {
  icu::UnicodeString u = nfc(icu::UnicodeString::fromUTF8(utf8));
  u.toLower(icu::Locale::getRoot());
  u = nfc(u);

  std::u32string out;
  out.reserve(static_cast<std::size_t>(u.length()));
  bool pending_space = false;
  for (int32_t i = 0; i < u.length(); i = u.moveIndex32(i, 1)) {
    const auto c = static_cast<char32_t>(u.char32At(i));
    if (u_isUWhiteSpace(static_cast<UChar32>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (is_punctuation(c) && !(keep_apostrophe && c == U'\'')) continue;
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------- vocab

CharVocab CharVocab::from_symbols(std::vector<char32_t> symbols) {
  CharVocab v;
  v.symbols = std::move(symbols);
  for (std::size_t i = 0; i < v.symbols.size(); ++i) {
    if (!v.id_of.emplace(v.symbols[i], static_cast<int>(i)).second)
      throw TextError("duplicate vocabulary symbol");
  }
  return v;
}

std::string CharVocab::serialize() const { return to_utf8(std::u32string(symbols.begin(), symbols.end())); }

CharVocab CharVocab::deserialize(const std::string& utf8) {
  const auto s = from_utf8(utf8);
  return from_symbols(std::vector<char32_t>(s.begin(), s.end()));
}

CharVocab build_vocab(const std::vector<UtteranceRecord>& records, const Registry& registry) {
  if (records.empty()) throw TextError("build_vocab: empty corpus");
  std::set<char32_t> chars;
  for (const auto& r : records) {
    const auto norm = normalize_text(r.text, registry.apostrophe_preserving(r.language_id));
    chars.insert(norm.begin(), norm.end());
  }
  return CharVocab::from_symbols(std::vector<char32_t>(chars.begin(), chars.end()));
}

TokenSequence tokenize(const std::string& text, int language_id, int speaker_id, const CharVocab& vocab,
                       const Registry& registry) {
  registry.speaker(speaker_id);
  const auto norm = normalize_text(text, registry.apostrophe_preserving(language_id));
  TokenSequence seq;
  seq.language_id = language_id;
  seq.speaker_id = speaker_id;
  seq.ids.reserve(norm.size());
  for (char32_t c : norm) {
    auto it = vocab.id_of.find(c);
    if (it == vocab.id_of.end())
      throw TextError("tokenize: character `" + to_utf8(std::u32string(1, c)) + "` (U+" +
                      [&] {
                        std::ostringstream ss;
                        ss << std::hex << std::uppercase << static_cast<unsigned>(c);
                        return ss.str();
                      }() +
                      ") is not in the vocabulary");
    seq.ids.push_back(it->second);
  }
  if (seq.ids.empty()) throw TextError("tokenize: text is empty after filtering: `" + text + "`");
  return seq;
}

std::string detokenize(const std::vector<int>& ids, const CharVocab& vocab) {
  std::u32string s;
  s.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= static_cast<int>(vocab.size()))
      throw TextError("detokenize: id " + std::to_string(id) + " out of range");
    s.push_back(vocab.symbols[static_cast<std::size_t>(id)]);
  }
  return to_utf8(s);
}

// ---------------------------------------------------------------- oversampling

std::map<int, std::vector<UtteranceRecord>> group_by_speaker(const std::vector<UtteranceRecord>& records) {
  std::map<int, std::vector<UtteranceRecord>> out;
  for (const auto& r : records) out[r.speaker_id].push_back(r);
  return out;
}

namespace {
double total_duration(const std::vector<UtteranceRecord>& rs) {
  double t = 0.0;
  for (const auto& r : rs) t += r.duration_s;
  return t;
}
}  // namespace

std::vector<UtteranceRecord> oversample(const std::map<int, std::vector<UtteranceRecord>>& records_by_speaker) {
  if (records_by_speaker.empty()) throw TextError("oversample: no speakers");
  double max_total = 0.0;
  for (const auto& [spk, rs] : records_by_speaker) {
    const double t = total_duration(rs);
    if (!(t > 0.0)) throw TextError("oversample: speaker " + std::to_string(spk) + " has zero total duration");
    max_total = std::max(max_total, t);
  }

  std::vector<UtteranceRecord> out;
  for (const auto& [spk, rs] : records_by_speaker) {
    const double total = total_duration(rs);
    // Whole-corpus copies: the ceiling of the duration ratio, unless that
    // overshoots the band, in which case the last round is partial. The
    // partial round skips utterances that would push past the band; if
    // nothing fits, the floor max/1.2 still wins over the ceiling.
    auto copies = static_cast<std::size_t>(std::ceil(max_total / total - 1e-12));
    copies = std::max<std::size_t>(copies, 1);
    const bool overshoots = static_cast<double>(copies) * total > kOversampleBand * max_total;
    const std::size_t full = overshoots ? copies - 1 : copies;
    double acc = 0.0;
    for (std::size_t round = 0; round < full; ++round)
      for (const auto& r : rs) {
        out.push_back(r);
        acc += r.duration_s;
      }
    if (overshoots) {
      const double ceiling = kOversampleBand * max_total;
      for (std::size_t i = 0; acc < max_total && i < rs.size(); ++i) {
        if (acc + rs[i].duration_s > ceiling) continue;
        out.push_back(rs[i]);
        acc += rs[i].duration_s;
      }
      for (std::size_t i = 0; acc < max_total / kOversampleBand && i < rs.size(); ++i) {
        out.push_back(rs[i]);
        acc += rs[i].duration_s;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- manifest

namespace {
std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    parts.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return parts;
}
}  // namespace

std::vector<UtteranceRecord> load_manifest(const std::filesystem::path& path, const Registry& registry) {
  std::ifstream f(path);
  if (!f) throw TextError("manifest not found: " + path.string());
  const auto base = path.parent_path();
  std::vector<UtteranceRecord> out;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw TextError(path.string() + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto parts = split_tabs(line);
    if (parts.size() < 4 || parts.size() > 5) fail("expected 4 or 5 tab-separated fields, got " + std::to_string(parts.size()));
    UtteranceRecord r;
    std::filesystem::path audio(parts[0]);
    if (parts[0].empty()) fail("empty audio_path");
    if (audio.is_relative()) audio = base / audio;
    r.audio_path = audio.lexically_normal().string();
    try {
      r.speaker_id = registry.speaker_id(parts[1]);
      r.language_id = registry.language_id(parts[2]);
    } catch (const TextError& e) {
      fail(e.what());
    }
    r.text = parts[3];
    if (trim(r.text).empty()) fail("missing text field");
    if (parts.size() == 5) {
      try {
        r.duration_s = parse_double(parts[4], "duration_s");
      } catch (const ConfigError& e) {
        fail(e.what());
      }
    } else {
      try {
        r.duration_s = dsp::wav_duration_seconds(r.audio_path);
      } catch (const std::exception& e) {
        fail(std::string("cannot determine duration: ") + e.what());
      }
    }
    if (!(r.duration_s > 0.0)) fail("duration must be positive");
    out.push_back(std::move(r));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records,
                    const Registry& registry) {
  std::ofstream f(path);
  if (!f) throw TextError("cannot write manifest " + path.string());
  f.precision(17);
  for (const auto& r : records)
    f << r.audio_path << '\t' << registry.speaker(r.speaker_id).name << '\t' << registry.language(r.language_id).name
      << '\t' << r.text << '\t' << r.duration_s << '\n';
}

}  // namespace mxtts::text
