#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "mxtts/text/frontend.hpp"
#include "support.hpp"

using namespace mxtts;
using namespace mxtts::text;

namespace {

Registry test_registry() {
  Registry r;
  r.add_language("ojibwe", 0, true);
  r.add_language("mikmaq", 1, false);
  r.add_speaker("JJ", 0);
  r.add_speaker("MJ", 1);
  r.add_speaker("AN", 2);
  return r;
}

UtteranceRecord rec(const std::string& text, int spk = 0, int lang = 1, double dur = 1.0) {
  return UtteranceRecord{"a_" + text + ".wav", text, spk, lang, dur};
}

std::map<int, double> totals(const std::vector<UtteranceRecord>& rs) {
  std::map<int, double> t;
  for (const auto& r : rs) t[r.speaker_id] += r.duration_s;
  return t;
}

}  // namespace

TEST_SUITE("text") {
  TEST_CASE("registry parse, lookups and contiguity") {
    const auto kv = KeyValueFile::parse(
        "speaker.JJ = 0\nspeaker.MJ = 1\nlanguage.ojibwe = 0\nlanguage.ojibwe.apostrophe_preserving = true\n"
        "language.mikmaq = 1\n");
    const auto reg = Registry::parse(kv);
    CHECK(reg.n_speakers() == 2);
    CHECK(reg.speaker_id("MJ") == 1);
    CHECK(reg.apostrophe_preserving(reg.language_id("ojibwe")));
    CHECK_FALSE(reg.apostrophe_preserving(reg.language_id("mikmaq")));
    CHECK_THROWS_AS(reg.speaker_id("ZZ"), TextError);
    CHECK(Registry::parse(KeyValueFile::parse(reg.render())).render() == reg.render());

    CHECK_THROWS(Registry::parse(KeyValueFile::parse("speaker.JJ = 0\nspeaker.MJ = 2\n")));
    CHECK_THROWS_AS(Registry::parse(KeyValueFile::parse("voice.JJ = 0\n")), ConfigError);
  }

  TEST_CASE("build_vocab: sorted union, punctuation removed, deterministic") {
    const auto reg = test_registry();
    const auto v = build_vocab({rec("ab"), rec("bc")}, reg);
    CHECK(v.symbols == std::vector<char32_t>{U'a', U'b', U'c'});
    for (int i = 0; i < 3; ++i) CHECK(v.id_of.at(v.symbols[i]) == i);
    CHECK(build_vocab({rec("ab"), rec("bc")}, reg).serialize() == v.serialize());

    const auto w = build_vocab({rec("a.")}, reg);
    CHECK(std::find(w.symbols.begin(), w.symbols.end(), U'.') == w.symbols.end());
    CHECK_THROWS_AS(build_vocab({}, reg), TextError);
  }

  TEST_CASE("build_vocab is permutation invariant") {
    const auto reg = test_registry();
    testsupport::for_all(30, 101, [&](testsupport::Gen& g, std::uint64_t seed) {
      std::vector<UtteranceRecord> rs;
      const std::string alphabet = "abcdefgh'ijk.lmn, opq";
      const std::size_t n = g.index(1, 8);
      for (std::size_t i = 0; i < n; ++i) {
        std::string s;
        const std::size_t len = g.index(1, 10);
        for (std::size_t j = 0; j < len; ++j) s += alphabet[g.index(0, alphabet.size() - 1)];
        s += 'z';
        rs.push_back(rec(s, 0, static_cast<int>(g.index(0, 1))));
      }
      auto shuffled = rs;
      std::shuffle(shuffled.begin(), shuffled.end(), g.engine());
      INFO("seed " << seed);
      CHECK(build_vocab(shuffled, reg).serialize() == build_vocab(rs, reg).serialize());
    });
  }

  TEST_CASE("tokenize: roundtrip, apostrophe rule, unknown characters") {
    const auto reg = test_registry();
    const auto v = build_vocab({rec("abc"), rec("ma'iingan", 0, 0), rec("aqq")}, reg);

    const auto t = tokenize("abc", 1, 0, v, reg);
    CHECK(detokenize(t.ids, v) == "abc");

    const auto oj = tokenize("ma'iingan", 0, 0, v, reg);
    CHECK(std::count(oj.ids.begin(), oj.ids.end(), v.id_of.at(U'\'')) == 1);
    CHECK(detokenize(oj.ids, v) == "ma'iingan");

    const auto mk = tokenize("aqq.", 1, 1, v, reg);
    CHECK(mk.ids == std::vector<int>{v.id_of.at(U'a'), v.id_of.at(U'q'), v.id_of.at(U'q')});
    CHECK(detokenize(tokenize("a'q", 1, 1, v, reg).ids, v) == "aq");

    try {
      tokenize("abx", 1, 0, v, reg);
      FAIL("expected an error");
    } catch (const TextError& e) {
      CHECK(std::string(e.what()).find("`x`") != std::string::npos);
    }
    CHECK_THROWS_AS(tokenize("...", 1, 0, v, reg), TextError);
  }

  TEST_CASE("normalization: NFC, lowercase, whitespace runs") {
    // "E" + combining acute composes to a single code point, then lowercases.
    CHECK(normalize_text("E\xCC\x81  Ab\t c!", false) == U"é ab c");
    CHECK(normalize_text("ma'iingan", true) == U"ma'iingan");
    CHECK(normalize_text("ma'iingan", false) == U"maiingan");
    CHECK(is_punctuation(U'¿'));
    CHECK_FALSE(is_punctuation(U'a'));
  }

  TEST_CASE("tokenize output holds no punctuation except a preserved apostrophe") {
    const auto reg = test_registry();
    const std::u32string pool = U"abcde'.,;:!?«»— ";
    testsupport::for_all(40, 102, [&](testsupport::Gen& g, std::uint64_t seed) {
      std::u32string s;
      const std::size_t len = g.index(1, 16);
      for (std::size_t j = 0; j < len; ++j) s += pool[g.index(0, pool.size() - 1)];
      s += U'a';
      const int lang = static_cast<int>(g.index(0, 1));
      const auto utf8 = to_utf8(s);
      const auto v = build_vocab({rec(utf8, 0, 0)}, reg);
      const auto ids = tokenize(utf8, lang, 0, v, reg).ids;
      INFO("seed " << seed);
      for (int id : ids) {
        const char32_t c = v.symbols.at(static_cast<std::size_t>(id));
        if (c == U'\'') CHECK(reg.apostrophe_preserving(lang));
        else CHECK_FALSE(is_punctuation(c));
      }
    });
  }

  TEST_CASE("tokenize/detokenize identity on in-vocabulary clean strings") {
    const auto reg = test_registry();
    const auto v = build_vocab({rec("abcdefghij klmnop")}, reg);
    testsupport::for_all(40, 103, [&](testsupport::Gen& g, std::uint64_t seed) {
      std::string s;
      const std::size_t len = g.index(1, 20);
      for (std::size_t j = 0; j < len; ++j) s += static_cast<char>('a' + g.index(0, 15));
      INFO("seed " << seed);
      CHECK(detokenize(tokenize(s, 1, 0, v, reg).ids, v) == s);
    });
  }

  TEST_CASE("vocab serialize roundtrip") {
    const auto v = CharVocab::from_symbols({U'a', U'é', U'\''});
    const auto w = CharVocab::deserialize(v.serialize());
    CHECK(w.symbols == v.symbols);
    CHECK(w.pad_id() == 3);
  }

  TEST_CASE("oversample examples") {
    SUBCASE("709.4 vs 143.0 minutes duplicates the smaller speaker five times") {
      std::map<int, std::vector<UtteranceRecord>> by;
      by[0] = {rec("a", 0, 0, 709.4 * 60)};
      by[1] = {rec("b", 1, 0, 100.0 * 60), rec("c", 1, 0, 43.0 * 60)};
      const auto out = oversample(by);
      CHECK(std::count_if(out.begin(), out.end(), [](auto& r) { return r.speaker_id == 1; }) == 10);
      CHECK(std::count_if(out.begin(), out.end(), [](auto& r) { return r.speaker_id == 0; }) == 1);
      CHECK(totals(out)[1] == doctest::Approx(5 * 143.0 * 60));
    }
    SUBCASE("equal durations leave the input unchanged") {
      std::map<int, std::vector<UtteranceRecord>> by;
      by[0] = {rec("a", 0, 0, 5), rec("b", 0, 0, 5)};
      by[1] = {rec("c", 1, 0, 10)};
      const auto out = oversample(by);
      REQUIRE(out.size() == 3);
      CHECK(out[0].text == "a");
      CHECK(out[1].text == "b");
      CHECK(out[2].text == "c");
    }
    SUBCASE("10 vs 30 minutes triples the first speaker, rounds appended in order") {
      std::map<int, std::vector<UtteranceRecord>> by;
      by[0] = {rec("x", 0, 0, 240), rec("y", 0, 0, 360)};
      by[1] = {rec("z", 1, 0, 1800)};
      const auto out = oversample(by);
      REQUIRE(out.size() == 7);
      const char* order[] = {"x", "y", "x", "y", "x", "y", "z"};
      for (int i = 0; i < 7; ++i) CHECK(out[i].text == order[i]);
      auto t = totals(out);
      CHECK(t[0] == doctest::Approx(1800));
      CHECK(t[0] <= 1.2 * t[1]);
    }
    SUBCASE("errors") {
      CHECK_THROWS_AS(oversample({}), TextError);
      std::map<int, std::vector<UtteranceRecord>> by;
      by[0] = {};
      CHECK_THROWS_AS(oversample(by), TextError);
    }
  }

  TEST_CASE("oversample keeps every speaker within the band of the maximum") {
    testsupport::for_all(200, 104, [](testsupport::Gen& g, std::uint64_t seed) {
      std::map<int, std::vector<UtteranceRecord>> by;
      const std::size_t n_spk = g.index(1, 5);
      for (std::size_t s = 0; s < n_spk; ++s) {
        const std::size_t n = g.index(1, 6);
        for (std::size_t i = 0; i < n; ++i)
          by[static_cast<int>(s)].push_back(rec("u", static_cast<int>(s), 0, g.uniform(0.5, g.coin() ? 3.0 : 30.0)));
      }
      double max_total = 0, longest = 0;
      for (auto& [s, rs] : by) {
        double t = 0;
        for (auto& r : rs) {
          t += r.duration_s;
          longest = std::max(longest, r.duration_s);
        }
        max_total = std::max(max_total, t);
      }
      const auto t = totals(oversample(by));
      INFO("seed " << seed);
      for (auto& [s, v] : t) {
        CHECK(v >= max_total / kOversampleBand - 1e-9);
        // Whole utterances can only land under the ceiling when none is
        // longer than the band's slack.
        if (longest <= (kOversampleBand - 1) * max_total) CHECK(v <= kOversampleBand * max_total + 1e-9);
      }
    });
  }

  TEST_CASE("load_manifest: records, line-numbered errors, duplicates legal") {
    const auto reg = test_registry();
    const auto dir = testsupport::scratch_dir("text_manifest");
    const auto good = dir / "good.tsv";
    {
      std::ofstream f(good);
      f << "a.wav\tJJ\tojibwe\tboozhoo\t1.5\n";
      f << "a.wav\tJJ\tojibwe\tboozhoo\t1.5\n";
      f << "/abs/b.wav\tMJ\tmikmaq\tpjila'si\t2.0\n";
    }
    const auto rs = load_manifest(good, reg);
    REQUIRE(rs.size() == 3);
    CHECK(rs[0].audio_path == rs[1].audio_path);
    CHECK(rs[0].audio_path == (dir / "a.wav").lexically_normal().string());
    CHECK(rs[2].audio_path == "/abs/b.wav");
    CHECK(rs[2].speaker_id == 1);
    CHECK(rs[2].duration_s == 2.0);

    write_manifest(dir / "copy.tsv", rs, reg);
    const auto again = load_manifest(dir / "copy.tsv", reg);
    REQUIRE(again.size() == 3);
    CHECK(again[2].text == "pjila'si");

    const auto bad = dir / "bad.tsv";
    {
      std::ofstream f(bad);
      f << "a.wav\tJJ\tojibwe\tboozhoo\t1.5\n";
      f << "b.wav\tJJ\tojibwe\n";
    }
    try {
      load_manifest(bad, reg);
      FAIL("expected an error");
    } catch (const TextError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    {
      std::ofstream f(bad);
      f << "a.wav\tZZ\tojibwe\tboozhoo\t1.5\n";
    }
    CHECK_THROWS_AS(load_manifest(bad, reg), TextError);
    CHECK_THROWS_AS(load_manifest(dir / "missing.tsv", reg), TextError);
  }
}
