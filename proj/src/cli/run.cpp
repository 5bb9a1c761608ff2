#include "mxtts/cli/run.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "mxtts/bench/bench.hpp"
#include "mxtts/dsp/mel.hpp"
#include "mxtts/metrics/metrics.hpp"
#include "mxtts/model/checkpoint.hpp"
#include "mxtts/model/dataset.hpp"
#include "mxtts/model/synthetic.hpp"

namespace mxtts::cli {

namespace fs = std::filesystem;

std::string to_string(Command c) {
  switch (c) {
    case Command::kPrepare: return "prepare";
    case Command::kTrain: return "train";
    case Command::kSynth: return "synth";
    case Command::kEval: return "eval";
    case Command::kBench: return "bench";
  }
  return "?";
}

Command parse_command(const std::string& s) {
  for (auto c : {Command::kPrepare, Command::kTrain, Command::kSynth, Command::kEval, Command::kBench})
    if (to_string(c) == s) return c;
  throw ConfigError("unknown command `" + s + "`");
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::size_t parse_size(const std::string& v, const std::string& key) {
  const long long n = parse_int(v, key);
  if (n < 0) throw ConfigError("key `" + key + "`: must be non-negative");
  return static_cast<std::size_t>(n);
}

std::vector<std::size_t> parse_size_list(const std::string& v, const std::string& key) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(trim(item), key));
  if (out.empty()) throw ConfigError("key `" + key + "`: empty list");
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& run_keys() {
  static const std::map<std::string, Setter> keys = [] {
    std::map<std::string, Setter> m;
    auto path = [](fs::path RunConfig::*f) {
      return [f](RunConfig& c, const std::string& v, const std::string&) { c.*f = v; };
    };
    auto size = [](std::size_t RunConfig::*f) {
      return [f](RunConfig& c, const std::string& v, const std::string& k) { c.*f = parse_size(v, k); };
    };
    auto str = [](std::string RunConfig::*f) {
      return [f](RunConfig& c, const std::string& v, const std::string&) { c.*f = v; };
    };
    m["seed"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.seed = static_cast<std::uint64_t>(parse_size(v, k));
    };
    m["out"] = path(&RunConfig::out);
    m["checkpoint"] = path(&RunConfig::checkpoint);
    m["data"] = path(&RunConfig::data);
    m["manifest"] = path(&RunConfig::manifest);
    m["registry"] = path(&RunConfig::registry);
    m["text"] = path(&RunConfig::text);
    m["syn_dir"] = path(&RunConfig::syn_dir);
    m["make_synthetic"] = size(&RunConfig::make_synthetic);
    m["epochs"] = size(&RunConfig::epochs);
    m["checkpoint_every"] = size(&RunConfig::checkpoint_every);
    m["batch_size"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.optim.batch_size = parse_size(v, k);
    };
    m["lr"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.optim.lr = parse_double(v, k); };
    m["cosine"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.optim.cosine = parse_bool(v, k); };
    m["grad_clip"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.optim.grad_clip = parse_double(v, k);
    };
    m["steps"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.steps = static_cast<int>(parse_int(v, k));
    };
    m["griffin_lim_iters"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.griffin_lim_iters = static_cast<int>(parse_int(v, k));
    };
    m["speaker"] = str(&RunConfig::speaker);
    m["language"] = str(&RunConfig::language);
    m["pesq"] = str(&RunConfig::pesq);
    m["bench_batch"] = size(&RunConfig::bench_batch);
    m["bench_batches"] = size(&RunConfig::bench_batches);
    m["bench_tokens"] = size(&RunConfig::bench_tokens);
    m["bench_dim"] = size(&RunConfig::bench_dim);
    m["bench_seq_lens"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.bench_seq_lens = parse_size_list(v, k);
    };
    m["bench_scaling"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.bench_scaling = parse_bool(v, k);
    };
    m["threads"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.threads = static_cast<int>(parse_int(v, k));
    };
    return m;
  }();
  return keys;
}

}  // namespace

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& keys = run_keys();
  if (auto it = keys.find(key); it != keys.end()) {
    it->second(cfg, value, key);
    return;
  }
  bool known = false;
  try {
    known = cfg.model.set(key, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("key `" + key + "`: " + e.what());
  }
  if (!known) throw ConfigError("unknown config key `" + key + "`");
}

KeyValues RunConfig::to_kv() const {
  KeyValues kv = {
      {"command", to_string(command)},
      {"seed", std::to_string(seed)},
      {"out", out.string()},
      {"checkpoint", checkpoint.string()},
      {"data", data.string()},
      {"manifest", manifest.string()},
      {"registry", registry.string()},
      {"text", text.string()},
      {"syn_dir", syn_dir.string()},
      {"make_synthetic", std::to_string(make_synthetic)},
      {"epochs", std::to_string(epochs)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"batch_size", std::to_string(optim.batch_size)},
      {"lr", fmt(optim.lr)},
      {"cosine", optim.cosine ? "true" : "false"},
      {"grad_clip", fmt(optim.grad_clip)},
      {"steps", std::to_string(steps)},
      {"griffin_lim_iters", std::to_string(griffin_lim_iters)},
      {"speaker", speaker},
      {"language", language},
      {"pesq", pesq},
      {"bench_batch", std::to_string(bench_batch)},
      {"bench_batches", std::to_string(bench_batches)},
      {"bench_tokens", std::to_string(bench_tokens)},
      {"bench_seq_lens", join(bench_seq_lens)},
      {"bench_dim", std::to_string(bench_dim)},
      {"bench_scaling", bench_scaling ? "true" : "false"},
      {"threads", std::to_string(threads)},
  };
  for (auto& e : model.to_kv()) kv.push_back(std::move(e));
  return kv;
}

RunConfig parse_config(Command command, const std::optional<fs::path>& file, const KeyValues& overrides) {
  RunConfig cfg;
  cfg.command = command;
  if (file) {
    const auto kv = KeyValueFile::load(*file);
    for (const auto& e : kv.entries) {
      try {
        set_key(cfg, e.key, e.value);
      } catch (const ConfigError& err) {
        throw ConfigError(file->string() + ":" + std::to_string(e.line) + ": " + err.what());
      }
    }
  }
  for (const auto& [k, v] : overrides) set_key(cfg, k, v);
  if (cfg.threads < 1) throw ConfigError("key `threads`: must be >= 1");
  if (cfg.steps < 1) throw ConfigError("key `steps`: must be >= 1");
  return cfg;
}

void validate_paths(const RunConfig& cfg) {
  auto need = [](const fs::path& p, const std::string& key) {
    if (p.empty()) throw ConfigError("missing required path `" + key + "`");
    if (!fs::exists(p)) throw ConfigError("`" + key + "` does not exist: " + p.string());
  };
  switch (cfg.command) {
    case Command::kPrepare:
      if (cfg.make_synthetic == 0) {
        need(cfg.manifest, "manifest");
        need(cfg.registry, "registry");
      }
      break;
    case Command::kTrain:
      need(cfg.data, "data");
      break;
    case Command::kSynth:
      need(cfg.checkpoint, "checkpoint");
      if (cfg.text.empty() == cfg.manifest.empty()) throw ConfigError("synth needs exactly one of `text` or `manifest`");
      need(cfg.text.empty() ? cfg.manifest : cfg.text, cfg.text.empty() ? "manifest" : "text");
      break;
    case Command::kEval:
      need(cfg.manifest, "manifest");
      need(cfg.registry, "registry");
      need(cfg.syn_dir, "syn_dir");
      break;
    case Command::kBench:
      if (!cfg.checkpoint.empty()) need(cfg.checkpoint, "checkpoint");
      break;
  }
}

void EventLog::open_file(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  file_.open(path, std::ios::app);
  if (!file_) throw std::runtime_error("cannot open log " + path.string());
}

void EventLog::event(const std::string& name, const KeyValues& fields) {
  std::string line = "event=" + name;
  for (const auto& [k, v] : fields) {
    const bool quote = v.empty() || v.find_first_of(" \t\"") != std::string::npos;
    line += " " + k + "=" + (quote ? "\"" + v + "\"" : v);
  }
  line += "\n";
  os_ << line << std::flush;
  if (file_.is_open()) file_ << line << std::flush;
}

namespace {

void write_record(const RunConfig& cfg, const fs::path& hashed_checkpoint, const KeyValues& extra) {
  KeyValues kv = cfg.to_kv();
  if (!hashed_checkpoint.empty()) {
    kv.emplace_back("checkpoint_path", hashed_checkpoint.string());
    kv.emplace_back("checkpoint_sha1", model::git_blob_sha1(hashed_checkpoint));
  }
  for (const auto& e : extra) kv.push_back(e);
  write_key_values(cfg.out / ("run_" + to_string(cfg.command) + ".kv"), kv);
}

void run_prepare(const RunConfig& cfg, EventLog& log) {
  fs::path manifest = cfg.manifest, registry = cfg.registry;
  if (cfg.make_synthetic > 0) {
    corpus::SyntheticOptions opt;
    opt.n_utterances = cfg.make_synthetic;
    opt.seed = cfg.seed;
    manifest = corpus::write_synthetic_corpus(cfg.out / "corpus", opt);
    registry = cfg.out / "corpus" / "registry.cfg";
    log.event("synthetic_corpus", {{"manifest", manifest.string()}, {"utterances", std::to_string(opt.n_utterances)}});
  }
  const auto ds = model::prepare_dataset(manifest, registry, cfg.out);
  log.event("prepared", {{"dir", cfg.out.string()},
                         {"unique_utterances", std::to_string(ds.n_unique)},
                         {"oversampled_utterances", std::to_string(ds.records.size())},
                         {"vocab_size", std::to_string(ds.vocab.size())},
                         {"speakers", std::to_string(ds.registry.n_speakers())},
                         {"languages", std::to_string(ds.registry.n_languages())}});
  write_record(cfg, {}, {});
}

void run_train(const RunConfig& cfg, EventLog& log) {
  const auto ds = model::load_prepared(cfg.data);
  const auto set = model::load_training_set(cfg.data, ds);
  model::ModelConfig mc = cfg.model;
  mc.n_vocab = ds.vocab.size();
  mc.n_speakers = ds.registry.n_speakers();
  mc.n_languages = ds.registry.n_languages();
  mc.validate();

  model::TrainState state(mc, cfg.seed);
  state.model.stats() = set.stats;
  model::OptimConfig oc = cfg.optim;
  oc.total_epochs = cfg.epochs;
  log.event("train_start", {{"items", std::to_string(set.items.size())},
                            {"parameters", std::to_string(state.model.params().count())},
                            {"mixer", seqmix::to_string(mc.mixer)}});

  auto save = [&](const fs::path& path) {
    model::CheckpointMeta meta{state.step, state.epoch, cfg.seed};
    model::save_checkpoint(path, state.model, ds.vocab, ds.registry, meta, &state.adam);
    log.event("checkpoint", {{"path", path.string()}, {"sha1", model::git_blob_sha1(path)}});
  };
  double first = 0;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    const auto s = model::train_epoch(state, set.items, oc);
    if (e == 1) first = s.total;
    log.event("epoch", {{"epoch", std::to_string(e)},
                        {"loss", fmt(s.total)},
                        {"cfm", fmt(s.cfm)},
                        {"duration", fmt(s.duration)},
                        {"prior", fmt(s.prior)},
                        {"lr", fmt(s.lr_last)},
                        {"ratio_to_first", fmt(first > 0 ? s.total / first : 0.0)}});
    if (cfg.checkpoint_every && e % cfg.checkpoint_every == 0 && e != cfg.epochs) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04zu.ckpt", e);
      save(cfg.out / name);
    }
  }
  const auto final_path = cfg.out / "final.ckpt";
  save(final_path);
  write_record(cfg, final_path, {{"epochs_run", std::to_string(cfg.epochs)}});
}

struct SynthJob {
  std::string name;
  text::TokenSequence tokens;
};

void run_synth(const RunConfig& cfg, EventLog& log) {
  auto ck = model::load_checkpoint(cfg.checkpoint);
  const auto& reg = ck.registry;
  std::vector<SynthJob> jobs;
  if (!cfg.text.empty()) {
    const int spk = cfg.speaker.empty() ? 0 : reg.speaker_id(cfg.speaker);
    const int lang = cfg.language.empty() ? 0 : reg.language_id(cfg.language);
    std::ifstream is(cfg.text);
    std::string line;
    std::size_t index = 0;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      char name[32];
      std::snprintf(name, sizeof name, "%03zu", index);
      int s = spk, l = lang;
      std::string body = line;
      // Optional `speaker<TAB>language<TAB>text` form.
      if (const auto t1 = line.find('\t'); t1 != std::string::npos) {
        const auto t2 = line.find('\t', t1 + 1);
        if (t2 == std::string::npos) throw std::runtime_error(cfg.text.string() + ": line " + std::to_string(index) +
                                                              " has one tab; expected speaker, language, text");
        s = reg.speaker_id(line.substr(0, t1));
        l = reg.language_id(line.substr(t1 + 1, t2 - t1 - 1));
        body = line.substr(t2 + 1);
      }
      try {
        jobs.push_back({name, text::tokenize(body, l, s, ck.vocab, reg)});
      } catch (const std::exception& e) {
        throw std::runtime_error(cfg.text.string() + ": line " + std::to_string(index) + ": " + e.what());
      }
      ++index;
    }
  } else {
    for (const auto& r : text::load_manifest(cfg.manifest, reg)) {
      try {
        jobs.push_back({fs::path(r.audio_path).stem().string(),
                        text::tokenize(r.text, r.language_id, r.speaker_id, ck.vocab, reg)});
      } catch (const std::exception& e) {
        throw std::runtime_error("utterance " + r.audio_path + ": " + e.what());
      }
    }
  }
  fs::create_directories(cfg.out);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    std::mt19937_64 rng(cfg.seed + i);
    const auto syn = ck.model->synthesize(jobs[i].tokens, rng, cfg.steps);
    const Matrix<float> raw = ck.model->stats().denormalize(syn.frames);  // T × n_mels
    dsp::write_mel_cache(cfg.out / (jobs[i].name + ".mel"), raw);
    dsp::MelSpectrogram mel;
    mel.values = raw.transposed();
    const auto wav = dsp::griffin_lim_invert(mel, cfg.griffin_lim_iters, cfg.seed + i);
    dsp::write_wav(cfg.out / (jobs[i].name + ".wav"), wav);
    std::size_t total = 0;
    for (int d : syn.durations) total += static_cast<std::size_t>(d);
    log.event("synth", {{"name", jobs[i].name},
                        {"tokens", std::to_string(jobs[i].tokens.ids.size())},
                        {"frames", std::to_string(syn.frames.rows())},
                        {"duration_sum", std::to_string(total)},
                        {"seconds", fmt(bench::frames_to_seconds(syn.frames.rows()))}});
  }
  write_record(cfg, cfg.checkpoint, {{"outputs", std::to_string(jobs.size())}});
}

void run_eval(const RunConfig& cfg, EventLog& log) {
  const auto reg = text::Registry::load(cfg.registry);
  const auto report = metrics::evaluate_testset(cfg.manifest, reg, cfg.syn_dir);
  metrics::write_report(cfg.out, report);
  KeyValues fields = report.to_kv();
  if (!cfg.pesq.empty()) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& r : text::load_manifest(cfg.manifest, reg)) {
      const auto base = fs::path(r.audio_path).filename();
      sum += metrics::run_external_metric(cfg.pesq, r.audio_path, cfg.syn_dir / base);
      ++n;
    }
    fields.emplace_back("pesq", fmt(sum / static_cast<double>(n)));
    write_key_values(cfg.out / "report.kv", fields);
  }
  log.event("eval", fields);
  write_record(cfg, {}, fields);
}

void run_bench(const RunConfig& cfg, EventLog& log) {
  std::unique_ptr<model::AcousticModel<float>> owned;
  const model::AcousticModel<float>* model = nullptr;
  fs::path hashed;
  if (!cfg.checkpoint.empty()) {
    auto ck = model::load_checkpoint(cfg.checkpoint);
    owned = std::move(ck.model);
    hashed = cfg.checkpoint;
  } else {
    auto mc = cfg.model;
    // Without a checkpoint the table sizes only need to be plausible.
    if (mc.n_vocab == 0) mc.n_vocab = 60;
    if (mc.n_speakers == 0) mc.n_speakers = 1;
    if (mc.n_languages == 0) mc.n_languages = 1;
    mc.validate();
    owned = std::make_unique<model::AcousticModel<float>>(mc, cfg.seed);
  }
  model = owned.get();
  const auto mixer = seqmix::to_string(model->config().mixer);
  const std::uint64_t before = model->params().checksum();

  std::vector<text::TokenSequence> inputs;
  for (std::size_t len : {cfg.bench_tokens / 2, cfg.bench_tokens, cfg.bench_tokens * 3 / 2}) {
    text::TokenSequence ts;
    for (std::size_t i = 0; i < std::max<std::size_t>(len, 1); ++i)
      ts.ids.push_back(static_cast<int>(1 + (i * 7) % std::max<std::size_t>(model->config().n_vocab - 1, 1)));
    inputs.push_back(ts);
  }
  std::vector<bench::BenchReport> rows;
  bench::BenchReport row;
  row.mixer = mixer;
  row.threads = cfg.threads;
  row.batch = cfg.bench_batch;
  row.seq_len = cfg.bench_tokens;
  const auto tp = bench::measure_throughput(*model, inputs, cfg.bench_batch, cfg.bench_batches, cfg.seed);
  row.throughput_ups = tp.utterances_per_s;
  row.audio_seconds_per_s = tp.audio_seconds_per_s;
  row.rtf = bench::measure_rtf(*model, inputs[1], cfg.seed);
  row.peak_bytes = bench::measure_peak_memory(*model, cfg.bench_batch, cfg.bench_tokens, cfg.seed);
  rows.push_back(row);
  log.event("bench_model", {{"mixer", mixer},
                            {"batch", std::to_string(row.batch)},
                            {"throughput_ups", fmt(row.throughput_ups)},
                            {"audio_s_per_s", fmt(row.audio_seconds_per_s)},
                            {"rtf", fmt(row.rtf)},
                            {"peak_bytes", std::to_string(row.peak_bytes)}});

  if (cfg.bench_scaling) {
    bench::MixerBenchShape shape;
    shape.dim = cfg.bench_dim;
    const std::vector<seqmix::MixerKind> kinds(std::begin(seqmix::kAllMixers), std::end(seqmix::kAllMixers));
    const auto scaling = bench::scaling_report(kinds, cfg.bench_seq_lens, shape, cfg.seed);
    for (const auto& s : scaling) {
      for (std::size_t i = 0; i < s.seq_lens.size(); ++i) {
        bench::BenchReport r;
        r.mixer = seqmix::to_string(s.mixer);
        r.threads = 1;
        r.batch = 1;
        r.seq_len = s.seq_lens[i];
        r.mixer_peak_bytes = bench::measure_mixer_peak_memory(s.mixer, shape, 1, s.seq_lens[i], cfg.seed);
        r.slope = s.fit.slope;
        r.r2 = s.fit.r2;
        r.slope_reliable = s.reliable();
        rows.push_back(r);
      }
      log.event("bench_scaling", {{"mixer", seqmix::to_string(s.mixer)},
                                  {"slope", fmt(s.fit.slope)},
                                  {"r2", fmt(s.fit.r2)},
                                  {"reliable", s.reliable() ? "true" : "false"}});
    }
  }

  const std::uint64_t after = model->params().checksum();
  if (before != after) throw std::logic_error("benchmark changed model parameters");
  log.event("bench_params", {{"checksum", std::to_string(after)}, {"unchanged", "true"}});

  fs::create_directories(cfg.out);
  {
    std::ofstream os(cfg.out / "bench.tsv");
    os << bench::to_tsv(rows);
    if (!os) throw std::runtime_error("cannot write " + (cfg.out / "bench.tsv").string());
  }
  write_key_values(cfg.out / "bench.kv", bench::to_kv(rows));
  write_record(cfg, hashed, {});
}

}  // namespace

void run(const RunConfig& cfg, EventLog& log) {
  KeyValues resolved = cfg.to_kv();
  log.event("config", resolved);
  bench::ScopedThreads pin(cfg.threads);
  switch (cfg.command) {
    case Command::kPrepare: return run_prepare(cfg, log);
    case Command::kTrain: return run_train(cfg, log);
    case Command::kSynth: return run_synth(cfg, log);
    case Command::kEval: return run_eval(cfg, log);
    case Command::kBench: return run_bench(cfg, log);
  }
}

int dispatch(const RunConfig& cfg, EventLog& log) {
  try {
    validate_paths(cfg);
    fs::create_directories(cfg.out);
    log.open_file(cfg.out / "run.log");
    run(cfg, log);
    log.event("done", {{"command", to_string(cfg.command)}, {"status", "0"}});
    return 0;
  } catch (const std::exception& e) {
    log.event("error", {{"command", to_string(cfg.command)}, {"message", e.what()}});
    return 1;
  }
}

}  // namespace mxtts::cli
