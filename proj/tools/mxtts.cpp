// mxtts: prepare | train | synth | eval | bench
#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>

#include "mxtts/cli/run.hpp"

namespace {

using mxtts::cli::Command;

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::map<std::string, std::string> values;
  bool desk_scale = false;
};

void add_value(CLI::App* sub, Flags& f, const std::string& flag, const std::string& key, const std::string& help) {
  sub->add_option_function<std::string>(
      flag, [&f, key](const std::string& v) { f.values[key] = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilingual flow-matching TTS with pluggable sequence mixers"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<Command, std::string>> commands = {
      {Command::kPrepare, "Build vocab, mel cache and oversampled manifest"},
      {Command::kTrain, "Train an acoustic model on a prepared dataset"},
      {Command::kSynth, "Synthesize mels and WAVs from text lines or a manifest"},
      {Command::kEval, "Score synthesized WAVs against references"},
      {Command::kBench, "Throughput, RTF, peak memory and scaling benchmarks"},
  };
  std::map<CLI::App*, Command> by_app;
  for (const auto& [cmd, help] : commands) {
    auto* sub = app.add_subcommand(mxtts::cli::to_string(cmd), help);
    by_app[sub] = cmd;
    sub->add_option("--config", flags.config, "key = value config file");
    add_value(sub, flags, "--seed", "seed", "RNG seed (default 0)");
    add_value(sub, flags, "--out", "out", "output directory");
    add_value(sub, flags, "--checkpoint", "checkpoint", "checkpoint file");
    add_value(sub, flags, "--mixer", "mixer", "attention | mamba2 | hydra | fnet");
    sub->add_flag("--desk-scale", flags.desk_scale, "shrink widths for CPU training");
    add_value(sub, flags, "--threads", "threads", "kernel threads (1 = serial kernels)");
    sub->add_option("--set", flags.sets, "extra KEY=VALUE overrides");
    switch (cmd) {
      case Command::kPrepare:
        add_value(sub, flags, "--manifest", "manifest", "corpus manifest (TSV)");
        add_value(sub, flags, "--registry", "registry", "speaker/language registry");
        add_value(sub, flags, "--make-synthetic", "make_synthetic", "write a synthetic corpus of N utterances first");
        break;
      case Command::kTrain:
        add_value(sub, flags, "--data", "data", "prepared dataset directory");
        add_value(sub, flags, "--epochs", "epochs", "epochs (default 200)");
        add_value(sub, flags, "--batch-size", "batch_size", "utterances per step");
        add_value(sub, flags, "--lr", "lr", "peak learning rate");
        add_value(sub, flags, "--checkpoint-every", "checkpoint_every", "also save every N epochs");
        break;
      case Command::kSynth:
        add_value(sub, flags, "--text", "text", "one utterance per line");
        add_value(sub, flags, "--manifest", "manifest", "synthesize every manifest entry, named by audio stem");
        add_value(sub, flags, "--speaker", "speaker", "speaker for plain text lines");
        add_value(sub, flags, "--language", "language", "language for plain text lines");
        add_value(sub, flags, "--steps", "steps", "Euler steps (default 10)");
        break;
      case Command::kEval:
        add_value(sub, flags, "--manifest", "manifest", "reference manifest");
        add_value(sub, flags, "--registry", "registry", "speaker/language registry");
        add_value(sub, flags, "--syn-dir", "syn_dir", "directory of synthesized WAVs");
        add_value(sub, flags, "--pesq", "pesq", "external PESQ binary: <bin> ref.wav deg.wav");
        break;
      case Command::kBench:
        add_value(sub, flags, "--batch", "bench_batch", "utterances per batch");
        add_value(sub, flags, "--seq-lens", "bench_seq_lens", "comma-separated scaling lengths");
        break;
    }
  }
  CLI11_PARSE(app, argc, argv);

  Command cmd = Command::kTrain;
  for (const auto& [sub, c] : by_app)
    if (sub->parsed()) cmd = c;

  mxtts::cli::EventLog log(std::cerr);
  try {
    mxtts::cli::KeyValues overrides;
    for (const auto& s : flags.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw mxtts::ConfigError("--set expects KEY=VALUE, got `" + s + "`");
      overrides.emplace_back(mxtts::trim(s.substr(0, eq)), mxtts::trim(s.substr(eq + 1)));
    }
    for (const auto& kv : flags.values) overrides.push_back(kv);
    if (flags.desk_scale) overrides.emplace_back("desk_scale", "true");
    std::optional<std::filesystem::path> file;
    if (!flags.config.empty()) file = flags.config;
    const auto cfg = mxtts::cli::parse_config(cmd, file, overrides);
    return mxtts::cli::dispatch(cfg, log);
  } catch (const std::exception& e) {
    log.event("error", {{"command", mxtts::cli::to_string(cmd)}, {"message", e.what()}});
    return 2;
  }
}
