#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mxtts/kvfile.hpp"
#include "mxtts/model/config.hpp"
#include "mxtts/model/trainer.hpp"

namespace mxtts::cli {

enum class Command { kPrepare, kTrain, kSynth, kEval, kBench };

std::string to_string(Command c);
Command parse_command(const std::string& s);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Everything a run needs. Config files and flags use the same key names;
// model keys (mixer, desk_scale, enc_hidden, ...) go to `model`.
struct RunConfig {
  Command command = Command::kTrain;
  std::uint64_t seed = 0;

  std::filesystem::path out = "out";
  std::filesystem::path checkpoint;
  std::filesystem::path data;      // prepared dataset directory
  std::filesystem::path manifest;  // prepare: corpus manifest; synth/eval: reference manifest
  std::filesystem::path registry;
  std::filesystem::path text;      // synth input lines
  std::filesystem::path syn_dir;   // eval: synthesized WAVs

  // prepare
  std::size_t make_synthetic = 0;  // > 0 writes a synthetic corpus of this size first

  // train
  std::size_t epochs = 200;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  model::OptimConfig optim;

  // synth
  int steps = model::kDefaultSteps;
  int griffin_lim_iters = 32;
  std::string speaker, language;

  // eval
  std::string pesq;  // external binary, optional

  // bench
  std::size_t bench_batch = 1;
  std::size_t bench_batches = 3;
  std::size_t bench_tokens = 48;
  std::vector<std::size_t> bench_seq_lens{256, 512, 1024, 2048, 4096};
  std::size_t bench_dim = 64;
  bool bench_scaling = true;

  int threads = 1;
  model::ModelConfig model;

  KeyValues to_kv() const;
};

// Applies one key. Throws ConfigError naming the key when it is unknown or
// its value does not parse.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

// File values first, then overrides in order.
RunConfig parse_config(Command command, const std::optional<std::filesystem::path>& file,
                       const KeyValues& overrides);

// Checks that the paths the command reads exist. Throws ConfigError.
void validate_paths(const RunConfig& cfg);

// Line-oriented `event=<name> key=value ...` records, written to the
// stream and to an optional file.
class EventLog {
 public:
  explicit EventLog(std::ostream& os) : os_(os) {}
  void open_file(const std::filesystem::path& path);
  void event(const std::string& name, const KeyValues& fields);

 private:
  std::ostream& os_;
  std::ofstream file_;
};

// Runs the command; exceptions propagate with context attached.
void run(const RunConfig& cfg, EventLog& log);

// run() with errors logged as event=error; returns the process exit status.
int dispatch(const RunConfig& cfg, EventLog& log);

}  // namespace mxtts::cli
