#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "mxtts/model/trainer.hpp"

// Layout (little-endian):
//   "MXTTS1", u32 version
//   str model config (key = value lines), str vocab (UTF-8 symbols in ID
//   order), str registry (key = value lines)
//   u32 n_mels, f64 mean[n_mels], f64 std[n_mels]
//   u64 step, u64 epoch, u64 seed
//   u32 n_params, then per parameter: str name, u32 rows, u32 cols,
//   f32 values row-major
//   u8 has_optimizer; if set: u64 adam_t, then m and v per parameter in
//   table order (f32, same shapes)
// Strings are u32 byte length + bytes.
namespace mxtts::model {

inline constexpr char kCheckpointMagic[6] = {'M', 'X', 'T', 'T', 'S', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t step = 0, epoch = 0, seed = 0;
};

struct LoadedCheckpoint {
  std::unique_ptr<AcousticModel<float>> model;
  text::CharVocab vocab;
  text::Registry registry;
  CheckpointMeta meta;
  std::optional<Adam> adam;
};

void save_checkpoint(const std::filesystem::path& path, const AcousticModel<float>& model,
                     const text::CharVocab& vocab, const text::Registry& registry, const CheckpointMeta& meta,
                     const Adam* adam = nullptr);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Hex SHA-1 of "blob <size>\0" + file bytes, as `git hash-object` prints.
std::string git_blob_sha1(const std::filesystem::path& path);

}  // namespace mxtts::model
