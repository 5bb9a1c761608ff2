#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mxtts/seqmix/types.hpp"

namespace mxtts::model {

using seqmix::MixerKind;

// Full-scale widths are stored; `dims()` resolves the per-mixer decoder
// width and the desk-scale reduction.
struct ModelConfig {
  MixerKind mixer = MixerKind::kSelfAttention;
  std::size_t n_vocab = 0;
  std::size_t n_speakers = 1;
  std::size_t n_languages = 1;

  std::size_t speaker_emb_dim = 256;
  std::size_t language_emb_dim = 192;
  std::size_t enc_hidden = 640;
  std::size_t enc_filter = 768;
  double enc_dropout = 0.1;
  std::size_t enc_blocks = 6;
  std::size_t prenet_layers = 3;
  std::size_t prenet_kernel = 5;
  std::size_t ffn_kernel = 3;
  std::size_t dp_filter = 768;
  std::size_t dec_in = 160;
  std::size_t dec_out = 80;
  // 0 selects 256 for attention/FNet and 192 for Mamba2/Hydra.
  std::size_t dec_hidden = 0;
  std::size_t dec_blocks = 2;
  std::size_t dec_ffn_mult = 4;
  std::size_t time_emb_dim = 128;
  std::size_t attention_heads = 2;
  std::size_t ssm_state = 64;
  std::size_t ssm_head_dim = 64;

  bool desk_scale = false;
  std::size_t desk_divisor = 8;
  std::size_t desk_enc_blocks = 2;

  struct Dims {
    std::size_t spk, lang, enc, enc_filter, enc_blocks, dp_filter, dec_in, dec_out, dec_hidden, dec_blocks,
        dec_ffn, time_emb, heads, ssm_state, ssm_head_dim;
  };
  Dims dims() const;
  void validate() const;

  std::vector<std::pair<std::string, std::string>> to_kv() const;
  // Returns false when `key` is not a model key.
  bool set(const std::string& key, const std::string& value);
};

inline constexpr std::size_t kDefaultDecHidden = 256;
inline constexpr std::size_t kShrunkDecHidden = 192;

}  // namespace mxtts::model
