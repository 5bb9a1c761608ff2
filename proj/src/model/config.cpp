#include "mxtts/model/config.hpp"

#include <algorithm>
#include <map>

#include "mxtts/kvfile.hpp"

namespace mxtts::model {

namespace {

std::size_t scaled(std::size_t v, const ModelConfig& c) {
  if (!c.desk_scale) return v;
  return std::max<std::size_t>(1, v / c.desk_divisor);
}

}  // namespace

ModelConfig::Dims ModelConfig::dims() const {
  Dims d{};
  std::size_t hidden = dec_hidden;
  if (hidden == 0)
    hidden = (mixer == MixerKind::kMamba2 || mixer == MixerKind::kHydra) ? kShrunkDecHidden : kDefaultDecHidden;
  d.spk = scaled(speaker_emb_dim, *this);
  d.lang = scaled(language_emb_dim, *this);
  d.enc = scaled(enc_hidden, *this);
  d.enc_filter = scaled(enc_filter, *this);
  d.enc_blocks = desk_scale ? desk_enc_blocks : enc_blocks;
  d.dp_filter = scaled(dp_filter, *this);
  d.dec_in = scaled(dec_in, *this);
  d.dec_out = dec_out;
  d.dec_hidden = scaled(hidden, *this);
  d.dec_blocks = dec_blocks;
  d.dec_ffn = d.dec_hidden * dec_ffn_mult;
  d.time_emb = scaled(time_emb_dim, *this);
  d.heads = attention_heads;
  d.ssm_state = scaled(ssm_state, *this);
  d.ssm_head_dim = scaled(ssm_head_dim, *this);
  return d;
}

void ModelConfig::validate() const {
  if (n_vocab == 0) throw ConfigError("model: n_vocab must be positive");
  if (n_speakers == 0 || n_languages == 0) throw ConfigError("model: need at least one speaker and language");
  if (enc_dropout < 0.0 || enc_dropout >= 1.0) throw ConfigError("model: enc_dropout must be in [0, 1)");
  if (desk_scale && desk_divisor == 0) throw ConfigError("model: desk_divisor must be positive");
  if (prenet_kernel % 2 == 0 || ffn_kernel % 2 == 0) throw ConfigError("model: kernel widths must be odd");
  const Dims d = dims();
  for (std::size_t v : {d.spk, d.lang, d.enc, d.enc_filter, d.enc_blocks, d.dp_filter, d.dec_in, d.dec_out,
                        d.dec_hidden, d.dec_blocks, d.time_emb, d.heads, d.ssm_state, d.ssm_head_dim})
    if (v == 0) throw ConfigError("model: all dimensions must be positive");
  if (d.time_emb % 2 != 0) throw ConfigError("model: time embedding width must be even");
  for (std::size_t w : {d.enc, d.dec_hidden}) {
    if (w % d.heads != 0) throw ConfigError("model: width " + std::to_string(w) + " not divisible by heads");
    if (w % d.ssm_head_dim != 0)
      throw ConfigError("model: width " + std::to_string(w) + " not divisible by ssm_head_dim");
  }
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_kv() const {
  auto s = [](std::size_t v) { return std::to_string(v); };
  return {
      {"mixer", seqmix::to_string(mixer)},
      {"n_vocab", s(n_vocab)},
      {"n_speakers", s(n_speakers)},
      {"n_languages", s(n_languages)},
      {"speaker_emb_dim", s(speaker_emb_dim)},
      {"language_emb_dim", s(language_emb_dim)},
      {"enc_hidden", s(enc_hidden)},
      {"enc_filter", s(enc_filter)},
      {"enc_dropout", std::to_string(enc_dropout)},
      {"enc_blocks", s(enc_blocks)},
      {"prenet_layers", s(prenet_layers)},
      {"prenet_kernel", s(prenet_kernel)},
      {"ffn_kernel", s(ffn_kernel)},
      {"dp_filter", s(dp_filter)},
      {"dec_in", s(dec_in)},
      {"dec_out", s(dec_out)},
      {"dec_hidden", s(dec_hidden)},
      {"dec_blocks", s(dec_blocks)},
      {"dec_ffn_mult", s(dec_ffn_mult)},
      {"time_emb_dim", s(time_emb_dim)},
      {"attention_heads", s(attention_heads)},
      {"ssm_state", s(ssm_state)},
      {"ssm_head_dim", s(ssm_head_dim)},
      {"desk_scale", desk_scale ? "true" : "false"},
      {"desk_divisor", s(desk_divisor)},
      {"desk_enc_blocks", s(desk_enc_blocks)},
  };
}

bool ModelConfig::set(const std::string& key, const std::string& value) {
  auto size = [&](std::size_t& field) {
    const long long v = parse_int(value, key);
    if (v < 0) throw ConfigError(key + ": must be non-negative");
    field = static_cast<std::size_t>(v);
  };
  const std::map<std::string, std::size_t*> sizes = {
      {"n_vocab", &n_vocab},
      {"n_speakers", &n_speakers},
      {"n_languages", &n_languages},
      {"speaker_emb_dim", &speaker_emb_dim},
      {"language_emb_dim", &language_emb_dim},
      {"enc_hidden", &enc_hidden},
      {"enc_filter", &enc_filter},
      {"enc_blocks", &enc_blocks},
      {"prenet_layers", &prenet_layers},
      {"prenet_kernel", &prenet_kernel},
      {"ffn_kernel", &ffn_kernel},
      {"dp_filter", &dp_filter},
      {"dec_in", &dec_in},
      {"dec_out", &dec_out},
      {"dec_hidden", &dec_hidden},
      {"dec_blocks", &dec_blocks},
      {"dec_ffn_mult", &dec_ffn_mult},
      {"time_emb_dim", &time_emb_dim},
      {"attention_heads", &attention_heads},
      {"ssm_state", &ssm_state},
      {"ssm_head_dim", &ssm_head_dim},
      {"desk_divisor", &desk_divisor},
      {"desk_enc_blocks", &desk_enc_blocks},
  };
  if (auto it = sizes.find(key); it != sizes.end()) {
    size(*it->second);
    return true;
  }
  if (key == "mixer") {
    try {
      mixer = seqmix::parse_mixer(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return true;
  }
  if (key == "enc_dropout") {
    enc_dropout = parse_double(value, key);
    return true;
  }
  if (key == "desk_scale") {
    desk_scale = parse_bool(value, key);
    return true;
  }
  return false;
}

}  // namespace mxtts::model
