#include "mxtts/model/checkpoint.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mxtts/binio.hpp"
#include "mxtts/kvfile.hpp"

namespace mxtts::model {

namespace {

using binio::FormatError;

void put_matrix(std::ostream& os, const Matrix<float>& m) {
  for (float v : m.flat()) binio::put<float>(os, v);
}

void get_matrix(std::istream& is, Matrix<float>& m) {
  for (float& v : m.flat()) v = binio::get<float>(is);
}

std::string render_kv(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const AcousticModel<float>& model,
                     const text::CharVocab& vocab, const text::Registry& registry, const CheckpointMeta& meta,
                     const Adam* adam) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  binio::put<std::uint32_t>(os, kCheckpointVersion);
  binio::put_string(os, render_kv(model.config().to_kv()));
  binio::put_string(os, vocab.serialize());
  binio::put_string(os, registry.render());

  const auto& stats = model.stats();
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(stats.mean.size()));
  for (double v : stats.mean) binio::put<double>(os, v);
  for (double v : stats.std) binio::put<double>(os, v);

  binio::put<std::uint64_t>(os, meta.step);
  binio::put<std::uint64_t>(os, meta.epoch);
  binio::put<std::uint64_t>(os, meta.seed);

  const auto& entries = model.params().entries();
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    binio::put_string(os, e.name);
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(e.rows));
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(e.cols));
    put_matrix(os, e.var.value());
  }
  const bool with_adam = adam && adam->m.size() == entries.size();
  binio::put<std::uint8_t>(os, with_adam ? 1 : 0);
  if (with_adam) {
    binio::put<std::uint64_t>(os, adam->t);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      put_matrix(os, adam->m[k]);
      put_matrix(os, adam->v[k]);
    }
  }
  if (!os) throw std::runtime_error("error writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string where = "checkpoint " + path.string() + ": ";
  try {
    char magic[sizeof kCheckpointMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
      throw FormatError("bad magic");
    const auto version = binio::get<std::uint32_t>(is);
    if (version != kCheckpointVersion) throw FormatError("unsupported version " + std::to_string(version));

    ModelConfig cfg;
    for (const auto& e : KeyValueFile::parse(binio::get_string(is), "model config").entries)
      if (!cfg.set(e.key, e.value)) throw FormatError("unknown model key " + e.key);
    LoadedCheckpoint out;
    out.vocab = text::CharVocab::deserialize(binio::get_string(is));
    out.registry = text::Registry::parse(KeyValueFile::parse(binio::get_string(is), "registry"));

    MelStats stats;
    const auto n_mels = binio::get<std::uint32_t>(is);
    if (n_mels != cfg.dec_out) throw FormatError("mel statistics width does not match the model");
    stats.mean.resize(n_mels);
    stats.std.resize(n_mels);
    for (auto& v : stats.mean) v = binio::get<double>(is);
    for (auto& v : stats.std) v = binio::get<double>(is);

    out.meta.step = binio::get<std::uint64_t>(is);
    out.meta.epoch = binio::get<std::uint64_t>(is);
    out.meta.seed = binio::get<std::uint64_t>(is);

    out.model = std::make_unique<AcousticModel<float>>(cfg, out.meta.seed);
    out.model->stats() = std::move(stats);
    auto& entries = out.model->params().entries();
    const auto n_params = binio::get<std::uint32_t>(is);
    if (n_params != entries.size())
      throw FormatError("parameter count " + std::to_string(n_params) + " does not match the configuration (" +
                        std::to_string(entries.size()) + ")");
    for (auto& e : entries) {
      const std::string name = binio::get_string(is);
      const auto rows = binio::get<std::uint32_t>(is), cols = binio::get<std::uint32_t>(is);
      if (name != e.name || rows != e.rows || cols != e.cols)
        throw FormatError("parameter " + name + " " + shape_str(rows, cols) + " where " + e.name + " " +
                          shape_str(e.rows, e.cols) + " was expected");
      get_matrix(is, e.var.mutable_value());
    }
    if (binio::get<std::uint8_t>(is)) {
      Adam adam;
      adam.t = binio::get<std::uint64_t>(is);
      for (const auto& e : entries) {
        adam.m.emplace_back(e.rows, e.cols);
        adam.v.emplace_back(e.rows, e.cols);
        get_matrix(is, adam.m.back());
        get_matrix(is, adam.v.back());
      }
      out.adam = std::move(adam);
    }
    return out;
  } catch (const FormatError& e) {
    throw FormatError(where + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(where + e.what());
  }
}

std::string git_blob_sha1(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) && EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    const unsigned char b = digest[i];
    out += hex[b >> 4];
    out += hex[b & 15];
  }
  return out;
}

}  // namespace mxtts::model
