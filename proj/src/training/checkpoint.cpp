#include "tcplan/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tcplan/error.hpp"
#include "tcplan/json_fields.hpp"

namespace tcplan::training {

namespace {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_le(std::string& out, float f) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

float get_le(const std::string& in, std::size_t at) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return std::bit_cast<float>(u);
}

}  // namespace

void save_checkpoint(const planner::Model& model, const std::filesystem::path& path) {
  std::string blob;
  json table = json::array();
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    const auto& t = model.weights.tensor(i);
    table.push_back({{"name", model.weights.name(i)}, {"shape", {t.rows(), t.cols()}}, {"offset", blob.size()}});
    for (double v : t.values()) put_le(blob, static_cast<float>(v));
  }
  json manifest = json::object();
  manifest["format_version"] = kCheckpointVersion;
  manifest["config"] = planner::config_to_json(model.config);
  manifest["vocab"] = model.vocab.tokens();
  manifest["tensors"] = std::move(table);
  manifest["blob_bytes"] = blob.size();
  manifest["checksum"] = fnv1a(blob);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << manifest.dump() << '\n' << blob;
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

planner::Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) throw CheckpointError(where + "missing manifest line");

  json manifest;
  try {
    manifest = json::parse(bytes.substr(0, newline));
  } catch (const json::exception& e) {
    throw CheckpointError(where + "unreadable manifest: " + e.what());
  }

  planner::Model model;
  std::string blob = bytes.substr(newline + 1);
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError(where + "format version " + std::to_string(version) + ", expected " +
                            std::to_string(kCheckpointVersion));
    }
    const auto blob_bytes = manifest.at("blob_bytes").get<std::size_t>();
    if (blob.size() < blob_bytes) throw CheckpointError(where + "truncated blob");
    if (blob.size() > blob_bytes) throw CheckpointError(where + "trailing bytes after blob");
    if (fnv1a(blob) != manifest.at("checksum").get<std::uint64_t>()) throw CheckpointError(where + "checksum mismatch");

    model.config = planner::config_from_json(manifest.at("config"));
    model.config.validate();
    model.vocab = corpus::Vocab(manifest.at("vocab").get<std::vector<std::string>>());
    if (model.vocab.size() != model.config.vocab_size) throw CheckpointError(where + "vocab size disagrees with config");
    model.weights = planner::weight_layout(model.config);

    const json& table = manifest.at("tensors");
    if (!table.is_array() || table.size() != model.weights.size()) {
      throw CheckpointError(where + "tensor table does not match the configured layout");
    }
    for (std::size_t i = 0; i < table.size(); ++i) {
      auto& t = model.weights.tensor(i);
      const auto name = table[i].at("name").get<std::string>();
      const auto shape = table[i].at("shape").get<std::vector<std::size_t>>();
      const auto offset = table[i].at("offset").get<std::size_t>();
      if (name != model.weights.name(i)) throw CheckpointError(where + "unexpected tensor '" + name + "'");
      if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols()) {
        throw CheckpointError(where + "shape mismatch for '" + name + "'");
      }
      if (offset + 4 * t.size() > blob.size()) throw CheckpointError(where + "tensor '" + name + "' past blob end");
      for (std::size_t k = 0; k < t.size(); ++k) t[k] = get_le(blob, offset + 4 * k);
    }
  } catch (const json::exception& e) {
    throw CheckpointError(where + "bad manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(where + e.what());
  } catch (const SchemaError& e) {
    throw CheckpointError(where + e.what());
  }
  return model;
}

}  // namespace tcplan::training
