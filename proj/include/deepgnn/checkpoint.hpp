#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "deepgnn/classifier.hpp"
#include "deepgnn/error.hpp"

namespace deepgnn {

// Layout: "DGNNCKPT" | u64 LE header length | JSON header | tensors as
// row-major little-endian doubles in header order.

inline constexpr char kCheckpointMagic[8] = {'D', 'G', 'N', 'N', 'C', 'K', 'P', 'T'};

namespace detail {

inline void write_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(v >> (8 * b));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64_le(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw DataError("checkpoint: unexpected end of file");
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
  return v;
}

}  // namespace detail

struct CheckpointInfo {
  ModelConfig config;
  std::size_t in_dim = 0;
  std::size_t num_classes = 0;
  std::uint64_t seed = 0;
  nlohmann::json extra;  // free-form hyperparameters
};

inline void save_checkpoint(Classifier& model, const CheckpointInfo& info, const std::filesystem::path& path) {
  auto refs = model.param_refs();
  nlohmann::json header;
  header["format"] = 1;
  header["model"] = to_string(model.config().kind);
  header["depth"] = model.config().depth;
  header["hidden"] = model.config().hidden;
  header["dropout"] = model.config().dropout;
  header["in_dim"] = info.in_dim;
  header["num_classes"] = info.num_classes;
  header["seed"] = info.seed;
  header["hyperparameters"] = info.extra.is_null() ? nlohmann::json::object() : info.extra;
  header["tensors"] = nlohmann::json::array();
  for (const auto& r : refs)
    header["tensors"].push_back({{"name", r.name}, {"rows", r.value->rows()}, {"cols", r.value->cols()}});
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& r : refs)
    for (double v : r.value->values()) detail::write_u64_le(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw DataError("write failed: " + path.string());
}

struct LoadedCheckpoint {
  CheckpointInfo info;
  Classifier model;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw DataError(path.string() + ": not a checkpoint file");
  const std::uint64_t len = detail::read_u64_le(in);
  if (len > (1u << 26)) throw DataError(path.string() + ": implausible header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw DataError(path.string() + ": truncated header");

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad header: " + e.what());
  }
  CheckpointInfo info;
  try {
    info.config.kind = parse_model_kind(h.at("model").get<std::string>());
    info.config.depth = h.at("depth").get<int>();
    info.config.hidden = h.at("hidden").get<std::size_t>();
    info.config.dropout = h.at("dropout").get<double>();
    info.in_dim = h.at("in_dim").get<std::size_t>();
    info.num_classes = h.at("num_classes").get<std::size_t>();
    info.seed = h.at("seed").get<std::uint64_t>();
    info.extra = h.value("hyperparameters", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad header: " + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(path.string() + ": " + e.what());
  }

  Classifier model(info.config, info.in_dim, info.num_classes, info.seed);
  auto refs = model.param_refs();
  try {
    const auto& tensors = h.at("tensors");
    if (tensors.size() != refs.size()) throw DataError(path.string() + ": tensor count mismatch");
    for (std::size_t t = 0; t < refs.size(); ++t) {
      const auto& th = tensors[t];
      if (th.at("name").get<std::string>() != refs[t].name ||
          th.at("rows").get<std::size_t>() != refs[t].value->rows() ||
          th.at("cols").get<std::size_t>() != refs[t].value->cols())
        throw DataError(path.string() + ": tensor '" + refs[t].name + "' does not match header");
      for (double& v : refs[t].value->values()) v = std::bit_cast<double>(detail::read_u64_le(in));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad tensor list: " + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes");
  return {std::move(info), std::move(model)};
}

}  // namespace deepgnn
