#ifndef TPA_CHECKPOINT_HPP
#define TPA_CHECKPOINT_HPP

// TPAM checkpoint layout (all integers little-endian):
//
//   [0..4)    "TPAM"
//   [4..8)    u32 version = 1
//   [8..12)   u32 L, byte length of the architecture descriptor
//   [12..12+L) UTF-8 JSON: {"input_dim":..,"n_classes":..,"layers":[{"kind":..,"in_dim":..,"out_dim":..}, ...]}
//   then      f64 parameters in layer order, weights before bias, row-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>

#include "tpa/error.hpp"
#include "tpa/model.hpp"

namespace tpa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json architecture_json(const Model& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers()) {
    nlohmann::json j{{"kind", to_string(l.spec.kind)}, {"in_dim", l.spec.in_dim}, {"out_dim", l.spec.out_dim}};
    if (l.spec.kind == LayerKind::residual_block) j["activation"] = to_string(l.spec.activation);
    layers.push_back(std::move(j));
  }
  return {{"input_dim", model.input_dim()}, {"n_classes", model.n_classes()}, {"layers", layers}};
}

inline std::vector<LayerSpec> specs_from_json(const nlohmann::json& arch) {
  std::vector<LayerSpec> specs;
  try {
    for (const auto& j : arch.at("layers")) {
      LayerSpec s;
      s.kind = parse_layer_kind(j.at("kind").get<std::string>());
      s.in_dim = j.at("in_dim").get<std::size_t>();
      s.out_dim = j.at("out_dim").get<std::size_t>();
      if (s.kind == LayerKind::softplus) s.activation = Activation::softplus;
      if (j.contains("activation")) s.activation = parse_activation(j.at("activation").get<std::string>());
      specs.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad architecture descriptor: ") + e.what());
  }
  return specs;
}

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

inline double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{p[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  std::vector<std::uint8_t> out{'T', 'P', 'A', 'M'};
  detail::put_u32(out, kCheckpointVersion);
  const std::string arch = architecture_json(model).dump();
  detail::put_u32(out, static_cast<std::uint32_t>(arch.size()));
  out.insert(out.end(), arch.begin(), arch.end());
  for (const auto& l : model.layers())
    for (double p : l.params) detail::put_f64(out, p);
  return out;
}

inline Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "TPAM", 4) != 0) throw FormatError("not a TPAM checkpoint");
  const std::uint32_t version = detail::get_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) throw FormatError("unsupported TPAM version " + std::to_string(version));
  const std::uint32_t len = detail::get_u32(bytes.data() + 8);
  if (bytes.size() < 12 + std::size_t{len}) throw FormatError("truncated architecture descriptor");
  nlohmann::json arch;
  try {
    arch = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("architecture descriptor is not JSON: ") + e.what());
  }
  const std::vector<LayerSpec> specs = specs_from_json(arch);
  std::size_t n_params = 0;
  for (const auto& s : specs) n_params += s.parameter_count();
  const std::size_t offset = 12 + std::size_t{len};
  if (bytes.size() != offset + 8 * n_params) {
    throw FormatError("checkpoint holds " + std::to_string(bytes.size() - offset) + " parameter bytes, expected " +
                      std::to_string(8 * n_params));
  }
  std::vector<Layer> layers;
  const std::uint8_t* p = bytes.data() + offset;
  for (const auto& s : specs) {
    Layer layer{s, std::vector<double>(s.parameter_count())};
    for (double& v : layer.params) {
      v = detail::get_f64(p);
      p += 8;
    }
    layers.push_back(std::move(layer));
  }
  try {
    return Model(std::move(layers));
  } catch (const DimensionError& e) {
    throw FormatError(std::string("inconsistent architecture: ") + e.what());
  }
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(model));
}

inline Model load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace tpa

#endif  // TPA_CHECKPOINT_HPP
