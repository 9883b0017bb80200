#include "vsvio/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "vsvio/errors.hpp"

namespace vsvio {

using nlohmann::json;

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* suffix) {
  return std::filesystem::path(base.string() + suffix);
}

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}

}  // namespace

void write_f64_le(std::ostream& out, std::span<const double> values) {
  std::vector<std::uint64_t> words(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) words[i] = to_le(std::bit_cast<std::uint64_t>(values[i]));
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint64_t)));
}

std::vector<double> read_f64_le(std::istream& in, std::size_t count) {
  std::vector<std::uint64_t> words(count);
  in.read(reinterpret_cast<char*>(words.data()),
          static_cast<std::streamsize>(count * sizeof(std::uint64_t)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(std::uint64_t)) {
    throw FormatError("truncated array: expected " + std::to_string(count) + " float64 values");
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<double>(to_le(words[i]));
  return values;
}

std::uint32_t crc32_of(std::span<const double> values) {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (double v : values) {
    const std::uint64_t w = to_le(std::bit_cast<std::uint64_t>(v));
    unsigned char bytes[8];
    std::memcpy(bytes, &w, 8);
    crc = crc32(crc, bytes, 8);
  }
  return static_cast<std::uint32_t>(crc);
}

void save_parameters(const std::filesystem::path& base, const nn::ParamList& params,
                     const std::string& extra_json) {
  json manifest;
  manifest["format"] = "vsvio-parameters";
  manifest["version"] = kCheckpointVersion;
  manifest["byte_order"] = "little-endian";
  manifest["dtype"] = "float64";
  manifest["lstm_gate_order"] = kLstmGateOrder;
  json tensors = json::array();
  std::vector<double> payload;
  for (const auto& [name, t] : params) {
    tensors.push_back({{"name", name},
                       {"shape", t.shape()},
                       {"offset", payload.size()},
                       {"count", t.numel()}});
    payload.insert(payload.end(), t.data().begin(), t.data().end());
  }
  manifest["tensors"] = std::move(tensors);
  manifest["total_count"] = payload.size();
  manifest["crc32"] = crc32_of(payload);
  if (!extra_json.empty()) manifest["extra"] = json::parse(extra_json);

  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
  std::ofstream bin(with_suffix(base, ".bin"), std::ios::binary);
  if (!bin) throw FormatError("cannot write " + with_suffix(base, ".bin").string());
  write_f64_le(bin, payload);
  std::ofstream man(with_suffix(base, ".json"));
  if (!man) throw FormatError("cannot write " + with_suffix(base, ".json").string());
  man << manifest.dump(2) << "\n";
}

std::string load_parameters(const std::filesystem::path& base, nn::ParamList& params) {
  std::ifstream man(with_suffix(base, ".json"));
  if (!man) throw FormatError("cannot open " + with_suffix(base, ".json").string());
  json manifest;
  try {
    manifest = json::parse(man);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "vsvio-parameters") throw FormatError("not a parameter checkpoint");
  if (manifest.value("version", -1) != kCheckpointVersion) {
    throw FormatError("checkpoint version mismatch: expected " + std::to_string(kCheckpointVersion));
  }
  if (manifest.value("lstm_gate_order", "") != kLstmGateOrder) {
    throw FormatError("unsupported LSTM gate order");
  }
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, expected " +
                      std::to_string(params.size()));
  }
  const std::size_t total = manifest.at("total_count").get<std::size_t>();
  std::ifstream bin(with_suffix(base, ".bin"), std::ios::binary);
  if (!bin) throw FormatError("cannot open " + with_suffix(base, ".bin").string());
  const std::vector<double> payload = read_f64_le(bin, total);
  if (bin.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint payload");
  if (crc32_of(payload) != manifest.at("crc32").get<std::uint32_t>()) {
    throw FormatError("checkpoint checksum mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& [name, t] = params[k];
    const auto& entry = tensors[k];
    if (entry.at("name").get<std::string>() != name) {
      throw FormatError("checkpoint tensor " + std::to_string(k) + " is '" +
                        entry.at("name").get<std::string>() + "', expected '" + name + "'");
    }
    if (entry.at("shape").get<Shape>() != t.shape()) {
      throw FormatError("shape mismatch for '" + name + "'");
    }
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t count = entry.at("count").get<std::size_t>();
    if (count != t.numel() || offset + count > payload.size()) {
      throw FormatError("bad extent for '" + name + "'");
    }
    std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(offset), count, t.mutable_data().begin());
  }
  return manifest.contains("extra") ? manifest["extra"].dump() : std::string();
}

}  // namespace vsvio
