#pragma once

// Parameter checkpoint files.
//
// A checkpoint is a pair of files sharing a base path:
//   <base>.json  manifest: format tag, version, byte order, dtype, LSTM gate
//                order, and per tensor {name, shape, offset, count}; plus an
//                optional free-form "extra" object and the CRC-32 of the
//                binary payload.
//   <base>.bin   every tensor's values, in manifest order, as contiguous
//                little-endian IEEE-754 float64 arrays. Tensor k starts at
//                byte 8*offset_k. No header, no padding.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vsvio/nn.hpp"

namespace vsvio {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kLstmGateOrder = "i,f,g,o";

/// Writes `params`; `extra_json` (a JSON object as text, may be empty) is
/// stored verbatim under "extra".
void save_parameters(const std::filesystem::path& base, const nn::ParamList& params,
                     const std::string& extra_json = "");

/// Loads values into `params` in place. Names and shapes must match the
/// manifest exactly. Returns the "extra" object as JSON text.
std::string load_parameters(const std::filesystem::path& base, nn::ParamList& params);

/// Little-endian float64 helpers shared with the dataset format.
void write_f64_le(std::ostream& out, std::span<const double> values);
std::vector<double> read_f64_le(std::istream& in, std::size_t count);
std::uint32_t crc32_of(std::span<const double> values);

}  // namespace vsvio
