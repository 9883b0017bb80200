// Dataset directory:
//   manifest.json   format tag, version, seed, SimConfig, shapes, embedding
//                   matrix, and per sequence {file, seed, samples, crc32}
//   seq_NNNN.bin    little-endian float64:
//                     header  R (9, row-major), t (3), gyro bias (3),
//                             accel bias (3), visual sigma (1)
//                     then per sample: visual (visual_dim), imu (6 x window,
//                     row-major), gt_rel phi (3), v (3), gt_speed, gt_yaw_rate

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_io.hpp"
#include "vsvio/checkpoint.hpp"
#include "vsvio/errors.hpp"
#include "vsvio/simkit.hpp"

namespace vsvio::sim {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "vsvio-dataset";
constexpr std::size_t kHeader = 19;

std::string seq_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%04zu.bin", i);
  return buf;
}

std::size_t record_len(std::size_t visual_dim, std::size_t window) {
  return visual_dim + kImuChannels * window + 8;
}

std::vector<double> flatten(const Sequence& s, std::size_t visual_dim, std::size_t window) {
  std::vector<double> out;
  out.reserve(kHeader + s.samples.size() * record_len(visual_dim, window));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.push_back(s.initial.rotation(r, c));
  for (int k = 0; k < 3; ++k) out.push_back(s.initial.translation[k]);
  out.insert(out.end(), s.gyro_bias.begin(), s.gyro_bias.end());
  out.insert(out.end(), s.accel_bias.begin(), s.accel_bias.end());
  out.push_back(s.visual_sigma);
  for (const Sample& x : s.samples) {
    if (x.visual.size() != visual_dim || x.imu.size() != kImuChannels * window)
      throw DimensionError("export_dataset: sample shape does not match the config");
    out.insert(out.end(), x.visual.begin(), x.visual.end());
    out.insert(out.end(), x.imu.begin(), x.imu.end());
    for (int k = 0; k < 3; ++k) out.push_back(x.gt_rel.phi[k]);
    for (int k = 0; k < 3; ++k) out.push_back(x.gt_rel.v[k]);
    out.push_back(x.gt_speed);
    out.push_back(x.gt_yaw_rate);
  }
  return out;
}

Sequence unflatten(std::span<const double> d, std::size_t n, std::size_t visual_dim,
                   std::size_t window) {
  Sequence s;
  std::size_t i = 0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) s.initial.rotation(r, c) = d[i++];
  for (int k = 0; k < 3; ++k) s.initial.translation[k] = d[i++];
  for (auto& b : s.gyro_bias) b = d[i++];
  for (auto& b : s.accel_bias) b = d[i++];
  s.visual_sigma = d[i++];
  s.samples.resize(n);
  for (Sample& x : s.samples) {
    x.visual.assign(d.begin() + i, d.begin() + i + visual_dim);
    i += visual_dim;
    x.imu.assign(d.begin() + i, d.begin() + i + kImuChannels * window);
    i += kImuChannels * window;
    for (int k = 0; k < 3; ++k) x.gt_rel.phi[k] = d[i++];
    for (int k = 0; k < 3; ++k) x.gt_rel.v[k] = d[i++];
    x.gt_speed = d[i++];
    x.gt_yaw_rate = d[i++];
  }
  return s;
}

template <class T>
T field(const json& j, const char* key, const std::filesystem::path& file) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(file.string() + ": missing '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(file.string() + ": bad '" + key + "'");
  }
}

}  // namespace

void export_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.config.validate();
  const std::size_t vd = ds.config.visual_dim;
  const std::size_t window = ds.config.window_len();
  if (ds.embedding.size() != vd * kPoseDim)
    throw DimensionError("export_dataset: embedding is not visual_dim x 6");
  std::filesystem::create_directories(dir);

  json seqs = json::array();
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    const Sequence& s = ds.sequences[i];
    auto flat = flatten(s, vd, window);
    std::ofstream out(dir / seq_name(i), std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + (dir / seq_name(i)).string());
    write_f64_le(out, flat);
    if (!out) throw FormatError("write failed: " + (dir / seq_name(i)).string());
    seqs.push_back({{"file", seq_name(i)},
                    {"seed", s.seed},
                    {"samples", s.samples.size()},
                    {"crc32", crc32_of(flat)}});
  }

  json m = {
      {"format", kFormat},
      {"version", kDatasetVersion},
      {"byte_order", "little"},
      {"dtype", "float64"},
      {"seed", ds.seed},
      {"config", jsonio::to_json(ds.config)},
      {"shapes",
       {{"visual", {vd}},
        {"imu", {kImuChannels, window}},
        {"embedding", {vd, kPoseDim}},
        {"header", kHeader},
        {"record", record_len(vd, window)}}},
      {"embedding", ds.embedding},
      {"sequences", seqs},
  };
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw FormatError("cannot write " + (dir / "manifest.json").string());
  out << m.dump(1) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw FormatError("cannot open " + mpath.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
  if (field<std::string>(m, "format", mpath) != kFormat)
    throw FormatError(mpath.string() + ": not a dataset manifest");
  if (int v = field<int>(m, "version", mpath); v != kDatasetVersion)
    throw FormatError(mpath.string() + ": unsupported version " + std::to_string(v));
  if (field<std::string>(m, "byte_order", mpath) != "little" ||
      field<std::string>(m, "dtype", mpath) != "float64")
    throw FormatError(mpath.string() + ": unsupported byte order or dtype");

  Dataset ds;
  ds.seed = field<std::uint64_t>(m, "seed", mpath);
  try {
    jsonio::from_json(m.at("config"), ds.config, "config");
  } catch (const std::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
  const std::size_t vd = ds.config.visual_dim;
  const std::size_t window = ds.config.window_len();
  ds.embedding = field<std::vector<double>>(m, "embedding", mpath);
  if (ds.embedding.size() != vd * kPoseDim)
    throw FormatError(mpath.string() + ": embedding size does not match visual_dim");

  const json seqs = field<json>(m, "sequences", mpath);
  for (const json& e : seqs) {
    const auto file = dir / field<std::string>(e, "file", mpath);
    const auto n = field<std::size_t>(e, "samples", mpath);
    std::ifstream bin(file, std::ios::binary);
    if (!bin) throw FormatError("cannot open " + file.string());
    auto flat = read_f64_le(bin, kHeader + n * record_len(vd, window));
    if (bin.peek() != std::char_traits<char>::eof())
      throw FormatError(file.string() + ": trailing bytes");
    if (crc32_of(flat) != field<std::uint32_t>(e, "crc32", mpath))
      throw FormatError(file.string() + ": checksum mismatch");
    Sequence s = unflatten(flat, n, vd, window);
    s.seed = field<std::uint64_t>(e, "seed", mpath);
    ds.sequences.push_back(std::move(s));
  }
  return ds;
}

}  // namespace vsvio::sim
