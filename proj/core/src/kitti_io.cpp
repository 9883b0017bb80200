#include <Eigen/LU>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "vsvio/errors.hpp"
#include "vsvio/geometry.hpp"

namespace vsvio::geo {

namespace {

constexpr double kRejectTolerance = 1e-3;
// Values printed with 9 significant digits leave residuals around 1e-9;
// only project blocks that are visibly off so canonical files round-trip
// textually.
constexpr double kProjectTolerance = 1e-7;

}  // namespace

Trajectory parse_kitti_poses(const std::string& text, double dt) {
  Trajectory traj;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string tok;
    double v[12];
    std::size_t n = 0;
    while (fields >> tok) {
      if (n == 12) {
        throw FormatError("line " + std::to_string(lineno) + ": more than 12 values");
      }
      char* end = nullptr;
      errno = 0;
      const double x = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(x)) {
        throw FormatError("line " + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
      v[n++] = x;
    }
    if (n != 12) {
      throw FormatError("line " + std::to_string(lineno) + ": expected 12 values, got " +
                        std::to_string(n));
    }
    Pose p;
    p.rotation << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    p.translation << v[3], v[7], v[11];
    const double dev = std::max(orthonormality_error(p.rotation),
                                std::abs(p.rotation.determinant() - 1.0));
    if (dev > kRejectTolerance) {
      throw FormatError("line " + std::to_string(lineno) +
                        ": rotation block is not orthonormal (deviation " + std::to_string(dev) +
                        ")");
    }
    if (dev > kProjectTolerance) p.rotation = project_to_rotation(p.rotation);
    traj.timestamps.push_back(dt * static_cast<double>(traj.poses.size()));
    traj.poses.push_back(p);
  }
  return traj;
}

std::string write_kitti_poses(const Trajectory& traj) {
  std::string out;
  char buf[32];
  for (const Pose& p : traj.poses) {
    const double v[12] = {p.rotation(0, 0), p.rotation(0, 1), p.rotation(0, 2), p.translation(0),
                          p.rotation(1, 0), p.rotation(1, 1), p.rotation(1, 2), p.translation(1),
                          p.rotation(2, 0), p.rotation(2, 1), p.rotation(2, 2), p.translation(2)};
    for (int k = 0; k < 12; ++k) {
      std::snprintf(buf, sizeof buf, "%.8e", v[k] == 0.0 ? 0.0 : v[k]);
      if (k) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Trajectory read_kitti_file(const std::string& path, double dt) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open pose file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_kitti_poses(ss.str(), dt);
}

void write_kitti_file(const std::string& path, const Trajectory& traj) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write pose file " + path);
  f << write_kitti_poses(traj);
}

void write_segment_csv(std::ostream& out, std::span<const SegmentError> segments) {
  out << "start_frame,length_m,t_err_pct,r_err_deg_per_100m\n";
  char buf[128];
  for (const auto& s : segments) {
    std::snprintf(buf, sizeof buf, "%zu,%.0f,%.9g,%.9g\n", s.start_frame, s.length_m, s.t_err_pct,
                  s.r_err_deg_per_100m);
    out << buf;
  }
}

}  // namespace vsvio::geo
