#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ovmm/errors.hpp"

namespace ovmm {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

struct Color3 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
};

// Pinhole camera parameters. Depth rasters are raw integer units scaled by
// depth_scale into meters.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  double depth_scale = 0.001;

  void validate() const {
    if (fx <= 0.0 || fy <= 0.0) throw InputError("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InputError("intrinsics: image size must be positive");
    if (depth_scale <= 0.0) throw InputError("intrinsics: depth_scale must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
      throw InputError("intrinsics: principal point outside image");
    }
  }
};

// Rigid transform stored as a row-major 4x4 homogeneous matrix.
class Pose {
public:
  Pose() {
    m_ = {1, 0, 0, 0,
          0, 1, 0, 0,
          0, 0, 1, 0,
          0, 0, 0, 1};
  }

  explicit Pose(const std::array<double, 16>& row_major) : m_(row_major) {
    validate();
  }

  static Pose identity() { return Pose(); }

  static Pose translation(double x, double y, double z) {
    Pose p;
    p.m_[3] = x;
    p.m_[7] = y;
    p.m_[11] = z;
    return p;
  }

  static Pose rotation_z(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Pose p;
    p.m_ = {c, -s, 0, 0,
            s,  c, 0, 0,
            0,  0, 1, 0,
            0,  0, 0, 1};
    return p;
  }

  static Pose rotation_y(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Pose p;
    p.m_ = { c, 0, s, 0,
             0, 1, 0, 0,
            -s, 0, c, 0,
             0, 0, 0, 1};
    return p;
  }

  double at(int r, int c) const { return m_[r * 4 + c]; }
  const std::array<double, 16>& row_major() const { return m_; }

  Vec3 apply(const Vec3& p) const {
    return {m_[0] * p.x + m_[1] * p.y + m_[2] * p.z + m_[3],
            m_[4] * p.x + m_[5] * p.y + m_[6] * p.z + m_[7],
            m_[8] * p.x + m_[9] * p.y + m_[10] * p.z + m_[11]};
  }

  Vec3 translation_part() const { return {m_[3], m_[7], m_[11]}; }

  Pose compose(const Pose& other) const {
    Pose out;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        double v = 0.0;
        for (int k = 0; k < 4; ++k) v += at(r, k) * other.at(k, c);
        out.m_[r * 4 + c] = v;
      }
    }
    return out;
  }

  void validate() const {
    if (m_[12] != 0.0 || m_[13] != 0.0 || m_[14] != 0.0 || m_[15] != 1.0) {
      throw InputError("pose: last row must be (0,0,0,1)");
    }
    // R R^T = I and det(R) = +1 within 1e-6.
    constexpr double tol = 1e-6;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += at(r, k) * at(c, k);
        const double expect = (r == c) ? 1.0 : 0.0;
        if (std::abs(dot - expect) > tol) throw InputError("pose: rotation block not orthonormal");
      }
    }
    const double det =
        at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) -
        at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0)) +
        at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
    if (std::abs(det - 1.0) > tol) throw InputError("pose: rotation determinant must be +1");
  }

private:
  std::array<double, 16> m_;
};

// Raw depth raster; value 0 marks an invalid pixel.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> values;

  std::uint16_t at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  std::uint16_t& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }

  static DepthFrame zeros(int w, int h) {
    DepthFrame f;
    f.width = w;
    f.height = h;
    f.values.assign(static_cast<std::size_t>(w) * h, 0);
    return f;
  }
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Color3> colors;  // empty or one entry per point

  std::size_t size() const { return points.size(); }
  bool has_colors() const { return !colors.empty(); }

  void append(const PointCloud& other) {
    const bool colored = has_colors() || other.has_colors();
    if (colored) {
      colors.resize(points.size());
      points.insert(points.end(), other.points.begin(), other.points.end());
      colors.insert(colors.end(), other.colors.begin(), other.colors.end());
      colors.resize(points.size());
    } else {
      points.insert(points.end(), other.points.begin(), other.points.end());
    }
  }
};

struct ReprojectOptions {
  double max_range = 6.0;  // points farther than this are dropped
};

// Pinhole re-projection of a depth raster into the camera frame. Output is
// row-major pixel order, zero-depth pixels skipped.
inline PointCloud reproject_depth(const CameraIntrinsics& intrinsics, const DepthFrame& depth,
                                  const ReprojectOptions& opts = {}) {
  intrinsics.validate();
  if (depth.width != intrinsics.width || depth.height != intrinsics.height) {
    throw InputError("reproject_depth: depth dimensions do not match intrinsics");
  }
  PointCloud cloud;
  cloud.points.reserve(depth.values.size());
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const std::uint16_t raw = depth.at(u, v);
      if (raw == 0) continue;
      const double z = raw * intrinsics.depth_scale;
      if (opts.max_range > 0.0 && z > opts.max_range) continue;
      cloud.points.push_back({(u - intrinsics.cx) * z / intrinsics.fx,
                              (v - intrinsics.cy) * z / intrinsics.fy,
                              z});
    }
  }
  return cloud;
}

// Projects a camera-frame point back to pixel coordinates; test oracle helper.
inline bool project_point(const CameraIntrinsics& intrinsics, const Vec3& p, double& u, double& v) {
  if (p.z <= 0.0) return false;
  u = intrinsics.fx * p.x / p.z + intrinsics.cx;
  v = intrinsics.fy * p.y / p.z + intrinsics.cy;
  return u >= 0.0 && u < intrinsics.width && v >= 0.0 && v < intrinsics.height;
}

inline PointCloud transform_points(const Pose& pose, const PointCloud& cloud) {
  pose.validate();
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) out.points.push_back(pose.apply(p));
  out.colors = cloud.colors;
  return out;
}

// Concatenates clouds; with voxel > 0 keeps one centroid per occupied cube.
inline PointCloud accumulate(const std::vector<PointCloud>& clouds, double voxel = 0.0) {
  PointCloud merged;
  for (const PointCloud& c : clouds) merged.append(c);
  if (voxel <= 0.0) return merged;

  struct Cell {
    Vec3 sum;
    std::size_t count = 0;
  };
  using Key = std::array<std::int64_t, 3>;  // exact quantized coordinates
  std::map<Key, Cell> cells;
  auto key_of = [voxel](const Vec3& p) {
    return Key{static_cast<std::int64_t>(std::floor(p.x / voxel)),
               static_cast<std::int64_t>(std::floor(p.y / voxel)),
               static_cast<std::int64_t>(std::floor(p.z / voxel))};
  };
  std::vector<Key> order;  // first-appearance order, for determinism
  for (const Vec3& p : merged.points) {
    auto [it, inserted] = cells.try_emplace(key_of(p));
    if (inserted) order.push_back(it->first);
    it->second.sum = it->second.sum + p;
    it->second.count++;
  }
  PointCloud out;
  out.points.reserve(order.size());
  for (const Key& key : order) {
    const Cell& cell = cells.at(key);
    out.points.push_back(cell.sum * (1.0 / static_cast<double>(cell.count)));
  }
  return out;
}

}  // namespace ovmm
