#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ovmm/errors.hpp"
#include "ovmm/geometry.hpp"

namespace ovmm {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

// 16-bit binary PGM (P5), big-endian sample order per the netpbm convention.
inline DepthFrame read_depth_pgm(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::istringstream in(data);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw DataError(path.string() + ": not a binary PGM");
  auto next_token = [&in, &path]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw DataError(path.string() + ": truncated PGM header");
  };
  const int width = std::stoi(next_token());
  const int height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (maxval < 256 || maxval > 65535) throw DataError(path.string() + ": expected 16-bit PGM");
  in.get();  // single whitespace after maxval
  DepthFrame frame = DepthFrame::zeros(width, height);
  const std::size_t payload = static_cast<std::size_t>(width) * height * 2;
  const std::size_t offset = static_cast<std::size_t>(in.tellg());
  if (data.size() < offset + payload) throw DataError(path.string() + ": truncated PGM payload");
  for (std::size_t i = 0; i < frame.values.size(); ++i) {
    const auto hi = static_cast<std::uint8_t>(data[offset + 2 * i]);
    const auto lo = static_cast<std::uint8_t>(data[offset + 2 * i + 1]);
    frame.values[i] = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return frame;
}

inline void write_depth_pgm(const std::filesystem::path& path, const DepthFrame& frame) {
  std::string out = "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) +
                    "\n65535\n";
  out.reserve(out.size() + frame.values.size() * 2);
  for (std::uint16_t v : frame.values) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  write_file(path, out);
}

// Uncompressed binary PPM (P6).
struct PpmImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major

  static PpmImage filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    PpmImage img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
      img.rgb[i] = r;
      img.rgb[i + 1] = g;
      img.rgb[i + 2] = b;
    }
    return img;
  }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
  }
};

inline void write_ppm(const std::filesystem::path& path, const PpmImage& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  write_file(path, out);
}

inline PpmImage read_ppm(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::istringstream in(data);
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P6" || maxval != 255) throw DataError(path.string() + ": not an 8-bit binary PPM");
  in.get();
  PpmImage img;
  img.width = width;
  img.height = height;
  const std::size_t payload = static_cast<std::size_t>(width) * height * 3;
  const std::size_t offset = static_cast<std::size_t>(in.tellg());
  if (data.size() < offset + payload) throw DataError(path.string() + ": truncated PPM payload");
  img.rgb.assign(data.begin() + static_cast<std::ptrdiff_t>(offset),
                 data.begin() + static_cast<std::ptrdiff_t>(offset + payload));
  return img;
}

// Little-endian float32 xyz triples.
inline std::string encode_cloud(const PointCloud& cloud) {
  std::string out;
  out.reserve(cloud.points.size() * 12);
  auto push = [&out](double v) {
    const float f = static_cast<float>(v);
    char buf[4];
    std::memcpy(buf, &f, 4);
    out.append(buf, 4);
  };
  for (const Vec3& p : cloud.points) {
    push(p.x);
    push(p.y);
    push(p.z);
  }
  return out;
}

inline PointCloud decode_cloud(const std::string& data) {
  if (data.size() % 12 != 0) throw DataError("cloud payload is not a multiple of 12 bytes");
  PointCloud cloud;
  cloud.points.resize(data.size() / 12);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    float f[3];
    std::memcpy(f, data.data() + i * 12, 12);
    cloud.points[i] = {f[0], f[1], f[2]};
  }
  return cloud;
}

}  // namespace ovmm
