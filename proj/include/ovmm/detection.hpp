#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ovmm/errors.hpp"
#include "ovmm/geometry.hpp"

namespace ovmm {

struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool contains(int px, int py) const {
    return px >= x && px < x + width && py >= y && py < y + height;
  }
};

// Run-length encoded pixel mask: runs of (row, x_start, length).
struct RleMask {
  struct Run {
    int row = 0;
    int x = 0;
    int length = 0;
  };
  std::vector<Run> runs;

  std::size_t pixel_count() const {
    std::size_t n = 0;
    for (const Run& r : runs) n += static_cast<std::size_t>(r.length);
    return n;
  }

  template <typename Fn>
  void for_each_pixel(Fn&& fn) const {
    for (const Run& r : runs) {
      for (int dx = 0; dx < r.length; ++dx) fn(r.x + dx, r.row);
    }
  }

  static RleMask from_pixels(std::vector<std::pair<int, int>> pixels) {
    std::sort(pixels.begin(), pixels.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    RleMask mask;
    for (const auto& [x, y] : pixels) {
      if (!mask.runs.empty() && mask.runs.back().row == y &&
          mask.runs.back().x + mask.runs.back().length == x) {
        mask.runs.back().length++;
      } else {
        mask.runs.push_back({y, x, 1});
      }
    }
    return mask;
  }

  static RleMask from_rect(const PixelRect& rect) {
    RleMask mask;
    for (int row = rect.y; row < rect.y + rect.height; ++row) {
      mask.runs.push_back({row, rect.x, rect.width});
    }
    return mask;
  }
};

// A 2D open-vocabulary detection with its segmentation mask.
struct Detection2D {
  std::string label;
  double confidence = 1.0;
  PixelRect bbox;
  RleMask mask;

  void validate(int image_width, int image_height) const {
    if (confidence < 0.0 || confidence > 1.0) throw InputError("detection: confidence out of [0,1]");
    if (bbox.x < 0 || bbox.y < 0 || bbox.x + bbox.width > image_width ||
        bbox.y + bbox.height > image_height) {
      throw InputError("detection: bbox outside image bounds");
    }
    for (const RleMask::Run& r : mask.runs) {
      if (!bbox.contains(r.x, r.row) || !bbox.contains(r.x + r.length - 1, r.row)) {
        throw InputError("detection: mask outside bbox");
      }
    }
  }
};

// One unit of mapping input: pose + depth + detections; the RGB path is kept
// only as a visualization reference.
struct KeyFrame {
  int index = 0;
  std::optional<std::string> rgb_path;
  DepthFrame depth;
  Pose pose;
  std::vector<Detection2D> detections;
};

}  // namespace ovmm
