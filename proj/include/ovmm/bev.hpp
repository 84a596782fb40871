#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ovmm/errors.hpp"

namespace ovmm {

struct GridIndex {
  int x = 0;
  int y = 0;
  bool operator==(const GridIndex&) const = default;
};

// Bird's-eye-view raster with a metric origin at the corner of cell (0,0).
template <typename Payload>
class BevGrid {
public:
  BevGrid() = default;

  BevGrid(double origin_x, double origin_y, double cell, int width, int height,
          Payload fill = Payload{})
      : origin_x_(origin_x), origin_y_(origin_y), cell_(cell), width_(width), height_(height),
        cells_(static_cast<std::size_t>(width) * height, fill) {
    if (cell <= 0.0) throw InputError("bev grid: cell size must be positive");
    if (width <= 0 || height <= 0) throw InputError("bev grid: dimensions must be positive");
  }

  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  double cell_size() const { return cell_; }
  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return cells_.size(); }

  bool in_bounds(const GridIndex& c) const {
    return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_;
  }

  const Payload& at(const GridIndex& c) const {
    return cells_[static_cast<std::size_t>(c.y) * width_ + c.x];
  }
  Payload& at(const GridIndex& c) {
    return cells_[static_cast<std::size_t>(c.y) * width_ + c.x];
  }

  const std::vector<Payload>& cells() const { return cells_; }
  std::vector<Payload>& cells() { return cells_; }

  GridIndex cell_of(double x, double y) const {
    return {static_cast<int>(std::floor((x - origin_x_) / cell_)),
            static_cast<int>(std::floor((y - origin_y_) / cell_))};
  }

  // Metric center of a cell.
  double center_x(const GridIndex& c) const { return origin_x_ + (c.x + 0.5) * cell_; }
  double center_y(const GridIndex& c) const { return origin_y_ + (c.y + 0.5) * cell_; }

  bool contains_point(double x, double y) const { return in_bounds(cell_of(x, y)); }

private:
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  double cell_ = 0.05;
  int width_ = 0;
  int height_ = 0;
  std::vector<Payload> cells_;
};

inline constexpr std::uint8_t kFreeCell = 0;
inline constexpr std::uint8_t kOccupiedCell = 1;

using Costmap = BevGrid<std::uint8_t>;

inline constexpr std::uint16_t kUnknownRegion = 0xffff;
inline const std::string kUnknownRegionName = "unknown";

// Dense region labels; cell payloads index into `names`, kUnknownRegion for
// cells with no proposal.
struct RegionGrid {
  BevGrid<std::uint16_t> labels;
  std::vector<std::string> names;

  const std::string& name_at(const GridIndex& c) const {
    const std::uint16_t idx = labels.at(c);
    return idx == kUnknownRegion ? kUnknownRegionName : names[idx];
  }

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

}  // namespace ovmm
