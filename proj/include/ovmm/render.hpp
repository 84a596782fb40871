#pragma once

#include <vector>

#include "ovmm/bev.hpp"
#include "ovmm/io.hpp"
#include "ovmm/semantic_map.hpp"

namespace ovmm {

struct RenderOptions {
  int pixel_scale = 4;  // pixels per grid cell
};

// Fixed palette; region index picks cyclically.
inline Color3 region_color(int index) {
  static const Color3 palette[] = {
      {86, 156, 214}, {220, 163, 82}, {120, 190, 120}, {200, 120, 190},
      {170, 170, 90}, {90, 180, 180}, {200, 110, 110}, {140, 140, 220},
  };
  return palette[static_cast<std::size_t>(index) % (sizeof palette / sizeof palette[0])];
}

inline constexpr Color3 kUnknownColor{40, 40, 40};
inline constexpr Color3 kObstacleColor{10, 10, 10};
inline constexpr Color3 kInstanceColor{255, 255, 255};
inline constexpr Color3 kPathColor{255, 40, 40};

// BEV composite: region colors under the inflated obstacle mask, instance
// markers, and (optionally) an exact cell-for-cell path overlay. Image rows
// are flipped so +y points up.
inline PpmImage render_map(const SemanticMap3D& map, const std::vector<GridIndex>& path = {},
                           const RenderOptions& opts = {}) {
  if (opts.pixel_scale < 1) throw InputError("render_map: pixel scale must be >= 1");
  const int w = map.costmap.width();
  const int h = map.costmap.height();
  const int s = opts.pixel_scale;
  PpmImage img = PpmImage::filled(w * s, h * s, kUnknownColor.r, kUnknownColor.g, kUnknownColor.b);

  auto paint_cell = [&img, s, h](const GridIndex& c, Color3 color) {
    const int py0 = (h - 1 - c.y) * s;
    const int px0 = c.x * s;
    for (int dy = 0; dy < s; ++dy) {
      for (int dx = 0; dx < s; ++dx) img.set(px0 + dx, py0 + dy, color.r, color.g, color.b);
    }
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const GridIndex c{x, y};
      Color3 color = kUnknownColor;
      if (map.regions.labels.in_bounds(c) && map.regions.labels.at(c) != kUnknownRegion) {
        color = region_color(map.regions.labels.at(c));
      }
      if (map.costmap.at(c) != kFreeCell) color = kObstacleColor;
      paint_cell(c, color);
    }
  }
  for (const SemanticGeometricInstance& q : map.instances) {
    const GridIndex c = map.costmap.cell_of(q.center.x, q.center.y);
    if (map.costmap.in_bounds(c)) paint_cell(c, kInstanceColor);
  }
  for (const GridIndex& c : path) {
    if (map.costmap.in_bounds(c)) paint_cell(c, kPathColor);
  }
  return img;
}

inline json path_to_json(const std::vector<GridIndex>& path) {
  json cells = json::array();
  for (const GridIndex& c : path) cells.push_back({c.x, c.y});
  return json{{"cells", cells}};
}

inline std::vector<GridIndex> path_from_json(const json& j) {
  std::vector<GridIndex> path;
  for (const auto& c : j.at("cells")) path.push_back({c[0].get<int>(), c[1].get<int>()});
  return path;
}

}  // namespace ovmm
