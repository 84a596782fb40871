#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ovmm/backend.hpp"
#include "ovmm/bev.hpp"
#include "ovmm/detection.hpp"
#include "ovmm/geometry.hpp"
#include "ovmm/io.hpp"

namespace ovmm {

// q = (label/box, geometric center, zero-mean relative geometry).
struct SemanticGeometricInstance {
  std::string label;
  double confidence = 1.0;
  PixelRect source_bbox;
  Vec3 center;                        // global frame, meters
  std::vector<Vec3> relative_geometry;  // offsets summing to zero
  int source_keyframe = -1;

  void validate() const {
    if (relative_geometry.empty()) throw InputError("instance: relative geometry must be non-empty");
    Vec3 sum;
    for (const Vec3& offset : relative_geometry) sum = sum + offset;
    if (sum.norm() > 1e-9 * static_cast<double>(relative_geometry.size())) {
      throw InputError("instance: relative geometry mean is not zero");
    }
  }

  std::vector<Vec3> absolute_points() const {
    std::vector<Vec3> out;
    out.reserve(relative_geometry.size());
    for (const Vec3& offset : relative_geometry) out.push_back(center + offset);
    return out;
  }
};

struct ExtractOptions {
  std::size_t min_points = 5;  // masks with fewer valid-depth pixels are dropped
  double max_range = 6.0;
};

// Segments the re-projected depth points of a key frame by detection mask and
// decomposes each masked point set into center + relative geometry, expressed
// in the global frame.
inline std::vector<SemanticGeometricInstance> extract_instances(
    const KeyFrame& keyframe, const CameraIntrinsics& intrinsics, const ExtractOptions& opts = {}) {
  intrinsics.validate();
  keyframe.pose.validate();
  if (keyframe.depth.width != intrinsics.width || keyframe.depth.height != intrinsics.height) {
    throw InputError("extract_instances: depth dimensions do not match intrinsics");
  }
  std::vector<SemanticGeometricInstance> instances;
  for (const Detection2D& detection : keyframe.detections) {
    detection.validate(intrinsics.width, intrinsics.height);
    std::vector<Vec3> points;
    detection.mask.for_each_pixel([&](int u, int v) {
      const std::uint16_t raw = keyframe.depth.at(u, v);
      if (raw == 0) return;
      const double z = raw * intrinsics.depth_scale;
      if (opts.max_range > 0.0 && z > opts.max_range) return;
      points.push_back(keyframe.pose.apply({(u - intrinsics.cx) * z / intrinsics.fx,
                                            (v - intrinsics.cy) * z / intrinsics.fy, z}));
    });
    if (points.size() < opts.min_points || points.empty()) continue;
    Vec3 center;
    for (const Vec3& p : points) center = center + p;
    center = center * (1.0 / static_cast<double>(points.size()));
    SemanticGeometricInstance q;
    q.label = detection.label;
    q.confidence = detection.confidence;
    q.source_bbox = detection.bbox;
    q.center = center;
    q.relative_geometry.reserve(points.size());
    for (const Vec3& p : points) q.relative_geometry.push_back(p - center);
    q.source_keyframe = keyframe.index;
    instances.push_back(std::move(q));
  }
  return instances;
}

struct CostmapOptions {
  double cell = 0.05;
  double z_min = 0.05;
  double z_max = 1.8;
  double inflation = 0.3;
  int occ_threshold = 3;
  // When unset the grid extent is the cloud bounding box plus one cell of
  // margin on each side.
  std::optional<double> origin_x;
  std::optional<double> origin_y;
  std::optional<int> width;
  std::optional<int> height;
};

// Flattens a structural cloud into a 2D occupancy costmap: a cell is occupied
// iff at least occ_threshold points fall inside it within the z band, then the
// occupied set is dilated by the inflation radius.
inline Costmap build_costmap(const PointCloud& cloud, const CostmapOptions& opts = {}) {
  if (opts.cell <= 0.0) throw InputError("build_costmap: cell size must be positive");
  if (opts.z_min >= opts.z_max) throw InputError("build_costmap: z_min must be below z_max");

  double ox, oy;
  int w, h;
  if (opts.origin_x && opts.origin_y && opts.width && opts.height) {
    ox = *opts.origin_x;
    oy = *opts.origin_y;
    w = *opts.width;
    h = *opts.height;
  } else {
    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
    bool any = false;
    for (const Vec3& p : cloud.points) {
      if (!any) {
        min_x = max_x = p.x;
        min_y = max_y = p.y;
        any = true;
      } else {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
      }
    }
    if (!any) return Costmap(0.0, 0.0, opts.cell, 1, 1, kFreeCell);
    ox = min_x - opts.cell;
    oy = min_y - opts.cell;
    w = static_cast<int>(std::ceil((max_x - ox) / opts.cell)) + 1;
    h = static_cast<int>(std::ceil((max_y - oy) / opts.cell)) + 1;
  }

  BevGrid<int> counts(ox, oy, opts.cell, w, h, 0);
  for (const Vec3& p : cloud.points) {
    if (p.z < opts.z_min || p.z > opts.z_max) continue;
    const GridIndex c = counts.cell_of(p.x, p.y);
    if (counts.in_bounds(c)) counts.at(c)++;
  }

  Costmap occupancy(ox, oy, opts.cell, w, h, kFreeCell);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (counts.at({x, y}) >= opts.occ_threshold) occupancy.at({x, y}) = kOccupiedCell;
    }
  }

  if (opts.inflation <= 0.0) return occupancy;
  const int radius_cells = static_cast<int>(std::ceil(opts.inflation / opts.cell));
  Costmap inflated = occupancy;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (occupancy.at({x, y}) != kOccupiedCell) continue;
      for (int dy = -radius_cells; dy <= radius_cells; ++dy) {
        for (int dx = -radius_cells; dx <= radius_cells; ++dx) {
          if (std::hypot(dx * opts.cell, dy * opts.cell) > opts.inflation) continue;
          const GridIndex c{x + dx, y + dy};
          if (inflated.in_bounds(c)) inflated.at(c) = kOccupiedCell;
        }
      }
    }
  }
  return inflated;
}

struct SweepOptions {
  double window_radius = 1.5;  // r
  double step = 0.5;           // delta d
};

// Circular sliding-window region abstraction over the BEV plane. Every cell of
// the target grid ends up with exactly one label: the top-1 proposal of its
// nearest nonempty window, windows within 2r acting as fallback for cells whose
// nearest window saw no instances, and "unknown" elsewhere.
template <typename Bounds>
inline RegionGrid sweep_regions(const std::vector<SemanticGeometricInstance>& instances,
                                const Bounds& bounds, const SweepOptions& opts,
                                RegionProposer& proposer,
                                const std::vector<std::string>& candidates) {
  if (opts.window_radius <= 0.0 || opts.step <= 0.0) {
    throw InputError("sweep_regions: window radius and step must be positive");
  }
  if (candidates.empty()) throw InputError("sweep_regions: candidate list must be non-empty");

  const double ox = bounds.origin_x();
  const double oy = bounds.origin_y();
  const double extent_x = bounds.width() * bounds.cell_size();
  const double extent_y = bounds.height() * bounds.cell_size();
  const int steps_x = static_cast<int>(std::floor(extent_x / opts.step)) + 1;
  const int steps_y = static_cast<int>(std::floor(extent_y / opts.step)) + 1;

  RegionGrid grid;
  grid.names = candidates;
  grid.names.push_back(kUnknownRegionName);
  const auto unknown_index = static_cast<std::uint16_t>(candidates.size());
  grid.labels = BevGrid<std::uint16_t>(ox, oy, bounds.cell_size(), bounds.width(), bounds.height(),
                                       unknown_index);

  // One proposer call per nonempty window, sweep order row-major in (sy, sx).
  const double r2 = opts.window_radius * opts.window_radius;
  std::vector<std::int32_t> window_label(static_cast<std::size_t>(steps_x) * steps_y, -1);
  auto window_at = [&](int sx, int sy) -> std::int32_t& {
    return window_label[static_cast<std::size_t>(sy) * steps_x + sx];
  };
  for (int sy = 0; sy < steps_y; ++sy) {
    for (int sx = 0; sx < steps_x; ++sx) {
      const double wx = ox + sx * opts.step;
      const double wy = oy + sy * opts.step;
      std::vector<std::string> labels;
      for (const SemanticGeometricInstance& q : instances) {
        const double dx = q.center.x - wx;
        const double dy = q.center.y - wy;
        if (dx * dx + dy * dy > r2) continue;
        if (std::find(labels.begin(), labels.end(), q.label) == labels.end()) {
          labels.push_back(q.label);
        }
      }
      if (labels.empty()) continue;
      std::int32_t label = unknown_index;
      for (int attempt = 0; attempt < 2; ++attempt) {
        try {
          const std::vector<std::string> proposals = proposer.propose_regions(labels, candidates);
          const auto it = std::find(candidates.begin(), candidates.end(), proposals.front());
          label = static_cast<std::int32_t>(it - candidates.begin());
          break;
        } catch (const BackendError&) {
          // retried once, then the window stays unknown
        }
      }
      window_at(sx, sy) = label;
    }
  }

  // Cell labels: nearest nonempty window within 2r, ties to earlier sweep order.
  const double fallback = 2.0 * opts.window_radius;
  const int search_radius = static_cast<int>(std::ceil(fallback / opts.step)) + 1;
  for (int cy = 0; cy < bounds.height(); ++cy) {
    for (int cx = 0; cx < bounds.width(); ++cx) {
      const GridIndex cell{cx, cy};
      const double px = grid.labels.center_x(cell);
      const double py = grid.labels.center_y(cell);
      const int base_x = static_cast<int>(std::round((px - ox) / opts.step));
      const int base_y = static_cast<int>(std::round((py - oy) / opts.step));
      double best_dist = std::numeric_limits<double>::infinity();
      std::int32_t best_label = -1;
      long best_order = 0;
      for (int dy = -search_radius; dy <= search_radius; ++dy) {
        for (int dx = -search_radius; dx <= search_radius; ++dx) {
          const int sx = base_x + dx;
          const int sy = base_y + dy;
          if (sx < 0 || sx >= steps_x || sy < 0 || sy >= steps_y) continue;
          if (window_at(sx, sy) < 0) continue;
          const double wx = ox + sx * opts.step;
          const double wy = oy + sy * opts.step;
          const double dist = std::hypot(px - wx, py - wy);
          if (dist > fallback) continue;
          const long order = static_cast<long>(sy) * steps_x + sx;
          if (dist < best_dist - 1e-12 ||
              (std::abs(dist - best_dist) <= 1e-12 && order < best_order)) {
            best_dist = dist;
            best_label = window_at(sx, sy);
            best_order = order;
          }
        }
      }
      if (best_label >= 0) {
        grid.labels.at(cell) = static_cast<std::uint16_t>(best_label);
      }
    }
  }

  // Drop candidate names that never appear, keeping payload indices stable is
  // not required here: rebuild a compact name list.
  std::set<std::uint16_t> used(grid.labels.cells().begin(), grid.labels.cells().end());
  std::vector<std::string> compact;
  std::vector<std::uint16_t> remap(grid.names.size(), kUnknownRegion);
  for (std::uint16_t idx : used) {
    if (idx == unknown_index) continue;
    remap[idx] = static_cast<std::uint16_t>(compact.size());
    compact.push_back(grid.names[idx]);
  }
  for (std::uint16_t& v : grid.labels.cells()) {
    v = (v == unknown_index) ? kUnknownRegion : remap[v];
  }
  grid.names = std::move(compact);
  return grid;
}

// The 3-layer map: structural cloud + flattened costmap, registered
// semantic geometric instances, and dense BEV region labels.
struct SemanticMap3D {
  PointCloud structural;
  Costmap costmap;
  std::vector<SemanticGeometricInstance> instances;
  RegionGrid regions;
  std::vector<GridIndex> surface_cells;  // designated searchable surfaces

  const std::vector<std::string>& region_names() const { return regions.names; }
};

inline void register_instance(SemanticMap3D& map, SemanticGeometricInstance q) {
  q.validate();
  if (!map.costmap.contains_point(q.center.x, q.center.y)) {
    throw InputError("register_instance: center outside map bounds");
  }
  map.instances.push_back(std::move(q));
}

struct SearchableOptions {
  double min_separation = 0.5;
  double reach_radius = 0.8;
};

struct SearchPose {
  GridIndex cell;
  double x = 0.0;
  double y = 0.0;
};

// Deterministic (column-major: x ascending, then y) feasible search poses for
// a region: free cells with a matching region label, pairwise separated, each
// within reach of an instance-bearing or designated surface cell. Column
// order makes a region sweep advance along the room once instead of
// shuttling over full rows.
inline std::vector<SearchPose> searchable_locations(const SemanticMap3D& map,
                                                    const std::string& region,
                                                    const SearchableOptions& opts = {}) {
  const int region_index = map.regions.index_of(region);
  if (region_index < 0) throw InputError("searchable_locations: unknown region '" + region + "'");

  std::vector<GridIndex> targets = map.surface_cells;
  for (const SemanticGeometricInstance& q : map.instances) {
    const GridIndex c = map.costmap.cell_of(q.center.x, q.center.y);
    if (map.costmap.in_bounds(c)) targets.push_back(c);
  }

  const double cell = map.costmap.cell_size();
  std::vector<SearchPose> poses;
  for (int x = 0; x < map.costmap.width(); ++x) {
    for (int y = 0; y < map.costmap.height(); ++y) {
      const GridIndex c{x, y};
      if (map.costmap.at(c) != kFreeCell) continue;
      if (!map.regions.labels.in_bounds(c) ||
          map.regions.labels.at(c) != static_cast<std::uint16_t>(region_index)) {
        continue;
      }
      bool near_target = false;
      for (const GridIndex& t : targets) {
        if (std::hypot((t.x - x) * cell, (t.y - y) * cell) <= opts.reach_radius) {
          near_target = true;
          break;
        }
      }
      if (!near_target) continue;
      bool separated = true;
      for (const SearchPose& accepted : poses) {
        if (std::hypot((accepted.cell.x - x) * cell, (accepted.cell.y - y) * cell) <
            opts.min_separation) {
          separated = false;
          break;
        }
      }
      if (!separated) continue;
      poses.push_back({c, map.costmap.center_x(c), map.costmap.center_y(c)});
    }
  }
  return poses;
}

// ---- Map directory serialization ----------------------------------------

namespace detail {

template <typename Payload>
json grid_header(const BevGrid<Payload>& grid, const std::string& payload_file) {
  json header;
  header["origin"] = {grid.origin_x(), grid.origin_y()};
  header["cell"] = grid.cell_size();
  header["width"] = grid.width();
  header["height"] = grid.height();
  header["payload"] = payload_file;
  return header;
}

inline void check_grid_header(const json& header, std::size_t payload_bytes,
                              std::size_t bytes_per_cell, const std::string& what) {
  const auto expected = static_cast<std::size_t>(header.at("width").get<int>()) *
                        header.at("height").get<int>() * bytes_per_cell;
  if (payload_bytes != expected) throw DataError(what + ": payload size mismatch");
}

}  // namespace detail

inline void save_map(const SemanticMap3D& map, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  write_file(dir / "cloud.bin", encode_cloud(map.structural));

  json costmap_header = detail::grid_header(map.costmap, "costmap.bin");
  write_file(dir / "costmap.json", costmap_header.dump(2) + "\n");
  write_file(dir / "costmap.bin",
             std::string(reinterpret_cast<const char*>(map.costmap.cells().data()),
                         map.costmap.cells().size()));

  json regions_header = detail::grid_header(map.regions.labels, "regions.bin");
  regions_header["names"] = map.regions.names;
  write_file(dir / "regions.json", regions_header.dump(2) + "\n");
  std::string region_payload;
  region_payload.reserve(map.regions.labels.size() * 2);
  for (std::uint16_t v : map.regions.labels.cells()) {
    region_payload.push_back(static_cast<char>(v & 0xff));
    region_payload.push_back(static_cast<char>(v >> 8));
  }
  write_file(dir / "regions.bin", region_payload);

  json surfaces = json::array();
  for (const GridIndex& c : map.surface_cells) surfaces.push_back({c.x, c.y});
  write_file(dir / "surfaces.json", json{{"cells", surfaces}}.dump(2) + "\n");

  std::ostringstream lines;
  std::string offsets;
  std::size_t offset_index = 0;
  for (const SemanticGeometricInstance& q : map.instances) {
    json line;
    line["label"] = q.label;
    line["confidence"] = q.confidence;
    line["bbox"] = {q.source_bbox.x, q.source_bbox.y, q.source_bbox.width, q.source_bbox.height};
    line["center"] = {q.center.x, q.center.y, q.center.z};
    line["keyframe"] = q.source_keyframe;
    line["offset_count"] = q.relative_geometry.size();
    line["offset_index"] = offset_index;
    lines << line.dump() << "\n";
    PointCloud offsets_cloud;
    offsets_cloud.points = q.relative_geometry;
    offsets += encode_cloud(offsets_cloud);
    offset_index += q.relative_geometry.size();
  }
  write_file(dir / "instances.jsonl", lines.str());
  write_file(dir / "instances.bin", offsets);
}

inline SemanticMap3D load_map(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  SemanticMap3D map;
  map.structural = decode_cloud(read_file(dir / "cloud.bin"));

  {
    const json header = json::parse(read_file(dir / "costmap.json"));
    const std::string payload = read_file(dir / header.at("payload").get<std::string>());
    detail::check_grid_header(header, payload.size(), 1, "costmap");
    map.costmap = Costmap(header.at("origin")[0].get<double>(), header.at("origin")[1].get<double>(),
                          header.at("cell").get<double>(), header.at("width").get<int>(),
                          header.at("height").get<int>());
    std::copy(payload.begin(), payload.end(),
              reinterpret_cast<char*>(map.costmap.cells().data()));
  }
  {
    const json header = json::parse(read_file(dir / "regions.json"));
    const std::string payload = read_file(dir / header.at("payload").get<std::string>());
    detail::check_grid_header(header, payload.size(), 2, "regions");
    map.regions.names = header.at("names").get<std::vector<std::string>>();
    map.regions.labels = BevGrid<std::uint16_t>(
        header.at("origin")[0].get<double>(), header.at("origin")[1].get<double>(),
        header.at("cell").get<double>(), header.at("width").get<int>(),
        header.at("height").get<int>());
    for (std::size_t i = 0; i < map.regions.labels.size(); ++i) {
      const auto lo = static_cast<std::uint8_t>(payload[2 * i]);
      const auto hi = static_cast<std::uint8_t>(payload[2 * i + 1]);
      map.regions.labels.cells()[i] = static_cast<std::uint16_t>(lo | (hi << 8));
    }
  }
  {
    const json surfaces = json::parse(read_file(dir / "surfaces.json"));
    for (const auto& c : surfaces.at("cells")) {
      map.surface_cells.push_back({c[0].get<int>(), c[1].get<int>()});
    }
  }
  {
    const std::string lines = read_file(dir / "instances.jsonl");
    const PointCloud offsets = decode_cloud(read_file(dir / "instances.bin"));
    std::istringstream in(lines);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      SemanticGeometricInstance q;
      q.label = j.at("label").get<std::string>();
      q.confidence = j.at("confidence").get<double>();
      q.source_bbox = {j.at("bbox")[0].get<int>(), j.at("bbox")[1].get<int>(),
                       j.at("bbox")[2].get<int>(), j.at("bbox")[3].get<int>()};
      q.center = {j.at("center")[0].get<double>(), j.at("center")[1].get<double>(),
                  j.at("center")[2].get<double>()};
      q.source_keyframe = j.at("keyframe").get<int>();
      const auto count = j.at("offset_count").get<std::size_t>();
      const auto index = j.at("offset_index").get<std::size_t>();
      if (index + count > offsets.points.size()) throw DataError("instances: offset range out of bounds");
      q.relative_geometry.assign(offsets.points.begin() + static_cast<std::ptrdiff_t>(index),
                                 offsets.points.begin() + static_cast<std::ptrdiff_t>(index + count));
      map.instances.push_back(std::move(q));
    }
  }
  return map;
}

}  // namespace ovmm
