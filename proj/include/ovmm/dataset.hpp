#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ovmm/backend.hpp"
#include "ovmm/detection.hpp"
#include "ovmm/errors.hpp"
#include "ovmm/geometry.hpp"
#include "ovmm/io.hpp"
#include "ovmm/semantic_map.hpp"

namespace ovmm {

// Recorded mapping run: shared intrinsics plus an ordered list of key frames,
// each referencing a depth raster and a detections file on disk.
struct DatasetManifest {
  CameraIntrinsics intrinsics;
  std::string units = "millimeters";
  std::vector<KeyFrame> keyframes;
  std::vector<std::string> region_candidates;  // optional; empty = skip sweep
};

inline Detection2D detection_from_json(const json& j) {
  Detection2D det;
  det.label = j.at("label").get<std::string>();
  det.confidence = j.value("confidence", 1.0);
  det.bbox = {j.at("bbox")[0].get<int>(), j.at("bbox")[1].get<int>(), j.at("bbox")[2].get<int>(),
              j.at("bbox")[3].get<int>()};
  if (!j.contains("mask") || (j["mask"].is_string() && j["mask"] == "bbox")) {
    det.mask = RleMask::from_rect(det.bbox);
  } else {
    for (const auto& run : j.at("mask").at("runs")) {
      det.mask.runs.push_back({run[0].get<int>(), run[1].get<int>(), run[2].get<int>()});
    }
  }
  return det;
}

inline json detection_to_json(const Detection2D& det) {
  json j;
  j["label"] = det.label;
  j["confidence"] = det.confidence;
  j["bbox"] = {det.bbox.x, det.bbox.y, det.bbox.width, det.bbox.height};
  json runs = json::array();
  for (const RleMask::Run& run : det.mask.runs) runs.push_back({run.row, run.x, run.length});
  j["mask"] = {{"runs", runs}};
  return j;
}

// Manifest JSON layout:
//   {"intrinsics": {...}, "units": "millimeters",
//    "region_candidates": [...],
//    "keyframes": [{"index": k, "pose": [16 row-major], "depth": path,
//                   "detections": path, "rgb": path?}, ...]}
// Relative file paths resolve against the manifest directory.
inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw DataError(path.string() + ": invalid manifest JSON");
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&base](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  DatasetManifest manifest;
  try {
    const json& ji = j.at("intrinsics");
    manifest.intrinsics.fx = ji.at("fx").get<double>();
    manifest.intrinsics.fy = ji.at("fy").get<double>();
    manifest.intrinsics.cx = ji.at("cx").get<double>();
    manifest.intrinsics.cy = ji.at("cy").get<double>();
    manifest.intrinsics.width = ji.at("width").get<int>();
    manifest.intrinsics.height = ji.at("height").get<int>();
    manifest.intrinsics.depth_scale = ji.value("depth_scale", 0.001);
    manifest.intrinsics.validate();
    manifest.units = j.value("units", std::string("millimeters"));
    if (j.contains("region_candidates")) {
      manifest.region_candidates = j["region_candidates"].get<std::vector<std::string>>();
    }

    for (const auto& jk : j.at("keyframes")) {
      KeyFrame frame;
      frame.index = jk.at("index").get<int>();
      std::array<double, 16> m{};
      const json& jp = jk.at("pose");
      if (jp.size() != 16) throw DataError("manifest: pose must have 16 entries");
      for (std::size_t i = 0; i < 16; ++i) m[i] = jp[i].get<double>();
      frame.pose = Pose(m);
      frame.depth = read_depth_pgm(resolve(jk.at("depth").get<std::string>()));
      if (frame.depth.width != manifest.intrinsics.width ||
          frame.depth.height != manifest.intrinsics.height) {
        throw DataError("manifest: depth size mismatch at keyframe " + std::to_string(frame.index));
      }
      json dets = json::parse(read_file(resolve(jk.at("detections").get<std::string>())), nullptr,
                              false);
      if (dets.is_discarded()) throw DataError("manifest: invalid detections JSON");
      for (const auto& jd : dets) frame.detections.push_back(detection_from_json(jd));
      if (jk.contains("rgb")) frame.rgb_path = resolve(jk["rgb"].get<std::string>()).string();
      manifest.keyframes.push_back(std::move(frame));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const InputError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (manifest.keyframes.empty()) throw DataError(path.string() + ": manifest has no keyframes");
  return manifest;
}

struct MapBuildOptions {
  double voxel = 0.0;  // structural downsampling; 0 keeps every point
  ReprojectOptions reproject;
  ExtractOptions extract;
  CostmapOptions costmap;
  SweepOptions sweep;
};

// The full mapping pipeline: per-frame depth re-projection into the global
// frame, instance extraction, costmap flattening and, when candidates and a
// proposer are available, the region sweep.
inline SemanticMap3D build_map_from_manifest(const DatasetManifest& manifest,
                                             const MapBuildOptions& opts = {},
                                             RegionProposer* proposer = nullptr) {
  std::vector<PointCloud> clouds;
  std::vector<SemanticGeometricInstance> instances;
  for (const KeyFrame& frame : manifest.keyframes) {
    clouds.push_back(transform_points(frame.pose, reproject_depth(manifest.intrinsics, frame.depth,
                                                                  opts.reproject)));
    for (SemanticGeometricInstance& q : extract_instances(frame, manifest.intrinsics, opts.extract)) {
      instances.push_back(std::move(q));
    }
  }

  SemanticMap3D map;
  map.structural = accumulate(clouds, opts.voxel);
  map.costmap = build_costmap(map.structural, opts.costmap);
  if (proposer != nullptr && !manifest.region_candidates.empty()) {
    map.regions = sweep_regions(instances, map.costmap, opts.sweep, *proposer,
                                manifest.region_candidates);
  } else {
    map.regions.labels = BevGrid<std::uint16_t>(map.costmap.origin_x(), map.costmap.origin_y(),
                                                map.costmap.cell_size(), map.costmap.width(),
                                                map.costmap.height(), kUnknownRegion);
  }
  for (SemanticGeometricInstance& q : instances) {
    if (!map.costmap.contains_point(q.center.x, q.center.y)) continue;
    register_instance(map, std::move(q));
  }
  return map;
}

}  // namespace ovmm
