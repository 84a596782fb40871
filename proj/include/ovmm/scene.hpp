#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ovmm/backend.hpp"
#include "ovmm/bev.hpp"
#include "ovmm/errors.hpp"
#include "ovmm/geometry.hpp"
#include "ovmm/semantic_map.hpp"

namespace ovmm {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct MetricRect {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;

  bool contains(double px, double py) const {
    return px >= x && px < x + width && py >= y && py < y + height;
  }
};

// Even-odd ray casting.
inline bool point_in_polygon(const std::vector<Point2>& polygon, double px, double py) {
  bool inside = false;
  for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[j];
    if ((a.y > py) != (b.y > py) &&
        px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

struct SceneRegion {
  std::string name;
  std::vector<Point2> polygon;
  std::vector<MetricRect> surfaces;  // tables etc.; obstacles that carry objects
  Point2 drop_point;                 // where relocated objects end up
};

struct SceneObject {
  std::string category;
  std::string region;  // default placement region
  Point2 position;
};

// Experiment scene: region layout, default object placement, start pose and
// the affinity tables backing the mock backend.
struct Scene {
  std::string name;
  double cell = 0.1;
  double extent_x = 0.0;
  double extent_y = 0.0;
  double wall_thickness = 0.2;
  double inflation = 0.2;
  Point2 start;
  std::vector<SceneRegion> regions;
  std::vector<MetricRect> walls;  // extra obstacle rectangles
  std::vector<SceneObject> objects;
  AffinityTable affinity;
  std::vector<std::string> extra_lexicon;

  std::vector<std::string> region_names() const {
    std::vector<std::string> names;
    names.reserve(regions.size());
    for (const SceneRegion& r : regions) names.push_back(r.name);
    return names;
  }

  const SceneRegion& region(const std::string& name) const {
    for (const SceneRegion& r : regions) {
      if (r.name == name) return r;
    }
    throw InputError("scene: unknown region '" + name + "'");
  }

  // Distinct category list in first-appearance order.
  std::vector<std::string> categories() const {
    std::vector<std::string> out;
    for (const SceneObject& obj : objects) {
      if (std::find(out.begin(), out.end(), obj.category) == out.end()) {
        out.push_back(obj.category);
      }
    }
    return out;
  }

  // All default regions housing a category (a category may appear in several).
  std::vector<std::string> default_regions_of(const std::string& category) const {
    std::vector<std::string> out;
    for (const SceneObject& obj : objects) {
      if (obj.category == category &&
          std::find(out.begin(), out.end(), obj.region) == out.end()) {
        out.push_back(obj.region);
      }
    }
    return out;
  }

  std::vector<std::string> object_lexicon() const {
    std::vector<std::string> lex = categories();
    lex.insert(lex.end(), extra_lexicon.begin(), extra_lexicon.end());
    return lex;
  }

  void validate() const {
    if (regions.empty()) throw InputError("scene: needs at least one region");
    std::vector<std::string> names = region_names();
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw InputError("scene: duplicate region names");
    }
    for (const SceneRegion& r : regions) {
      if (r.surfaces.empty()) throw InputError("scene: region '" + r.name + "' has no surface");
    }
    for (const SceneObject& obj : objects) {
      const SceneRegion& r = region(obj.region);
      if (!point_in_polygon(r.polygon, obj.position.x, obj.position.y)) {
        throw InputError("scene: object '" + obj.category + "' lies outside region '" + obj.region +
                         "'");
      }
    }
  }
};

// ---- Scene JSON ----------------------------------------------------------

inline json scene_to_json(const Scene& scene) {
  json j;
  j["name"] = scene.name;
  j["cell"] = scene.cell;
  j["extent"] = {scene.extent_x, scene.extent_y};
  j["wall_thickness"] = scene.wall_thickness;
  j["inflation"] = scene.inflation;
  j["start"] = {scene.start.x, scene.start.y};
  j["regions"] = json::array();
  for (const SceneRegion& r : scene.regions) {
    json jr;
    jr["name"] = r.name;
    jr["polygon"] = json::array();
    for (const Point2& p : r.polygon) jr["polygon"].push_back({p.x, p.y});
    jr["surfaces"] = json::array();
    for (const MetricRect& s : r.surfaces) jr["surfaces"].push_back({s.x, s.y, s.width, s.height});
    jr["drop_point"] = {r.drop_point.x, r.drop_point.y};
    j["regions"].push_back(jr);
  }
  j["walls"] = json::array();
  for (const MetricRect& w : scene.walls) j["walls"].push_back({w.x, w.y, w.width, w.height});
  j["objects"] = json::array();
  for (const SceneObject& o : scene.objects) {
    j["objects"].push_back({{"category", o.category},
                            {"region", o.region},
                            {"position", {o.position.x, o.position.y}}});
  }
  j["affinity"] = scene.affinity.to_json();
  j["extra_lexicon"] = scene.extra_lexicon;
  return j;
}

inline Scene scene_from_json(const json& j) {
  Scene scene;
  scene.name = j.at("name").get<std::string>();
  scene.cell = j.at("cell").get<double>();
  scene.extent_x = j.at("extent")[0].get<double>();
  scene.extent_y = j.at("extent")[1].get<double>();
  scene.wall_thickness = j.at("wall_thickness").get<double>();
  scene.inflation = j.at("inflation").get<double>();
  scene.start = {j.at("start")[0].get<double>(), j.at("start")[1].get<double>()};
  for (const auto& jr : j.at("regions")) {
    SceneRegion r;
    r.name = jr.at("name").get<std::string>();
    for (const auto& p : jr.at("polygon")) r.polygon.push_back({p[0].get<double>(), p[1].get<double>()});
    for (const auto& s : jr.at("surfaces")) {
      r.surfaces.push_back({s[0].get<double>(), s[1].get<double>(), s[2].get<double>(),
                            s[3].get<double>()});
    }
    r.drop_point = {jr.at("drop_point")[0].get<double>(), jr.at("drop_point")[1].get<double>()};
    scene.regions.push_back(std::move(r));
  }
  for (const auto& w : j.at("walls")) {
    scene.walls.push_back({w[0].get<double>(), w[1].get<double>(), w[2].get<double>(),
                           w[3].get<double>()});
  }
  for (const auto& jo : j.at("objects")) {
    scene.objects.push_back({jo.at("category").get<std::string>(),
                             jo.at("region").get<std::string>(),
                             {jo.at("position")[0].get<double>(), jo.at("position")[1].get<double>()}});
  }
  scene.affinity = AffinityTable::from_json(j.at("affinity"));
  scene.extra_lexicon = j.at("extra_lexicon").get<std::vector<std::string>>();
  scene.validate();
  return scene;
}

inline Scene load_scene(const std::filesystem::path& path) {
  json parsed = json::parse(read_file(path), nullptr, false);
  if (parsed.is_discarded()) throw DataError(path.string() + ": invalid scene JSON");
  try {
    return scene_from_json(parsed);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline MockBackend make_mock_backend(const Scene& scene) {
  return MockBackend(scene.affinity, scene.object_lexicon(), scene.region_names());
}

// ---- Scene -> map synthesis ----------------------------------------------
//
// Builds the 3DSMap of a scene directly from its layout: border walls and
// surfaces become the structural layer, region polygons the region layer, and
// the default objects are registered as instances. This stands in for the
// mapping run when simulating missions.
inline SemanticMap3D synthesize_map(const Scene& scene) {
  scene.validate();

  const double cell = scene.cell;
  const int width = static_cast<int>(std::lround(scene.extent_x / cell));
  const int height = static_cast<int>(std::lround(scene.extent_y / cell));

  // Structural cloud: a column of points per occupied cell, enough to pass
  // the occupancy threshold.
  PointCloud cloud;
  auto fill_rect = [&](const MetricRect& rect, double z) {
    const int x0 = std::max(0, static_cast<int>(std::floor(rect.x / cell)));
    const int y0 = std::max(0, static_cast<int>(std::floor(rect.y / cell)));
    const int x1 = std::min(width, static_cast<int>(std::ceil((rect.x + rect.width) / cell)));
    const int y1 = std::min(height, static_cast<int>(std::ceil((rect.y + rect.height) / cell)));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const double px = (x + 0.5) * cell;
        const double py = (y + 0.5) * cell;
        for (int k = 0; k < 3; ++k) cloud.points.push_back({px, py, z * (1.0 + 0.05 * k)});
      }
    }
  };
  const double t = scene.wall_thickness;
  fill_rect({0.0, 0.0, scene.extent_x, t}, 1.0);
  fill_rect({0.0, scene.extent_y - t, scene.extent_x, t}, 1.0);
  fill_rect({0.0, 0.0, t, scene.extent_y}, 1.0);
  fill_rect({scene.extent_x - t, 0.0, t, scene.extent_y}, 1.0);
  for (const MetricRect& w : scene.walls) fill_rect(w, 1.0);
  for (const SceneRegion& r : scene.regions) {
    for (const MetricRect& s : r.surfaces) fill_rect(s, 0.8);
  }

  SemanticMap3D map;
  map.structural = cloud;
  CostmapOptions copts;
  copts.cell = cell;
  copts.inflation = scene.inflation;
  copts.origin_x = 0.0;
  copts.origin_y = 0.0;
  copts.width = width;
  copts.height = height;
  map.costmap = build_costmap(cloud, copts);

  map.regions.names = scene.region_names();
  map.regions.labels = BevGrid<std::uint16_t>(0.0, 0.0, cell, width, height, kUnknownRegion);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double px = (x + 0.5) * cell;
      const double py = (y + 0.5) * cell;
      for (std::size_t i = 0; i < scene.regions.size(); ++i) {
        if (point_in_polygon(scene.regions[i].polygon, px, py)) {
          map.regions.labels.at({x, y}) = static_cast<std::uint16_t>(i);
          break;
        }
      }
    }
  }

  for (const SceneRegion& r : scene.regions) {
    for (const MetricRect& s : r.surfaces) {
      const int x0 = std::max(0, static_cast<int>(std::floor(s.x / cell)));
      const int y0 = std::max(0, static_cast<int>(std::floor(s.y / cell)));
      const int x1 = std::min(width, static_cast<int>(std::ceil((s.x + s.width) / cell)));
      const int y1 = std::min(height, static_cast<int>(std::ceil((s.y + s.height) / cell)));
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) map.surface_cells.push_back({x, y});
      }
    }
  }

  for (const SceneObject& obj : scene.objects) {
    SemanticGeometricInstance q;
    q.label = obj.category;
    q.confidence = 1.0;
    q.center = {obj.position.x, obj.position.y, 0.85};
    // Small synthetic footprint; offsets sum to zero by construction.
    q.relative_geometry = {{0.02, 0.0, 0.0}, {-0.02, 0.0, 0.0}, {0.0, 0.02, 0.0},
                           {0.0, -0.02, 0.0}, {0.0, 0.0, 0.0}};
    register_instance(map, std::move(q));
  }
  return map;
}

// ---- Default experiment scene --------------------------------------------

// Five horizontal region bands with a long surface each; defaults sit near
// the left (start side) end of the tables, relocation drop points deeper in.
inline Scene default_scene() {
  Scene scene;
  scene.name = "five-region-lab";
  scene.cell = 0.1;
  scene.extent_x = 30.0;
  scene.extent_y = 14.0;
  scene.wall_thickness = 0.2;
  scene.inflation = 0.2;
  scene.start = {1.0, 7.0};

  const std::vector<std::string> band_names = {
      "office table", "bar", "washing area", "cooking area", "entertainment area"};
  const double band_height = (scene.extent_y - 2 * scene.wall_thickness) / 5.0;
  for (std::size_t i = 0; i < band_names.size(); ++i) {
    SceneRegion region;
    region.name = band_names[i];
    const double y0 = scene.wall_thickness + i * band_height;
    const double y1 = y0 + band_height;
    region.polygon = {{scene.wall_thickness, y0},
                      {scene.extent_x - scene.wall_thickness, y0},
                      {scene.extent_x - scene.wall_thickness, y1},
                      {scene.wall_thickness, y1}};
    const double mid = 0.5 * (y0 + y1);
    region.surfaces = {{4.0, mid - 0.2, 24.0, 0.4}};
    region.drop_point = {22.0, mid};
    scene.regions.push_back(std::move(region));
  }

  auto place = [&scene](const std::string& category, const std::string& region_name, double slot) {
    const SceneRegion& r = scene.region(region_name);
    const MetricRect& table = r.surfaces.front();
    scene.objects.push_back(
        {category, region_name, {table.x + 0.5 + 0.8 * slot, table.y + 0.5 * table.height}});
  };
  place("controller", "entertainment area", 0);
  place("toy", "entertainment area", 1);
  place("charger", "entertainment area", 2);
  place("snacks", "entertainment area", 3);
  place("sponge", "washing area", 0);
  place("cloth", "washing area", 1);
  place("cup", "washing area", 2);
  place("spray cleaner", "washing area", 3);
  place("ketchup", "cooking area", 0);
  place("milk powder", "cooking area", 1);
  place("bottled water", "bar", 0);
  place("cup", "bar", 1);
  place("milk", "bar", 2);
  place("soda", "bar", 3);
  place("marker", "office table", 0);
  place("stapler", "office table", 1);
  place("pen", "office table", 2);
  place("tape", "office table", 3);
  place("mouse", "office table", 4);
  place("bottle glue", "office table", 5);

  // Mock-backend semantics: each category scores its default region highest;
  // remaining scene regions graded by rough commonsense. Extra rows cover the
  // region-candidate vocabularies exercised by the protocol tests.
  auto aff = [&scene](const std::string& object, std::initializer_list<std::pair<const char*, double>> rows) {
    for (const auto& [region, score] : rows) scene.affinity.set(object, region, score);
  };
  aff("controller", {{"entertainment area", 0.9}, {"bar", 0.5}, {"office table", 0.4},
                     {"cooking area", 0.3}, {"kitchen", 0.3}, {"washing area", 0.1}});
  aff("toy", {{"entertainment area", 0.9}, {"office table", 0.4}, {"bar", 0.3},
              {"washing area", 0.2}, {"cooking area", 0.1}});
  aff("charger", {{"entertainment area", 0.9}, {"office table", 0.6}, {"bar", 0.3},
                  {"washing area", 0.2}, {"cooking area", 0.1}});
  aff("snacks", {{"entertainment area", 0.9}, {"bar", 0.6}, {"cooking area", 0.5},
                 {"office table", 0.3}, {"washing area", 0.1}});
  aff("sponge", {{"washing area", 0.9}, {"cooking area", 0.5}, {"bar", 0.3},
                 {"office table", 0.2}, {"entertainment area", 0.1}});
  aff("cloth", {{"washing area", 0.9}, {"cooking area", 0.4}, {"bar", 0.3},
                {"office table", 0.2}, {"entertainment area", 0.1}});
  aff("cup", {{"washing area", 0.9}, {"bar", 0.8}, {"cooking area", 0.5},
              {"office table", 0.3}, {"entertainment area", 0.2}});
  aff("spray cleaner", {{"washing area", 0.9}, {"cooking area", 0.5}, {"bar", 0.2},
                        {"office table", 0.2}, {"entertainment area", 0.1}});
  aff("ketchup", {{"cooking area", 0.9}, {"kitchen", 0.9}, {"bar", 0.5}, {"washing area", 0.2},
                  {"office table", 0.1}, {"entertainment area", 0.1}});
  aff("milk powder", {{"cooking area", 0.9}, {"bar", 0.5}, {"washing area", 0.2},
                      {"office table", 0.1}, {"entertainment area", 0.1}});
  aff("bottled water", {{"bar", 0.9}, {"cooking area", 0.5}, {"entertainment area", 0.4},
                        {"office table", 0.3}, {"washing area", 0.2}});
  aff("milk", {{"bar", 0.9}, {"cooking area", 0.6}, {"washing area", 0.2},
               {"office table", 0.1}, {"entertainment area", 0.1}});
  aff("soda", {{"bar", 0.9}, {"kitchen", 0.9}, {"coffee shop", 0.7}, {"living room", 0.5},
               {"classroom", 0.3}, {"hallway", 0.1}, {"entertainment area", 0.6},
               {"cooking area", 0.4}, {"office table", 0.2}, {"washing area", 0.1}});
  aff("marker", {{"office table", 0.9}, {"entertainment area", 0.3}, {"bar", 0.2},
                 {"cooking area", 0.1}, {"washing area", 0.1}});
  aff("stapler", {{"office table", 0.9}, {"entertainment area", 0.2}, {"bar", 0.2},
                  {"cooking area", 0.1}, {"washing area", 0.1}});
  aff("pen", {{"office table", 0.9}, {"entertainment area", 0.3}, {"bar", 0.2},
              {"cooking area", 0.1}, {"washing area", 0.1}});
  aff("tape", {{"office table", 0.9}, {"entertainment area", 0.3}, {"bar", 0.1},
               {"cooking area", 0.1}, {"washing area", 0.1}});
  aff("mouse", {{"office table", 0.9}, {"entertainment area", 0.5}, {"bar", 0.1},
                {"cooking area", 0.1}, {"washing area", 0.1}});
  aff("bottle glue", {{"office table", 0.9}, {"entertainment area", 0.2}, {"bar", 0.1},
                      {"cooking area", 0.1}, {"washing area", 0.1}});

  // Region-abstraction vocabulary from the detached candidate set.
  for (const char* object : {"beverage", "bottle", "can", "juice", "mustard", "table"}) {
    aff(object, {{"kitchen", 0.9}, {"coffee shop", 0.7}, {"living room", 0.5},
                 {"classroom", 0.3}, {"hallway", 0.1}});
  }
  aff("ketchup", {{"coffee shop", 0.7}, {"living room", 0.5}, {"classroom", 0.3}, {"hallway", 0.1}});

  scene.validate();
  return scene;
}

}  // namespace ovmm
