#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ovmm/backend.hpp"
#include "ovmm/errors.hpp"
#include "ovmm/nav.hpp"
#include "ovmm/rng.hpp"
#include "ovmm/semantic_map.hpp"

namespace ovmm {

// Stochastic detection / approval / grasp model for simulated missions.
struct DetectionSimConfig {
  double ovd_true_positive_rate = 1.0;
  double ovd_false_positive_rate = 0.0;
  double approver_true_accept_rate = 1.0;
  double approver_false_accept_rate = 0.0;
  double pick_success_rate = 1.0;
  int max_grasp_trials = 3;  // n_e
  double reach_radius = 0.8;

  void validate() const {
    for (double p : {ovd_true_positive_rate, ovd_false_positive_rate, approver_true_accept_rate,
                     approver_false_accept_rate, pick_success_rate}) {
      if (p < 0.0 || p > 1.0) throw InputError("detection config: probability out of [0,1]");
    }
    if (max_grasp_trials < 1) throw InputError("detection config: n_e must be >= 1");
  }
};

// Ground-truth object placement for one episode.
struct WorldObject {
  std::string category;
  double x = 0.0;
  double y = 0.0;
};

struct WorldModel {
  std::vector<WorldObject> objects;

  std::vector<const WorldObject*> instances_of(const std::string& category) const {
    std::vector<const WorldObject*> out;
    for (const WorldObject& obj : objects) {
      if (obj.category == category) out.push_back(&obj);
    }
    return out;
  }
};

struct TraceEvent {
  std::string type;  // parse | prioritize | navigate | find | pick | return | warn | abort
  std::string detail;
  std::string region;
  GridIndex cell{-1, -1};
  double distance = 0.0;
  bool outcome = false;
  int attempts = 0;
};

inline json trace_event_to_json(const TraceEvent& e) {
  json j;
  j["type"] = e.type;
  if (!e.detail.empty()) j["detail"] = e.detail;
  if (!e.region.empty()) j["region"] = e.region;
  if (e.cell.x >= 0) j["cell"] = {e.cell.x, e.cell.y};
  j["distance"] = e.distance;
  j["outcome"] = e.outcome;
  if (e.attempts > 0) j["attempts"] = e.attempts;
  return j;
}

struct Mission {
  std::string instruction;
  ParsedInstruction parsed;
  std::vector<std::string> prioritized_regions;  // final S*_R
  std::vector<std::string> visited_regions;
  std::vector<TraceEvent> trace;

  std::vector<GridIndex> driven_path;  // concatenated cells of every leg

  bool reached_object = false;  // navigated within reach of a true instance
  bool picked = false;
  bool returned = false;
  bool success = false;
  bool backend_error = false;
  int navigation_failures = 0;
  double traveled = 0.0;  // p_i

  std::string trace_jsonl() const {
    std::ostringstream out;
    for (const TraceEvent& e : trace) out << trace_event_to_json(e).dump() << "\n";
    return out.str();
  }
};

struct DetectedInstance {
  std::string label;
  double confidence = 0.0;
  bool genuine = false;
  const WorldObject* object = nullptr;  // null for spurious proposals
};

// Proposal-approval simulation at one searchable location. True instances are
// proposed with the OVD true-positive rate and filtered by the approver; with
// no instance in reach a spurious proposal may still survive approval.
inline std::optional<DetectedInstance> find_object(const SearchPose& pose,
                                                   const std::string& target,
                                                   const WorldModel& world,
                                                   const DetectionSimConfig& cfg, Rng& rng) {
  std::vector<const WorldObject*> in_reach;
  for (const WorldObject* obj : world.instances_of(target)) {
    if (std::hypot(obj->x - pose.x, obj->y - pose.y) <= cfg.reach_radius) in_reach.push_back(obj);
  }
  if (!in_reach.empty()) {
    if (!rng.bernoulli(cfg.ovd_true_positive_rate)) return std::nullopt;
    DetectedInstance best;
    for (const WorldObject* obj : in_reach) {
      const double confidence = rng.uniform(0.5, 1.0);
      if (obj == in_reach.front() || confidence > best.confidence) {
        best = {target, confidence, true, obj};
      }
    }
    if (!rng.bernoulli(cfg.approver_true_accept_rate)) return std::nullopt;
    return best;
  }
  if (!rng.bernoulli(cfg.ovd_false_positive_rate)) return std::nullopt;
  DetectedInstance spurious{target, rng.uniform(0.3, 0.9), false, nullptr};
  if (!rng.bernoulli(cfg.approver_false_accept_rate)) return std::nullopt;
  return spurious;
}

struct PickResult {
  bool success = false;
  int attempts = 0;
};

// Bernoulli grasp trials, at most n_e; spurious targets can never be picked.
inline PickResult pick(const DetectedInstance& q, const DetectionSimConfig& cfg, Rng& rng) {
  PickResult result;
  for (int trial = 0; trial < cfg.max_grasp_trials; ++trial) {
    result.attempts++;
    if (q.genuine && rng.bernoulli(cfg.pick_success_rate)) {
      result.success = true;
      return result;
    }
  }
  return result;
}

// Everything a mission needs about the prepared environment; searchable
// locations are precomputed once per map.
struct MissionContext {
  const SemanticMap3D* map = nullptr;
  std::vector<std::string> region_order;  // S_R as handed to the prioritizer
  std::map<std::string, std::vector<SearchPose>> searchable;
  GridIndex start_cell;

  static MissionContext prepare(const SemanticMap3D& map, const GridIndex& start,
                                const SearchableOptions& opts = {}) {
    MissionContext ctx;
    ctx.map = &map;
    ctx.start_cell = start;
    ctx.region_order = map.regions.names;
    for (const std::string& region : map.regions.names) {
      ctx.searchable[region] = searchable_locations(map, region, opts);
    }
    return ctx;
  }
};

struct MissionBackends {
  InstructionParser* parser = nullptr;
  RegionPrioritizer* prioritizer = nullptr;
};

// One end-to-end fetch mission: parse, prioritize, optionally re-prioritize
// on the user hint, then region-by-region location search with the
// proposal-approval detector, at most n_e grasp trials per location, and a
// return leg to the start on success.
inline Mission run_mission(const MissionContext& ctx, PathPlanner& planner,
                           const std::string& instruction, const WorldModel& world,
                           MissionBackends backends, const DetectionSimConfig& cfg,
                           std::uint64_t seed) {
  cfg.validate();
  if (instruction.empty()) throw InputError("run_mission: empty instruction");

  Mission mission;
  mission.instruction = instruction;
  Rng rng(seed);

  auto join = [](const std::vector<std::string>& items) {
    std::string out;
    for (const std::string& item : items) {
      if (!out.empty()) out += ", ";
      out += item;
    }
    return out;
  };

  try {
    mission.parsed = backends.parser->parse_instruction(instruction);
    mission.trace.push_back({"parse", mission.parsed.target_object,
                             mission.parsed.region_hint.value_or("")});
    mission.prioritized_regions =
        backends.prioritizer->prioritize_regions(ctx.region_order, mission.parsed.target_object);
  } catch (const BackendError& e) {
    mission.backend_error = true;
    mission.trace.push_back({"abort", e.what()});
    return mission;
  }
  if (mission.parsed.region_hint) {
    std::string warning;
    mission.prioritized_regions =
        reprioritize(mission.prioritized_regions, *mission.parsed.region_hint, &warning);
    if (!warning.empty()) mission.trace.push_back({"warn", warning});
  }
  mission.trace.push_back({"prioritize", join(mission.prioritized_regions)});

  RobotState robot{ctx.start_cell};
  for (const std::string& region : mission.prioritized_regions) {
    mission.visited_regions.push_back(region);
    for (const SearchPose& pose : ctx.searchable.at(region)) {
      NavigationResult nav = navigate(robot, pose.cell, planner);
      TraceEvent nav_event{"navigate", "", region, pose.cell, nav.traveled, nav.reached};
      mission.trace.push_back(nav_event);
      if (!nav.reached) {
        mission.navigation_failures++;
        continue;
      }
      mission.traveled += nav.traveled;
      mission.driven_path.insert(mission.driven_path.end(), nav.path.begin(), nav.path.end());

      bool true_in_reach = false;
      for (const WorldObject* obj : world.instances_of(mission.parsed.target_object)) {
        if (std::hypot(obj->x - pose.x, obj->y - pose.y) <= cfg.reach_radius) true_in_reach = true;
      }
      if (true_in_reach) mission.reached_object = true;

      std::optional<DetectedInstance> detection =
          find_object(pose, mission.parsed.target_object, world, cfg, rng);
      TraceEvent find_event{"find", "", region, pose.cell, 0.0, detection.has_value()};
      mission.trace.push_back(find_event);
      if (!detection) continue;

      const PickResult grasp = pick(*detection, cfg, rng);
      TraceEvent pick_event{"pick", detection->genuine ? "genuine" : "spurious", region, pose.cell,
                            0.0, grasp.success, grasp.attempts};
      mission.trace.push_back(pick_event);
      if (!grasp.success) continue;

      mission.picked = true;
      NavigationResult home = navigate(robot, ctx.start_cell, planner);
      mission.driven_path.insert(mission.driven_path.end(), home.path.begin(), home.path.end());
      mission.traveled += home.traveled;
      mission.returned = home.reached;
      mission.success = home.reached;
      mission.trace.push_back({"return", "", "", ctx.start_cell, home.traveled, home.reached});
      return mission;
    }
  }
  return mission;
}

}  // namespace ovmm
