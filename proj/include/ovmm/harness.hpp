#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ovmm/backend.hpp"
#include "ovmm/errors.hpp"
#include "ovmm/mission.hpp"
#include "ovmm/nav.hpp"
#include "ovmm/rng.hpp"
#include "ovmm/scene.hpp"

namespace ovmm {

enum class ExperimentGroup { NoHint, Random, Hinting, ErrantSemantics, Misleading };

inline const std::vector<ExperimentGroup> kAllGroups = {
    ExperimentGroup::NoHint, ExperimentGroup::Random, ExperimentGroup::Hinting,
    ExperimentGroup::ErrantSemantics, ExperimentGroup::Misleading};

inline std::string group_name(ExperimentGroup g) {
  switch (g) {
    case ExperimentGroup::NoHint: return "NoHint";
    case ExperimentGroup::Random: return "Random";
    case ExperimentGroup::Hinting: return "Hinting";
    case ExperimentGroup::ErrantSemantics: return "ErrantSemantics";
    case ExperimentGroup::Misleading: return "Misleading";
  }
  return "?";
}

inline std::optional<ExperimentGroup> group_from_name(const std::string& name) {
  for (ExperimentGroup g : kAllGroups) {
    if (group_name(g) == name) return g;
  }
  return std::nullopt;
}

// Default episode counts per group.
inline std::map<ExperimentGroup, int> default_group_counts() {
  return {{ExperimentGroup::NoHint, 45},
          {ExperimentGroup::Random, 30},
          {ExperimentGroup::Hinting, 30},
          {ExperimentGroup::ErrantSemantics, 15},
          {ExperimentGroup::Misleading, 15}};
}

struct EpisodeSpec {
  ExperimentGroup group = ExperimentGroup::NoHint;
  int index = 0;  // within group
  std::string category;
  std::string instruction;
  std::string true_region;  // ground-truth region of the target this episode
  Point2 position;          // ground-truth target position
  std::uint64_t seed = 0;
};

namespace detail_harness {

inline std::uint64_t group_salt(ExperimentGroup g) {
  return 0x5eedULL + static_cast<std::uint64_t>(g) * 0x10001ULL;
}

}  // namespace detail_harness

// Builds the episode list for one experiment group. Targets cycle through the
// scene's placement entries; relocation and hint draws come from the episode
// seed stream.
inline std::vector<EpisodeSpec> generate_group(const Scene& scene, ExperimentGroup group,
                                               int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw InputError("generate_group: need at least one episode");
  if ((group == ExperimentGroup::ErrantSemantics || group == ExperimentGroup::Misleading) &&
      scene.regions.size() < 2) {
    throw InputError("generate_group: " + group_name(group) + " needs at least two regions");
  }
  const std::vector<std::string> names = scene.region_names();

  std::vector<EpisodeSpec> episodes;
  episodes.reserve(static_cast<std::size_t>(n_episodes));
  for (int i = 0; i < n_episodes; ++i) {
    const SceneObject& entry = scene.objects[static_cast<std::size_t>(i) % scene.objects.size()];
    EpisodeSpec ep;
    ep.group = group;
    ep.index = i;
    ep.category = entry.category;
    ep.true_region = entry.region;
    ep.position = entry.position;
    ep.seed = Rng::derive(seed, detail_harness::group_salt(group) + static_cast<std::uint64_t>(i));
    Rng rng(ep.seed);

    switch (group) {
      case ExperimentGroup::NoHint:
      case ExperimentGroup::Random:
        ep.instruction = "fetch the " + entry.category + ".";
        break;
      case ExperimentGroup::Hinting:
        ep.instruction = "fetch the " + entry.category + " from the " + entry.region + ".";
        break;
      case ExperimentGroup::ErrantSemantics: {
        // Relocate to a region that holds no default instance of the
        // category; it lands on that region's drop point.
        const std::vector<std::string> defaults = scene.default_regions_of(entry.category);
        std::vector<std::string> choices;
        for (const std::string& name : names) {
          if (std::find(defaults.begin(), defaults.end(), name) == defaults.end()) {
            choices.push_back(name);
          }
        }
        if (choices.empty()) throw InputError("generate_group: no relocation region available");
        const std::string& target = choices[rng.below(choices.size())];
        ep.true_region = target;
        ep.position = scene.region(target).drop_point;
        ep.instruction = "fetch the " + entry.category + ".";
        break;
      }
      case ExperimentGroup::Misleading: {
        std::vector<std::string> choices;
        for (const std::string& name : names) {
          if (name != entry.region) choices.push_back(name);
        }
        const std::string& hint = choices[rng.below(choices.size())];
        ep.instruction = "fetch the " + entry.category + " from the " + hint + ".";
        break;
      }
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

// Seeded uniform region permutation; the Random control group swaps this in
// for the semantic prioritizer.
class RandomPrioritizer : public RegionPrioritizer {
public:
  explicit RandomPrioritizer(std::uint64_t seed) : rng_(seed) {}

  std::vector<std::string> prioritize_regions(const std::vector<std::string>& regions,
                                              const std::string&) override {
    std::vector<std::string> out = regions;
    rng_.shuffle(out);
    return out;
  }

private:
  Rng rng_;
};

struct EpisodeResult {
  EpisodeSpec spec;
  bool infeasible = false;
  bool backend_error = false;
  bool sft = false;
  bool sn = false;
  bool sp = false;
  bool success = false;
  double shortest = 0.0;  // l_i
  double traveled = 0.0;  // p_i
  double spl_term = 0.0;
  std::vector<std::string> visited_regions;
};

// Oracle l_i: twice the optimal path to the best searchable location of the
// true region within reach of the object (any region as fallback).
inline std::optional<double> shortest_mission_length(const MissionContext& ctx,
                                                     PathPlanner& planner,
                                                     const std::string& true_region,
                                                     const Point2& object_position,
                                                     double reach_radius) {
  auto best_over = [&](const std::vector<SearchPose>& poses) -> std::optional<double> {
    std::optional<double> best;
    for (const SearchPose& pose : poses) {
      if (std::hypot(pose.x - object_position.x, pose.y - object_position.y) > reach_radius) {
        continue;
      }
      const auto length = planner.plan_length(ctx.start_cell, pose.cell);
      if (length && (!best || *length < *best)) best = *length;
    }
    return best;
  };
  auto it = ctx.searchable.find(true_region);
  if (it != ctx.searchable.end()) {
    if (auto best = best_over(it->second)) return 2.0 * *best;
  }
  std::optional<double> best;
  for (const auto& [region, poses] : ctx.searchable) {
    if (auto b = best_over(poses)) {
      if (!best || *b < *best) best = *b;
    }
  }
  if (best) return 2.0 * *best;
  return std::nullopt;
}

// World model for one episode: the target sits at its episode position and
// every other category keeps its default placement. Other default instances
// of the target category are suppressed so the episode has a unique target
// ground truth.
inline WorldModel episode_world(const Scene& scene, const EpisodeSpec& ep) {
  WorldModel world;
  for (const SceneObject& obj : scene.objects) {
    if (obj.category == ep.category) continue;
    world.objects.push_back({obj.category, obj.position.x, obj.position.y});
  }
  world.objects.push_back({ep.category, ep.position.x, ep.position.y});
  return world;
}

inline EpisodeResult run_episode(const Scene& scene, const MissionContext& ctx,
                                 PathPlanner& planner, MockBackend& mock,
                                 const EpisodeSpec& ep, const DetectionSimConfig& cfg) {
  EpisodeResult result;
  result.spec = ep;

  const auto shortest =
      shortest_mission_length(ctx, planner, ep.true_region, ep.position, cfg.reach_radius);
  if (!shortest) {
    result.infeasible = true;
    return result;
  }
  result.shortest = *shortest;

  const WorldModel world = episode_world(scene, ep);
  MissionBackends backends{&mock, &mock};
  RandomPrioritizer random_prioritizer(Rng::derive(ep.seed, 0xa11ce));
  if (ep.group == ExperimentGroup::Random) backends.prioritizer = &random_prioritizer;

  const Mission mission = run_mission(ctx, planner, ep.instruction, world, backends, cfg,
                                      Rng::derive(ep.seed, 0xbee));
  result.backend_error = mission.backend_error;
  result.traveled = mission.traveled;
  result.visited_regions = mission.visited_regions;
  if (!mission.prioritized_regions.empty()) {
    result.sft = mission.prioritized_regions.front() == ep.true_region;
  }
  result.sn = mission.reached_object;
  result.sp = mission.picked;
  result.success = mission.success;
  if (result.success) {
    result.spl_term = result.shortest / std::max(result.traveled, result.shortest);
  }
  return result;
}

struct EpisodeOutcome {
  bool success = false;
  double shortest = 0.0;
  double traveled = 0.0;
};

// SPL = (1/N) sum S_i * l_i / max(p_i, l_i).
inline double compute_spl(const std::vector<EpisodeOutcome>& episodes) {
  if (episodes.empty()) throw InputError("compute_spl: empty episode list");
  double total = 0.0;
  for (const EpisodeOutcome& ep : episodes) {
    if (ep.shortest <= 0.0) throw InputError("compute_spl: l_i must be positive");
    if (ep.traveled < 0.0) throw InputError("compute_spl: p_i must be nonnegative");
    if (ep.success) total += ep.shortest / std::max(ep.traveled, ep.shortest);
  }
  return total / static_cast<double>(episodes.size());
}

struct GroupMetrics {
  std::string group;
  int episodes = 0;
  int infeasible = 0;
  int backend_errors = 0;
  int sft = 0;
  int sn = 0;
  int sp = 0;
  int succ = 0;
  double spl = 0.0;

  double rate(int count) const {
    return episodes > 0 ? static_cast<double>(count) / episodes : 0.0;
  }
};

struct MetricsReport {
  std::vector<GroupMetrics> groups;
  GroupMetrics total_without_random;
  std::optional<double> random_sft_rate;
  std::optional<double> random_spl;

  const GroupMetrics* find(const std::string& name) const {
    for (const GroupMetrics& g : groups) {
      if (g.group == name) return &g;
    }
    return nullptr;
  }
};

inline GroupMetrics summarize(const std::string& name, const std::vector<EpisodeResult>& results) {
  GroupMetrics m;
  m.group = name;
  std::vector<EpisodeOutcome> outcomes;
  for (const EpisodeResult& r : results) {
    if (r.infeasible) {
      m.infeasible++;
      continue;  // infeasible episodes are excluded from every rate
    }
    m.episodes++;
    if (r.backend_error) m.backend_errors++;
    if (r.sft) m.sft++;
    if (r.sn) m.sn++;
    if (r.sp) m.sp++;
    if (r.success) m.succ++;
    outcomes.push_back({r.success, r.shortest, r.traveled});
  }
  m.spl = outcomes.empty() ? 0.0 : compute_spl(outcomes);
  return m;
}

struct ExperimentConfig {
  std::map<ExperimentGroup, int> counts = default_group_counts();
  DetectionSimConfig detection;
  SearchableOptions searchable;
  int jobs = 1;
};

inline MetricsReport run_experiment(const Scene& scene, const SemanticMap3D& map,
                                    const ExperimentConfig& config, std::uint64_t seed) {
  const GridIndex start = map.costmap.cell_of(scene.start.x, scene.start.y);
  const MissionContext ctx = MissionContext::prepare(map, start, config.searchable);

  std::vector<EpisodeSpec> episodes;
  std::vector<std::pair<std::string, std::size_t>> group_ranges;  // name, first index
  for (ExperimentGroup g : kAllGroups) {
    auto it = config.counts.find(g);
    if (it == config.counts.end() || it->second <= 0) continue;
    group_ranges.emplace_back(group_name(g), episodes.size());
    std::vector<EpisodeSpec> batch = generate_group(scene, g, it->second, seed);
    episodes.insert(episodes.end(), batch.begin(), batch.end());
  }

  std::vector<EpisodeResult> results(episodes.size());
  const int jobs = std::max(1, config.jobs);
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    // Per-thread planner: the path cache is hot after a few episodes.
    PathPlanner planner(map.costmap);
    MockBackend mock = make_mock_backend(scene);
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= episodes.size()) break;
      results[i] = run_episode(scene, ctx, planner, mock, episodes[i], config.detection);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  MetricsReport report;
  std::vector<EpisodeResult> non_random;
  for (std::size_t gi = 0; gi < group_ranges.size(); ++gi) {
    const auto& [name, first] = group_ranges[gi];
    const std::size_t last =
        (gi + 1 < group_ranges.size()) ? group_ranges[gi + 1].second : episodes.size();
    std::vector<EpisodeResult> slice(results.begin() + static_cast<std::ptrdiff_t>(first),
                                     results.begin() + static_cast<std::ptrdiff_t>(last));
    report.groups.push_back(summarize(name, slice));
    if (name == "Random") {
      report.random_sft_rate = report.groups.back().rate(report.groups.back().sft);
      report.random_spl = report.groups.back().spl;
    } else {
      non_random.insert(non_random.end(), slice.begin(), slice.end());
    }
  }
  report.total_without_random = summarize("Total without R.", non_random);
  return report;
}

// ---- Report rendering ----------------------------------------------------

namespace detail_harness {

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string percent(double v) { return fixed(100.0 * v, 2) + "%"; }

inline std::string incr(double value, std::optional<double> baseline) {
  if (!baseline || *baseline == 0.0) return "-";
  return fixed(100.0 * (value - *baseline) / *baseline, 2) + "%";
}

}  // namespace detail_harness

inline json report_to_json(const MetricsReport& report) {
  json j;
  j["groups"] = json::array();
  auto emit = [&report](const GroupMetrics& g) {
    json row;
    row["group"] = g.group;
    row["episodes"] = g.episodes;
    row["infeasible"] = g.infeasible;
    row["backend_errors"] = g.backend_errors;
    row["SFT"] = g.sft;
    row["SN"] = g.sn;
    row["SP"] = g.sp;
    row["Succ"] = g.succ;
    row["SFT_rate"] = detail_harness::fixed(g.rate(g.sft));
    row["SN_rate"] = detail_harness::fixed(g.rate(g.sn));
    row["SP_rate"] = detail_harness::fixed(g.rate(g.sp));
    row["Succ_rate"] = detail_harness::fixed(g.rate(g.succ));
    row["SPL"] = detail_harness::fixed(g.spl);
    if (g.group != "Random") {
      row["SFT_incr"] = detail_harness::incr(g.rate(g.sft), report.random_sft_rate);
      row["SPL_incr"] = detail_harness::incr(g.spl, report.random_spl);
    }
    return row;
  };
  for (const GroupMetrics& g : report.groups) j["groups"].push_back(emit(g));
  j["total_without_random"] = emit(report.total_without_random);
  return j;
}

inline std::string report_to_text(const MetricsReport& report) {
  using detail_harness::fixed;
  using detail_harness::incr;
  std::ostringstream out;
  auto line = [&out](const std::string& group, const std::string& sn, const std::string& sp,
                     const std::string& succ, const std::string& sft, const std::string& spl,
                     const std::string& sft_incr, const std::string& spl_incr) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-18s %10s %10s %10s %10s %8s %10s %10s\n", group.c_str(),
                  sn.c_str(), sp.c_str(), succ.c_str(), sft.c_str(), spl.c_str(), sft_incr.c_str(),
                  spl_incr.c_str());
    out << buf;
  };
  line("Group", "SN", "SP", "Succ.", "SFT", "SPL", "SFT Incr.", "SPL Incr.");
  auto row = [&](const GroupMetrics& g) {
    auto count = [&g](int c) { return std::to_string(c) + "/" + std::to_string(g.episodes); };
    line(g.group, count(g.sn), count(g.sp), count(g.succ), count(g.sft), fixed(g.spl),
         g.group == "Random" ? "-" : incr(g.rate(g.sft), report.random_sft_rate),
         g.group == "Random" ? "-" : incr(g.spl, report.random_spl));
  };
  for (const GroupMetrics& g : report.groups) row(g);
  row(report.total_without_random);
  return out.str();
}

}  // namespace ovmm
