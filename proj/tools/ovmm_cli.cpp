// Command-line front end: map building, scene synthesis, single missions,
// experiment batches and BEV rendering.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ovmm/backend.hpp"
#include "ovmm/dataset.hpp"
#include "ovmm/errors.hpp"
#include "ovmm/harness.hpp"
#include "ovmm/mission.hpp"
#include "ovmm/nav.hpp"
#include "ovmm/remote_backend.hpp"
#include "ovmm/render.hpp"
#include "ovmm/scene.hpp"
#include "ovmm/semantic_map.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitBackend = 3;

struct BackendChoice {
  std::string kind = "mock";
  std::string endpoint;
  std::string model = "gpt-4o";
};

std::unique_ptr<ovmm::RemoteBackend> make_remote(const BackendChoice& choice) {
  ovmm::RemoteBackendConfig config;
  if (!choice.endpoint.empty()) config.base_url = choice.endpoint;
  config.model = choice.model;
  return std::make_unique<ovmm::RemoteBackend>(config);
}

ovmm::SemanticMap3D load_or_synthesize(const std::string& map_dir, const ovmm::Scene& scene) {
  if (!map_dir.empty()) return ovmm::load_map(map_dir);
  return ovmm::synthesize_map(scene);
}

std::map<ovmm::ExperimentGroup, int> parse_groups(const std::string& text) {
  if (text.empty()) return ovmm::default_group_counts();
  std::map<ovmm::ExperimentGroup, int> counts;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) throw ovmm::InputError("--groups: expected Name=Count entries");
    const auto group = ovmm::group_from_name(item.substr(0, eq));
    if (!group) throw ovmm::InputError("--groups: unknown group '" + item.substr(0, eq) + "'");
    counts[*group] = std::stoi(item.substr(eq + 1));
  }
  return counts;
}

int cmd_scene_init(const std::string& out) {
  const ovmm::Scene scene = ovmm::default_scene();
  ovmm::write_file(out, ovmm::scene_to_json(scene).dump(2) + "\n");
  std::cout << "wrote scene '" << scene.name << "' with " << scene.regions.size()
            << " regions and " << scene.objects.size() << " objects to " << out << "\n";
  return kExitOk;
}

int cmd_scene_map(const std::string& scene_path, const std::string& out) {
  const ovmm::Scene scene = ovmm::load_scene(scene_path);
  const ovmm::SemanticMap3D map = ovmm::synthesize_map(scene);
  ovmm::save_map(map, out);
  std::cout << "map: " << map.costmap.width() << "x" << map.costmap.height() << " cells, "
            << map.instances.size() << " instances, " << map.regions.names.size() << " regions\n";
  return kExitOk;
}

int cmd_map_build(const std::string& manifest_path, const std::string& out,
                  const std::string& scene_path, const BackendChoice& backend, double voxel) {
  const ovmm::DatasetManifest manifest = ovmm::load_manifest(manifest_path);
  ovmm::MapBuildOptions opts;
  opts.voxel = voxel;

  std::optional<ovmm::MockBackend> mock;
  std::unique_ptr<ovmm::RemoteBackend> remote;
  ovmm::RegionProposer* proposer = nullptr;
  if (!manifest.region_candidates.empty()) {
    if (backend.kind == "remote") {
      remote = make_remote(backend);
      proposer = remote.get();
    } else {
      if (scene_path.empty()) {
        throw ovmm::InputError("map-build with region candidates and the mock backend needs "
                               "--scene for the affinity table");
      }
      mock.emplace(ovmm::make_mock_backend(ovmm::load_scene(scene_path)));
      proposer = &*mock;
    }
  }

  const ovmm::SemanticMap3D map = ovmm::build_map_from_manifest(manifest, opts, proposer);
  ovmm::save_map(map, out);
  std::cout << "map: " << map.structural.size() << " structural points, " << map.instances.size()
            << " instances, " << map.regions.names.size() << " regions\n";
  return kExitOk;
}

int cmd_run(const std::string& scene_path, const std::string& map_dir,
            const std::string& instruction, const BackendChoice& backend, std::uint64_t seed,
            const ovmm::DetectionSimConfig& detection, const std::string& out) {
  const ovmm::Scene scene = ovmm::load_scene(scene_path);
  const ovmm::SemanticMap3D map = load_or_synthesize(map_dir, scene);
  ovmm::PathPlanner planner(map.costmap);
  const ovmm::MissionContext ctx =
      ovmm::MissionContext::prepare(map, map.costmap.cell_of(scene.start.x, scene.start.y));

  ovmm::MockBackend mock = ovmm::make_mock_backend(scene);
  std::unique_ptr<ovmm::RemoteBackend> remote;
  ovmm::MissionBackends backends{&mock, &mock};
  if (backend.kind == "remote") {
    remote = make_remote(backend);
    backends = {remote.get(), remote.get()};
  }

  ovmm::WorldModel world;
  for (const ovmm::SceneObject& obj : scene.objects) {
    world.objects.push_back({obj.category, obj.position.x, obj.position.y});
  }

  const ovmm::Mission mission =
      ovmm::run_mission(ctx, planner, instruction, world, backends, detection, seed);
  if (mission.backend_error) {
    std::cerr << "backend error; trace:\n" << mission.trace_jsonl();
    return kExitBackend;
  }

  std::cout << "target: " << mission.parsed.target_object << "\n";
  std::cout << "visit order:";
  for (const std::string& region : mission.visited_regions) std::cout << " [" << region << "]";
  std::cout << "\ntraveled: " << mission.traveled << " m\n";
  std::cout << "outcome: " << (mission.success ? "success" : "failure") << "\n";
  if (!out.empty()) {
    const std::filesystem::path dir(out);
    ovmm::write_file(dir / "trace.jsonl", mission.trace_jsonl());
    ovmm::write_file(dir / "path.json", ovmm::path_to_json(mission.driven_path).dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_experiment(const std::string& scene_path, const std::string& map_dir,
                   const std::string& groups, std::uint64_t seed, int jobs,
                   const ovmm::DetectionSimConfig& detection, const std::string& out) {
  const ovmm::Scene scene = ovmm::load_scene(scene_path);
  const ovmm::SemanticMap3D map = load_or_synthesize(map_dir, scene);

  ovmm::ExperimentConfig config;
  config.counts = parse_groups(groups);
  config.detection = detection;
  config.jobs = jobs;
  const ovmm::MetricsReport report = ovmm::run_experiment(scene, map, config, seed);

  const std::string table = ovmm::report_to_text(report);
  std::cout << table;
  if (!out.empty()) {
    const std::filesystem::path dir(out);
    ovmm::write_file(dir / "report.json", ovmm::report_to_json(report).dump(2) + "\n");
    ovmm::write_file(dir / "report.txt", table);
  }
  return kExitOk;
}

int cmd_render(const std::string& map_dir, const std::string& trace, int scale,
               const std::string& out) {
  const ovmm::SemanticMap3D map = ovmm::load_map(map_dir);
  std::vector<ovmm::GridIndex> path;
  if (!trace.empty()) {
    const ovmm::json j = ovmm::json::parse(ovmm::read_file(trace), nullptr, false);
    if (j.is_discarded()) throw ovmm::DataError(trace + ": invalid path JSON");
    path = ovmm::path_from_json(j);
  }
  ovmm::RenderOptions opts;
  opts.pixel_scale = scale;
  const ovmm::PpmImage img = ovmm::render_map(map, path, opts);
  ovmm::write_ppm(out, img);
  std::cout << "wrote " << img.width << "x" << img.height << " image to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-free open-vocabulary fetch simulator"};
  app.require_subcommand(1);

  std::string manifest_path, scene_path, map_dir, instruction, groups, trace_path, out;
  BackendChoice backend;
  std::uint64_t seed = 0;
  int jobs = 1;
  int scale = 4;
  double voxel = 0.0;
  ovmm::DetectionSimConfig detection;

  auto add_backend_flags = [&backend](CLI::App* cmd) {
    cmd->add_option("--backend", backend.kind, "Semantic backend")
        ->check(CLI::IsMember({"mock", "remote"}));
    cmd->add_option("--endpoint", backend.endpoint, "Remote backend base URL");
    cmd->add_option("--model", backend.model, "Remote model name");
  };
  auto add_detection_flags = [&detection](CLI::App* cmd) {
    cmd->add_option("--ovd-tp", detection.ovd_true_positive_rate, "OVD true-positive rate");
    cmd->add_option("--ovd-fp", detection.ovd_false_positive_rate, "OVD false-positive rate");
    cmd->add_option("--approve-true", detection.approver_true_accept_rate,
                    "Approver genuine-accept rate");
    cmd->add_option("--approve-false", detection.approver_false_accept_rate,
                    "Approver spurious-accept rate");
    cmd->add_option("--pick-rate", detection.pick_success_rate, "Per-trial grasp success rate");
  };

  CLI::App* scene_init = app.add_subcommand("scene-init", "Write the default experiment scene");
  scene_init->add_option("--out", out, "Scene JSON output path")->required();

  CLI::App* scene_map = app.add_subcommand("scene-map", "Synthesize a map from a scene");
  scene_map->add_option("--scene", scene_path, "Scene JSON")->required();
  scene_map->add_option("--out", out, "Map output directory")->required();

  CLI::App* map_build = app.add_subcommand("map-build", "Build a map from a recorded dataset");
  map_build->add_option("--manifest", manifest_path, "Dataset manifest JSON")->required();
  map_build->add_option("--out", out, "Map output directory")->required();
  map_build->add_option("--scene", scene_path, "Scene JSON supplying the mock affinity table");
  map_build->add_option("--voxel", voxel, "Structural voxel size (0 = keep all points)");
  add_backend_flags(map_build);

  CLI::App* run = app.add_subcommand("run", "Run a single fetch mission");
  run->add_option("--scene", scene_path, "Scene JSON")->required();
  run->add_option("--map", map_dir, "Map directory (default: synthesized from the scene)");
  run->add_option("--instruction", instruction, "Natural-language instruction")->required();
  run->add_option("--seed", seed, "Random seed");
  run->add_option("--out", out, "Directory for trace.jsonl and path.json");
  add_backend_flags(run);
  add_detection_flags(run);

  CLI::App* experiment = app.add_subcommand("experiment", "Run the five-group experiment");
  experiment->add_option("--scene", scene_path, "Scene JSON")->required();
  experiment->add_option("--map", map_dir, "Map directory (default: synthesized)");
  experiment->add_option("--groups", groups, "Comma list Name=Count (default: 45/30/30/15/15)");
  experiment->add_option("--seed", seed, "Random seed");
  experiment->add_option("--jobs", jobs, "Worker threads");
  experiment->add_option("--out", out, "Directory for report.json and report.txt");
  add_detection_flags(experiment);

  CLI::App* render = app.add_subcommand("render", "Render a map (and optional path) to PPM");
  render->add_option("--map", map_dir, "Map directory")->required();
  render->add_option("--trace", trace_path, "path.json to overlay");
  render->add_option("--scale", scale, "Pixels per cell");
  render->add_option("--out", out, "Output PPM path")->required();

  try {
    app.parse(argc, argv);
    if (scene_init->parsed()) return cmd_scene_init(out);
    if (scene_map->parsed()) return cmd_scene_map(scene_path, out);
    if (map_build->parsed()) return cmd_map_build(manifest_path, out, scene_path, backend, voxel);
    if (run->parsed()) {
      return cmd_run(scene_path, map_dir, instruction, backend, seed, detection, out);
    }
    if (experiment->parsed()) {
      return cmd_experiment(scene_path, map_dir, groups, seed, jobs, detection, out);
    }
    if (render->parsed()) return cmd_render(map_dir, trace_path, scale, out);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const ovmm::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ovmm::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ovmm::BackendError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBackend;
  }
  return kExitUsage;
}
