#pragma once

// Implementations of the twin-ident subcommands. Each command reads a JSON
// config, writes its outputs plus manifest.json into the output directory
// and returns a summary for programmatic use.

#include <algorithm>
#include <filesystem>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "twin_ident/dynamics.hpp"
#include "twin_ident/identify.hpp"
#include "twin_ident/io.hpp"
#include "twin_ident/metrics.hpp"
#include "twin_ident/random.hpp"
#include "twin_ident/viewpoint.hpp"

namespace twin_ident::cli {

namespace fs = std::filesystem;
using io::json;

/// Flags shared by every subcommand.
struct CommandOptions {
  fs::path config;
  std::optional<std::uint64_t> seed;
  fs::path out_dir = ".";
  std::optional<std::size_t> threads;
};

inline constexpr double kCentimetersPerMeter = 100.0;

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline std::string string_field(const json& j, const std::string& key, const std::string& path) {
  const auto& v = io::detail::field(j, key, path);
  if (!v.is_string()) throw io::ConfigError(path + key, "expected a string");
  return v.get<std::string>();
}

/// Episode list from "episodes": [paths] or "episodes_dir": dir (episode_*.json).
inline std::vector<fs::path> episode_paths(const json& cfg, const fs::path& base) {
  std::vector<fs::path> out;
  if (cfg.contains("episodes")) {
    const auto& list = cfg.at("episodes");
    if (!list.is_array()) throw io::ConfigError("episodes", "expected an array of episode file paths");
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!list[i].is_string()) throw io::ConfigError("episodes[" + std::to_string(i) + "]", "expected a path");
      out.push_back(resolve(base, list[i].get<std::string>()));
    }
  } else if (cfg.contains("episodes_dir")) {
    const auto dir = resolve(base, string_field(cfg, "episodes_dir", ""));
    if (!fs::is_directory(dir)) throw io::ConfigError("episodes_dir", "not a directory: " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.starts_with("episode_") && entry.path().extension() == ".json") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
  }
  if (out.empty()) throw io::ConfigError("episodes", "no episodes given");
  return out;
}

inline SwarmConfig swarm(const json& cfg, const CommandOptions& opts) {
  SwarmConfig s = io::swarm_from_json(cfg.value("swarm", json()));
  if (opts.seed) s.seed = *opts.seed;
  if (opts.threads) s.threads = std::max<std::size_t>(1, *opts.threads);
  return s;
}

inline json with_swarm(json cfg, const SwarmConfig& s) {
  cfg["swarm"] = io::to_json(s);
  cfg["swarm"].erase("threads");  // scheduling only; results do not depend on it
  return cfg;
}

/// Isotropic Gaussian 3-vector.
inline Vec3 gaussian3(Rng& rng, double per_axis_sigma) {
  return {per_axis_sigma * standard_normal(rng), per_axis_sigma * standard_normal(rng),
          per_axis_sigma * standard_normal(rng)};
}

/// Distance from the centroid to the planar bounding box boundary along `dir`.
inline double reach_to_box(const Vec2& from, const Vec2& dir, const Eigen::AlignedBox3d& box) {
  double t = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 2; ++k) {
    if (dir[k] > 0) t = std::min(t, (box.max()[k] - from[k]) / dir[k]);
    if (dir[k] < 0) t = std::min(t, (box.min()[k] - from[k]) / dir[k]);
  }
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synth

struct SynthResult {
  std::vector<fs::path> episode_files;
  ObjectPhysics physics;
  PDParams pd;
  double noise_floor_add = 0.0;  // mean ADD between noisy and clean object poses, m
};

/// Resolved synthetic-episode configuration with every default filled in.
inline json resolve_synth_config(const json& in, const CommandOptions& opts) {
  json c = in;
  c["kind"] = "episodes";
  if (opts.seed) c["seed"] = *opts.seed;
  if (!c.contains("seed")) c["seed"] = 0;
  if (!c.contains("episodes")) c["episodes"] = 20;
  if (!c.contains("box_size")) c["box_size"] = {0.12, 0.08, 0.05};
  if (!c.contains("physics_ranges")) {
    c["physics_ranges"] = {{"friction", {0.1, 0.5}}, {"mass", {0.2, 1.5}}, {"com_fraction", 0.3}};
  }
  if (!c.contains("pd")) c["pd"] = {{"kp", {80.0, 60.0}}, {"kd", {12.0, 9.0}}, {"inertia", {0.9, 0.6}}};
  if (!c.contains("dt")) c["dt"] = 1e-3;
  if (!c.contains("control_steps")) c["control_steps"] = 150;
  if (!c.contains("object_stride")) c["object_stride"] = 20;
  if (!c.contains("max_duration")) c["max_duration"] = 0.5;
  if (!c.contains("gravity")) c["gravity"] = kStandardGravity;
  json hit = c.value("hit", json::object());
  if (!hit.contains("speed")) hit["speed"] = {0.8, 2.0};
  if (!hit.contains("ee_effective_mass")) hit["ee_effective_mass"] = 2.0;
  if (!hit.contains("lateral_fraction")) hit["lateral_fraction"] = 0.5;
  c["hit"] = hit;
  json noise = c.value("noise", json::object());
  if (!noise.contains("translation_sigma")) noise["translation_sigma"] = 0.0;
  if (!noise.contains("rotation_sigma")) noise["rotation_sigma"] = 0.0;
  c["noise"] = noise;
  c["slide"] = io::to_json(io::slide_from_json(c.value("slide", json())));
  return c;
}

/// Adds pose-estimator noise. `translation_sigma` is the RMS length of the
/// 3-D translation error (per-axis sigma / sqrt(3)); likewise for rotation (rad).
inline PoseTrajectory add_pose_noise(const PoseTrajectory& clean, double translation_sigma, double rotation_sigma,
                                     Rng& rng) {
  std::vector<PoseSample> out;
  out.reserve(clean.size());
  const double st = translation_sigma / std::sqrt(3.0);
  const double sr = rotation_sigma / std::sqrt(3.0);
  for (const auto& s : clean) {
    const Vec3 dt = detail::gaussian3(rng, st);
    const Vec3 dr = detail::gaussian3(rng, sr);
    const Pose noisy = Pose::from_rotation_vector(dr) * Pose(s.pose.rotation(), Vec3::Zero());
    out.push_back({s.time, Pose(noisy.rotation(), s.pose.translation() + dt)});
  }
  return PoseTrajectory(std::move(out));
}

inline SynthResult synth_episodes(const json& raw, const fs::path& base, const CommandOptions& opts, std::ostream& log) {
  const json cfg = resolve_synth_config(raw, opts);
  const auto seed = io::detail::count_or(cfg, "seed", 0, "");
  const auto count = io::detail::count_or(cfg, "episodes", 20, "");
  if (count == 0) throw io::ConfigError("episodes", "must be >= 1");

  const TriMesh mesh = cfg.contains("mesh") && cfg["mesh"].is_string()
                           ? load_mesh(detail::resolve(base, cfg["mesh"].get<std::string>()))
                           : make_box([&] {
                               const auto b = io::detail::numbers(cfg["box_size"], "box_size", 3);
                               return Vec3(b[0], b[1], b[2]);
                             }());
  const ObjectModel model(mesh);
  Rng rng(seed);

  ObjectPhysics physics;
  if (cfg.contains("physics") && !cfg["physics"].is_null()) {
    physics = io::physics_from_json(cfg["physics"]);
  } else {
    const auto& r = cfg["physics_ranges"];
    const auto [f0, f1] = io::detail::range(io::detail::field(r, "friction", "physics_ranges."), "physics_ranges.friction");
    const auto [m0, m1] = io::detail::range(io::detail::field(r, "mass", "physics_ranges."), "physics_ranges.mass");
    const double frac = io::detail::number(r, "com_fraction", "physics_ranges.");
    const Vec3 half = 0.5 * model.bounds.sizes();
    physics.friction = uniform(rng, f0, f1);
    physics.mass = uniform(rng, m0, m1);
    physics.com_offset = {frac * half.x() * uniform(rng, -1, 1), frac * half.y() * uniform(rng, -1, 1)};
  }
  io::detail::validated("physics.", [&] { model.check(physics); return 0; });
  const PDParams pd = io::pd_from_json(cfg["pd"]);

  const double dt = io::detail::number(cfg, "dt", "");
  const auto steps = io::detail::count_or(cfg, "control_steps", 150, "");
  if (steps == 0) throw io::ConfigError("control_steps", "must be >= 1");
  const auto& hit_cfg = cfg["hit"];
  const auto [v0, v1] = io::detail::range(hit_cfg["speed"], "hit.speed");
  const double ee_mass = io::detail::number(hit_cfg, "ee_effective_mass", "hit.");
  const double lateral = io::detail::number(hit_cfg, "lateral_fraction", "hit.");
  const double sigma_t = io::detail::number(cfg["noise"], "translation_sigma", "noise.");
  const double sigma_r = io::detail::number(cfg["noise"], "rotation_sigma", "noise.");
  if (sigma_t < 0 || sigma_r < 0) throw io::ConfigError("noise", "sigmas must be >= 0");
  const bool noisy = sigma_t > 0 || sigma_r > 0;

  fs::create_directories(opts.out_dir);
  io::RunManifest manifest("synth", cfg);
  manifest.add_seed("seed", seed);
  if (cfg.contains("mesh") && cfg["mesh"].is_string()) manifest.add_input(detail::resolve(base, cfg["mesh"]));
  {
    auto out = io::open_out(opts.out_dir / "mesh.obj");
    write_obj(out, mesh);
  }
  manifest.add_output(opts.out_dir / "mesh.obj");

  const PointCloud points = sample_surface(mesh, kDefaultModelPoints, 0);
  SynthResult result{{}, physics, pd, 0.0};
  json truth{{"physics", io::to_json(physics)},
             {"pd", io::to_json(pd)},
             {"noise", cfg["noise"]},
             {"episodes", json::array()}};
  double noise_sum = 0.0;
  std::size_t noise_n = 0;
  const auto nj = static_cast<Eigen::Index>(pd.joints());
  for (std::uint64_t e = 0; e < count; ++e) {
    Rng erng(mix_seed(seed, e + 1));
    Scenario sc;
    sc.control.dt = dt;
    VecX q0(nj), q1(nj);
    for (Eigen::Index j = 0; j < nj; ++j) {
      q0[j] = uniform(erng, -1.0, 1.0);
      q1[j] = q0[j] + uniform(erng, -0.8, 0.8);
    }
    sc.control.initial_positions = q0;
    sc.control.initial_velocities = VecX::Zero(nj);
    const double ramp = 0.6 * static_cast<double>(steps);
    for (std::uint64_t i = 0; i < steps; ++i) {
      const double s = std::min(1.0, static_cast<double>(i + 1) / ramp);
      sc.control.targets.push_back(q0 + s * (q1 - q0));
    }
    sc.hit_step = steps;
    sc.object_initial = {uniform(erng, -0.1, 0.1), uniform(erng, -0.1, 0.1), uniform(erng, -3.0, 3.0)};
    const double angle = uniform(erng, -std::numbers::pi, std::numbers::pi);
    sc.hit.direction = Vec2(std::cos(angle), std::sin(angle));
    const Vec2 dir_body = rotate2(sc.hit.direction, -sc.object_initial.yaw);
    const Vec2 normal_body(-dir_body.y(), dir_body.x());
    const Vec2 c = model.centroid();
    const double half_min = 0.5 * std::min(model.bounds.sizes().x(), model.bounds.sizes().y());
    Vec2 contact = c + normal_body * (lateral * half_min * uniform(erng, -1.0, 1.0));
    contact -= dir_body * detail::reach_to_box(contact, -dir_body, model.bounds);
    sc.hit.contact_point = contact;
    sc.hit.ee_speed = uniform(erng, v0, v1);
    sc.hit.ee_effective_mass = ee_mass;
    sc.gravity = io::detail::number(cfg, "gravity", "");
    sc.max_duration = io::detail::number(cfg, "max_duration", "");
    sc.object_stride = io::detail::count_or(cfg, "object_stride", 10, "");
    sc.slide = io::slide_from_json(cfg["slide"]);
    io::detail::validated("scenario.", [&] { sc.validate(); return 0; });

    Episode ep = simulate_episode(sc, pd, physics, model);
    const std::string stem = fmt::format("episode_{:03d}", e);
    PoseTrajectory recorded = ep.object;
    json truth_ep{{"episode", stem + ".json"}};
    if (noisy) {
      recorded = add_pose_noise(ep.object, sigma_t, sigma_r, erng);
      io::save_pose_trajectory(opts.out_dir / (stem + ".object_clean.txt"), ep.object, "table");
      manifest.add_output(opts.out_dir / (stem + ".object_clean.txt"));
      truth_ep["clean_object_trajectory"] = stem + ".object_clean.txt";
      for (std::size_t i = 0; i < recorded.size(); ++i) {
        noise_sum += add_metric(recorded[i].pose, ep.object[i].pose, points);
        ++noise_n;
      }
    }
    io::EpisodeRecord rec{sc, recorded, ep.joints, physics, pd, "synthetic"};
    io::save_episode(opts.out_dir, stem, rec);
    for (const char* suffix : {".json", ".object.txt", ".joints.txt"}) manifest.add_output(opts.out_dir / (stem + suffix));
    result.episode_files.push_back(opts.out_dir / (stem + ".json"));
    truth["episodes"].push_back(truth_ep);
  }
  result.noise_floor_add = noise_n > 0 ? noise_sum / static_cast<double>(noise_n) : 0.0;
  truth["noise_floor_add_m"] = result.noise_floor_add;
  io::save_json(opts.out_dir / "ground_truth.json", truth);
  manifest.add_output(opts.out_dir / "ground_truth.json");
  io::save_json(opts.out_dir / "config.resolved.json", cfg);
  manifest.add_output(opts.out_dir / "config.resolved.json");
  manifest.write(opts.out_dir);
  fmt::print(log, "synth: wrote {} episodes to {} (friction {:.4f}, mass {:.4f} kg)\n", count, opts.out_dir.string(),
             physics.friction, physics.mass);
  if (noisy) fmt::print(log, "synth: noise floor mean ADD {:.3f} cm\n", result.noise_floor_add * kCentimetersPerMeter);
  return result;
}

/// Workspace table with an arm and a block on it; deliberately asymmetric.
inline TriMesh default_viewpoint_mesh() {
  const std::vector<TriMesh> parts = {
      make_box({0.60, 0.45, 0.03}, {0.0, 0.0, -0.015}),
      make_box({0.12, 0.12, 0.10}, {-0.22, 0.15, 0.05}),
      make_box({0.06, 0.06, 0.30}, {-0.22, 0.15, 0.25}),
      make_box({0.30, 0.05, 0.05}, {-0.09, 0.15, 0.40}),
      make_box({0.05, 0.05, 0.15}, {0.04, 0.15, 0.33}),
      make_box({0.08, 0.06, 0.05}, {0.12, -0.08, 0.025}),
  };
  return merge_meshes(parts);
}

struct ViewpointSynthResult {
  fs::path config;  // ready-to-run align-viewpoint config
  Pose truth;
  PoseDelta delta = PoseDelta::Zero();
};

inline ViewpointSynthResult synth_viewpoint(const json& raw, const fs::path& base, const CommandOptions& opts,
                                            std::ostream& log) {
  json cfg = raw;
  if (opts.seed) cfg["seed"] = *opts.seed;
  if (!cfg.contains("seed")) cfg["seed"] = 0;
  if (!cfg.contains("camera")) cfg["camera"] = io::to_json(CameraIntrinsics{});
  if (!cfg.contains("coarse")) {
    // base frame seen from ~0.9 m, looking down at the table at an angle
    const Pose coarse = Pose::from_translation({0.0, 0.05, 0.9}) *
                        Pose::from_rotation_vector({-2.0, 0.0, 0.0});
    cfg["coarse"] = io::to_json(coarse);
  }
  if (!cfg.contains("perturbation")) cfg["perturbation"] = {{"rotation_deg", 4.0}, {"translation_m", 0.02}};
  if (!cfg.contains("views")) cfg["views"] = 1;
  cfg["kind"] = "viewpoint";

  const auto seed = io::detail::count_or(cfg, "seed", 0, "");
  const TriMesh mesh = cfg.contains("mesh") && cfg["mesh"].is_string()
                           ? load_mesh(detail::resolve(base, cfg["mesh"].get<std::string>()))
                           : default_viewpoint_mesh();
  const CameraIntrinsics camera = io::camera_from_json(cfg["camera"]);
  const Pose coarse = io::pose_from_json(cfg["coarse"], "coarse.");
  Rng rng(seed);
  PoseDelta delta;
  if (cfg["perturbation"].contains("delta")) {
    const auto d = io::detail::numbers(cfg["perturbation"]["delta"], "perturbation.delta", 6);
    for (int k = 0; k < 6; ++k) delta[k] = d[static_cast<std::size_t>(k)];
  } else {
    const double rot = io::detail::number(cfg["perturbation"], "rotation_deg", "perturbation.") * std::numbers::pi / 180.0;
    const double trans = io::detail::number(cfg["perturbation"], "translation_m", "perturbation.");
    Vec3 a = detail::gaussian3(rng, 1.0).normalized();
    Vec3 b = detail::gaussian3(rng, 1.0).normalized();
    delta << rot * a, trans * b;
  }
  const Pose truth = apply_delta(delta, coarse);
  const auto views = io::detail::count_or(cfg, "views", 1, "");
  if (views == 0) throw io::ConfigError("views", "must be >= 1");

  fs::create_directories(opts.out_dir);
  io::RunManifest manifest("synth", cfg);
  manifest.add_seed("seed", seed);
  {
    auto out = io::open_out(opts.out_dir / "mesh.obj");
    write_obj(out, mesh);
  }
  manifest.add_output(opts.out_dir / "mesh.obj");
  json refs = json::array();
  for (std::uint64_t v = 0; v < views; ++v) {
    // first view at the base pose, later views with the mesh moved on the table
    const Pose model_pose =
        v == 0 ? Pose::identity()
               : Pose::planar(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.8, 0.8));
    const auto name = fmt::format("ref_{:03d}.pgm", v);
    io::save_pgm(opts.out_dir / name, render_silhouette(mesh, truth * model_pose, camera));
    manifest.add_output(opts.out_dir / name);
    refs.push_back({{"mask", name}, {"model_pose", io::to_json(model_pose)}});
  }
  json align{{"mesh", "mesh.obj"},
             {"camera", cfg["camera"]},
             {"coarse", cfg["coarse"]},
             {"references", refs},
             {"bounds", {{"rotation_deg", 10.0}, {"translation_m", 0.05}}}};
  if (cfg.contains("swarm")) align["swarm"] = cfg["swarm"];
  io::save_json(opts.out_dir / "viewpoint.json", align);
  io::save_json(opts.out_dir / "ground_truth.json",
                {{"pose", io::to_json(truth)}, {"delta", std::vector<double>(delta.data(), delta.data() + 6)}});
  io::save_json(opts.out_dir / "config.resolved.json", cfg);
  for (const char* f : {"viewpoint.json", "ground_truth.json", "config.resolved.json"}) {
    manifest.add_output(opts.out_dir / f);
  }
  manifest.write(opts.out_dir);
  fmt::print(log, "synth: wrote {} reference mask(s) and viewpoint.json to {}\n", views, opts.out_dir.string());
  return {opts.out_dir / "viewpoint.json", truth, delta};
}

inline void cmd_synth(const CommandOptions& opts, std::ostream& log) {
  const json cfg = io::load_json(opts.config);
  const auto base = opts.config.parent_path();
  if (cfg.value("kind", std::string("episodes")) == "viewpoint") {
    synth_viewpoint(cfg, base, opts, log);
  } else {
    synth_episodes(cfg, base, opts, log);
  }
}

// ---------------------------------------------------------------------------
// identify-object

struct EpisodeFit {
  std::string name;
  double add = 0.0;   // mean over samples, m
  double adds = 0.0;  // m
};

struct ObjectReport {
  ObjectIdentification identification;
  double loss = 0.0;
  std::vector<EpisodeFit> episodes;
  double mean_add = 0.0;
  double mean_adds = 0.0;
};

inline const std::vector<std::string>& object_param_names() {
  static const std::vector<std::string> names = {"friction", "mass", "com_x", "com_y"};
  return names;
}

inline ObjectReport cmd_identify_object(const CommandOptions& opts, std::ostream& log) {
  json cfg = io::load_json(opts.config);
  const auto base = opts.config.parent_path();
  const auto paths = detail::episode_paths(cfg, base);
  const auto mesh_path = detail::resolve(base, detail::string_field(cfg, "mesh", ""));
  const TriMesh mesh = load_mesh(mesh_path);
  const ObjectModel model(mesh);

  std::vector<ObjectEpisode> episodes;
  std::optional<PDParams> pd;
  for (const auto& p : paths) {
    auto rec = io::load_episode(p);
    if (!pd && rec.joints.joints() > 0) {
      pd = cfg.contains("pd") ? io::pd_from_json(cfg["pd"])
                              : PDParams{VecX::Ones(static_cast<Eigen::Index>(rec.joints.joints())),
                                         VecX::Ones(static_cast<Eigen::Index>(rec.joints.joints())),
                                         VecX::Ones(static_cast<Eigen::Index>(rec.joints.joints()))};
    }
    episodes.push_back({std::move(rec.object), std::move(rec.scenario)});
  }
  const ParamBounds bounds = cfg.contains("bounds")
                                 ? io::bounds_from_json(cfg["bounds"], object_param_names(), "bounds.")
                                 : default_object_bounds(model);
  io::detail::validated("bounds.", [&] { check_object_bounds(bounds, model); return 0; });
  const SwarmConfig swarm = detail::swarm(cfg, opts);
  const auto npoints = io::detail::count_or(cfg, "model_points", kDefaultModelPoints, "");
  const auto point_seed = io::detail::count_or(cfg, "point_seed", 0, "");
  if (npoints == 0) throw io::ConfigError("model_points", "must be >= 1");
  const PointCloud points = sample_surface(mesh, npoints, point_seed);

  ObjectReport report;
  report.identification = identify_object(episodes, mesh, points, *pd, bounds, swarm);
  report.loss = report.identification.trace.best_loss;
  const ObjectObjective objective(episodes, mesh, points, *pd);
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto sim = objective.simulate(i, report.identification.physics);
    const auto m = trajectory_metrics(episodes[i].real, sim, points, objective.index());
    EpisodeFit fit{paths[i].filename().string(), 0.0, 0.0};
    for (const auto& s : m) {
      fit.add += s.add;
      fit.adds += s.adds;
    }
    fit.add /= static_cast<double>(m.size());
    fit.adds /= static_cast<double>(m.size());
    report.mean_add += fit.add;
    report.mean_adds += fit.adds;
    report.episodes.push_back(fit);
  }
  report.mean_add /= static_cast<double>(episodes.size());
  report.mean_adds /= static_cast<double>(episodes.size());

  // outputs
  fs::create_directories(opts.out_dir);
  cfg["bounds"] = io::to_json(bounds, object_param_names());
  cfg["model_points"] = npoints;
  cfg["point_seed"] = point_seed;
  io::RunManifest manifest("identify-object", detail::with_swarm(cfg, swarm));
  manifest.add_seed("swarm", swarm.seed);
  manifest.add_seed("points", point_seed);
  manifest.add_input(mesh_path);
  for (const auto& p : paths) manifest.add_input(p);

  const auto& id = report.identification;
  {
    auto out = io::open_out(opts.out_dir / "trace.csv");
    io::write_trace_csv(out, id.trace, object_param_names());
  }
  {
    auto out = io::open_out(opts.out_dir / "sensitivity.csv");
    out << "parameter,value,lower,upper,curvature\n";
    for (std::size_t d = 0; d < kObjectParams; ++d) {
      out << object_param_names()[d] << ',' << io::fmt_double(id.trace.best_params[d]) << ','
          << io::fmt_double(bounds.lower[d]) << ',' << io::fmt_double(bounds.upper[d]) << ','
          << io::fmt_double(id.curvature[d]) << '\n';
    }
  }
  {
    auto out = io::open_out(opts.out_dir / "per_episode.csv");
    out << "episode,add_cm,adds_cm\n";
    for (const auto& e : report.episodes) {
      out << e.name << ',' << io::fmt_double(e.add * kCentimetersPerMeter) << ','
          << io::fmt_double(e.adds * kCentimetersPerMeter) << '\n';
    }
  }
  json rj{{"physics", io::to_json(id.physics)},
          {"loss", report.loss},
          {"evaluations", id.trace.evaluations},
          {"mean_add_cm", report.mean_add * kCentimetersPerMeter},
          {"mean_adds_cm", report.mean_adds * kCentimetersPerMeter},
          {"curvature", id.curvature},
          {"episodes", json::array()}};
  for (const auto& e : report.episodes) {
    rj["episodes"].push_back({{"episode", e.name},
                              {"add_cm", e.add * kCentimetersPerMeter},
                              {"adds_cm", e.adds * kCentimetersPerMeter}});
  }
  io::save_json(opts.out_dir / "report.json", rj);
  {
    auto out = io::open_out(opts.out_dir / "report.txt");
    fmt::print(out, "object identification over {} episode(s)\n", episodes.size());
    fmt::print(out, "  friction   {:.6f}\n  mass       {:.6f} kg\n  com_offset ({:.6f}, {:.6f}) m\n", id.physics.friction,
               id.physics.mass, id.physics.com_offset.x(), id.physics.com_offset.y());
    fmt::print(out, "  loss       {:.6g} m ({} evaluations)\n", report.loss, id.trace.evaluations);
    fmt::print(out, "  mean ADD   {:.2f} cm\n  mean ADD-S {:.2f} cm\n", report.mean_add * kCentimetersPerMeter,
               report.mean_adds * kCentimetersPerMeter);
    fmt::print(out, "sensitivity (loss curvature at optimum):\n");
    for (std::size_t d = 0; d < kObjectParams; ++d) {
      fmt::print(out, "  {:<9} {:.6g}\n", object_param_names()[d], id.curvature[d]);
    }
    fmt::print(out, "per episode (cm):\n");
    for (const auto& e : report.episodes) {
      fmt::print(out, "  {:<20} ADD {:.2f}  ADD-S {:.2f}\n", e.name, e.add * kCentimetersPerMeter,
                 e.adds * kCentimetersPerMeter);
    }
  }
  for (const char* f : {"trace.csv", "sensitivity.csv", "per_episode.csv", "report.json", "report.txt"}) {
    manifest.add_output(opts.out_dir / f);
  }
  manifest.write(opts.out_dir);
  fmt::print(log, "identify-object: friction {:.4f}  mass {:.4f} kg  com ({:.4f}, {:.4f}) m  ADD {:.2f} cm  ADD-S {:.2f} cm\n",
             id.physics.friction, id.physics.mass, id.physics.com_offset.x(), id.physics.com_offset.y(),
             report.mean_add * kCentimetersPerMeter, report.mean_adds * kCentimetersPerMeter);
  return report;
}

// ---------------------------------------------------------------------------
// identify-robot

inline RobotIdentification cmd_identify_robot(const CommandOptions& opts, std::ostream& log) {
  json cfg = io::load_json(opts.config);
  const auto base = opts.config.parent_path();
  const auto paths = detail::episode_paths(cfg, base);
  std::vector<RobotEpisode> episodes;
  for (const auto& p : paths) {
    auto rec = io::load_episode(p);
    if (!episodes.empty() && rec.joints.joints() != episodes.front().real.joints()) {
      throw InvalidInput("identify-robot: " + p.filename().string() + " has " + std::to_string(rec.joints.joints()) +
                         " joints, expected " + std::to_string(episodes.front().real.joints()));
    }
    episodes.push_back({std::move(rec.joints), std::move(rec.scenario.control)});
  }
  const std::vector<std::string> names = {"kp", "kd", "inertia"};
  ParamBounds bounds({1.0, 0.1, 0.05}, {500.0, 100.0, 5.0});
  if (cfg.contains("bounds")) {
    const auto& b = cfg["bounds"];
    if (b.is_array()) {
      std::vector<double> lo, hi;
      for (std::size_t j = 0; j < b.size(); ++j) {
        const auto one = io::bounds_from_json(b[j], names, "bounds[" + std::to_string(j) + "].");
        lo.insert(lo.end(), one.lower.begin(), one.lower.end());
        hi.insert(hi.end(), one.upper.begin(), one.upper.end());
      }
      bounds = ParamBounds(lo, hi);
    } else {
      bounds = io::bounds_from_json(b, names, "bounds.");
    }
  }
  const SwarmConfig swarm = detail::swarm(cfg, opts);
  RobotIdentification id = identify_robot(episodes, bounds, swarm);

  fs::create_directories(opts.out_dir);
  if (!cfg.contains("bounds")) cfg["bounds"] = io::to_json(bounds, names);
  io::RunManifest manifest("identify-robot", detail::with_swarm(cfg, swarm));
  manifest.add_seed("swarm", swarm.seed);
  for (const auto& p : paths) manifest.add_input(p);
  json joints = json::array();
  for (std::size_t j = 0; j < id.params.joints(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    joints.push_back({{"joint", j},
                      {"kp", id.params.kp[k]},
                      {"kd", id.params.kd[k]},
                      {"inertia", id.params.inertia[k]},
                      {"loss", id.per_joint[j].best_loss}});
    const auto name = fmt::format("trace_joint_{}.csv", j);
    auto out = io::open_out(opts.out_dir / name);
    io::write_trace_csv(out, id.per_joint[j], names);
    manifest.add_output(opts.out_dir / name);
  }
  io::save_json(opts.out_dir / "report.json",
                {{"pd", io::to_json(id.params)}, {"joints", joints}, {"robot_loss_rad", id.loss}});
  {
    auto out = io::open_out(opts.out_dir / "report.txt");
    fmt::print(out, "robot PD identification over {} episode(s)\n", episodes.size());
    for (std::size_t j = 0; j < id.params.joints(); ++j) {
      const auto k = static_cast<Eigen::Index>(j);
      fmt::print(out, "  joint {}: kp {:.6f}  kd {:.6f}  inertia {:.6f}\n", j, id.params.kp[k], id.params.kd[k],
                 id.params.inertia[k]);
    }
    fmt::print(out, "  L_robot {:.6g} rad\n", id.loss);
  }
  manifest.add_output(opts.out_dir / "report.json");
  manifest.add_output(opts.out_dir / "report.txt");
  manifest.write(opts.out_dir);
  for (std::size_t j = 0; j < id.params.joints(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    fmt::print(log, "identify-robot: joint {} kp {:.4f} kd {:.4f} inertia {:.4f}\n", j, id.params.kp[k],
               id.params.kd[k], id.params.inertia[k]);
  }
  fmt::print(log, "identify-robot: L_robot {:.3g} rad\n", id.loss);
  return id;
}

// ---------------------------------------------------------------------------
// align-viewpoint

inline ViewpointAlignment cmd_align_viewpoint(const CommandOptions& opts, std::ostream& log) {
  json cfg = io::load_json(opts.config);
  const auto base = opts.config.parent_path();
  const auto mesh_path = detail::resolve(base, detail::string_field(cfg, "mesh", ""));
  const TriMesh mesh = load_mesh(mesh_path);
  const CameraIntrinsics camera = io::camera_from_json(io::detail::field(cfg, "camera", ""));
  const Pose coarse = io::pose_from_json(io::detail::field(cfg, "coarse", ""), "coarse.");
  const auto& refs_cfg = io::detail::field(cfg, "references", "");
  if (!refs_cfg.is_array() || refs_cfg.empty()) throw io::ConfigError("references", "expected a non-empty array");
  std::vector<ViewReference> refs;
  std::vector<fs::path> mask_paths;
  for (std::size_t i = 0; i < refs_cfg.size(); ++i) {
    const std::string path = "references[" + std::to_string(i) + "].";
    const auto mask_path = detail::resolve(base, detail::string_field(refs_cfg[i], "mask", path));
    ViewReference ref{io::load_pgm(mask_path), Pose::identity()};
    if (refs_cfg[i].contains("model_pose")) ref.model_pose = io::pose_from_json(refs_cfg[i]["model_pose"], path + "model_pose.");
    if (ref.mask.width() != camera.width || ref.mask.height() != camera.height) {
      throw io::ConfigError(path + "mask", fmt::format("mask is {}x{} but camera is {}x{}", ref.mask.width(),
                                                       ref.mask.height(), camera.width, camera.height));
    }
    refs.push_back(std::move(ref));
    mask_paths.push_back(mask_path);
  }
  ParamBounds bounds = viewpoint_bounds();
  if (cfg.contains("bounds")) {
    const auto& b = cfg["bounds"];
    if (b.contains("lower") || b.contains("upper")) {
      bounds = io::detail::validated("bounds.", [&] {
        return ParamBounds(io::detail::numbers(io::detail::field(b, "lower", "bounds."), "bounds.lower", 6),
                           io::detail::numbers(io::detail::field(b, "upper", "bounds."), "bounds.upper", 6));
      });
    } else {
      bounds = viewpoint_bounds(io::detail::number_or(b, "rotation_deg", 10.0, "bounds."),
                                io::detail::number_or(b, "translation_m", 0.05, "bounds."));
    }
  }
  const SwarmConfig swarm = detail::swarm(cfg, opts);
  ViewpointOptions vopts;
  vopts.max_width = static_cast<int>(io::detail::count_or(cfg, "max_width", 320, ""));
  vopts.stages = static_cast<int>(io::detail::count_or(cfg, "stages", 3, ""));
  vopts.shrink = io::detail::number_or(cfg, "shrink", 0.35, "");
  ViewpointAlignment result = align_viewpoint(refs, mesh, coarse, camera, bounds, swarm, vopts);

  fs::create_directories(opts.out_dir);
  io::RunManifest manifest("align-viewpoint", detail::with_swarm(cfg, swarm));
  manifest.add_seed("swarm", swarm.seed);
  manifest.add_input(mesh_path);
  for (const auto& p : mask_paths) manifest.add_input(p);
  io::save_json(opts.out_dir / "fine_pose.json",
                {{"pose", io::to_json(result.fine)},
                 {"delta", std::vector<double>(result.delta.data(), result.delta.data() + 6)},
                 {"loss", result.trace.best_loss},
                 {"final_losses", result.final_losses}});
  manifest.add_output(opts.out_dir / "fine_pose.json");
  for (std::size_t k = 0; k < result.stages.size(); ++k) {
    // trace.csv is the last (full-resolution) pass
    const auto name = k + 1 == result.stages.size() ? std::string("trace.csv") : fmt::format("trace_stage_{}.csv", k);
    auto out = io::open_out(opts.out_dir / name);
    io::write_trace_csv(out, result.stages[k], {"rx", "ry", "rz", "tx", "ty", "tz"});
    manifest.add_output(opts.out_dir / name);
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto rendered = render_silhouette(mesh, result.fine * refs[i].model_pose, camera);
    std::vector<double> diff(rendered.coverage().size());
    for (std::size_t k = 0; k < diff.size(); ++k) {
      diff[k] = std::abs(rendered.coverage()[k] - (refs[i].mask.coverage()[k] >= 0.5 ? 1.0 : 0.0));
    }
    const auto name = fmt::format("diff_{:03d}.pgm", i);
    io::save_pgm(opts.out_dir / name, SilhouetteMask(camera.width, camera.height, std::move(diff)));
    manifest.add_output(opts.out_dir / name);
  }
  manifest.write(opts.out_dir);
  const auto& q = result.fine.rotation();
  const auto& t = result.fine.translation();
  fmt::print(log, "align-viewpoint: fine pose q=({:.6f}, {:.6f}, {:.6f}, {:.6f}) t=({:.6f}, {:.6f}, {:.6f}) m\n", q.w(),
             q.x(), q.y(), q.z(), t.x(), t.y(), t.z());
  fmt::print(log, "align-viewpoint: BCE {:.6g} nats/pixel, delta |rot| {:.4f} deg |trans| {:.4f} m\n",
             result.trace.best_loss, result.delta.head<3>().norm() * 180.0 / std::numbers::pi,
             result.delta.tail<3>().norm());
  return result;
}

// ---------------------------------------------------------------------------
// simulate

inline Episode cmd_simulate(const CommandOptions& opts, std::ostream& log) {
  json cfg = io::load_json(opts.config);
  const auto base = opts.config.parent_path();
  const auto mesh_path = detail::resolve(base, detail::string_field(cfg, "mesh", ""));
  const TriMesh mesh = load_mesh(mesh_path);
  std::optional<fs::path> episode_path;
  Scenario scenario;
  if (cfg.contains("episode")) {
    episode_path = detail::resolve(base, detail::string_field(cfg, "episode", ""));
    scenario = io::load_episode(*episode_path).scenario;
  } else {
    scenario = io::scenario_from_json(io::detail::field(cfg, "scenario", ""));
  }
  const ObjectPhysics physics = io::physics_from_json(io::detail::field(cfg, "physics", ""));
  const PDParams pd = io::pd_from_json(io::detail::field(cfg, "pd", ""));
  Episode ep = io::detail::validated("physics.", [&] { return simulate_episode(scenario, pd, physics, mesh); });

  fs::create_directories(opts.out_dir);
  io::RunManifest manifest("simulate", cfg);
  manifest.add_input(mesh_path);
  if (episode_path) manifest.add_input(*episode_path);
  io::save_pose_trajectory(opts.out_dir / "sim.object.txt", ep.object, "table");
  io::save_joint_trajectory(opts.out_dir / "sim.joints.txt", ep.joints);
  manifest.add_output(opts.out_dir / "sim.object.txt");
  manifest.add_output(opts.out_dir / "sim.joints.txt");
  manifest.write(opts.out_dir);
  fmt::print(log, "simulate: {} joint samples, {} object samples -> {}\n", ep.joints.size(), ep.object.size(),
             opts.out_dir.string());
  return ep;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  fs::path real;
  fs::path sim;
  fs::path mesh;
  std::size_t points = kDefaultModelPoints;
  std::uint64_t point_seed = 0;
  bool per_step = true;  // print one line per sample
};

struct EvalReport {
  std::vector<StepMetrics> steps;  // meters
  double mean_add = 0.0;
  double mean_adds = 0.0;
};

/// ADD / ADD-S between a real and a simulated trajectory. The simulated one
/// is resampled onto the real timestamps by nearest timestamp.
inline EvalReport cmd_eval(const EvalOptions& eval, const CommandOptions& opts, std::ostream& log) {
  const PoseTrajectory real = io::load_pose_trajectory(eval.real);
  const PoseTrajectory sim_raw = io::load_pose_trajectory(eval.sim);
  const TriMesh mesh = load_mesh(eval.mesh);
  if (eval.points == 0) throw InvalidInput("eval: --points must be >= 1");
  const PointCloud points = sample_surface(mesh, eval.points, eval.point_seed);
  const auto times = real.times();
  const PoseTrajectory sim = resample_nearest(sim_raw, times);

  EvalReport report;
  report.steps = trajectory_metrics(real, sim, points);
  for (const auto& s : report.steps) {
    report.mean_add += s.add;
    report.mean_adds += s.adds;
  }
  report.mean_add /= static_cast<double>(report.steps.size());
  report.mean_adds /= static_cast<double>(report.steps.size());

  if (eval.per_step) {
    for (const auto& s : report.steps) {
      fmt::print(log, "t={:.4f} s  ADD {:.2f} cm  ADD-S {:.2f} cm\n", s.time, s.add * kCentimetersPerMeter,
                 s.adds * kCentimetersPerMeter);
    }
  }
  fmt::print(log, "mean ADD {:.2f} cm  mean ADD-S {:.2f} cm  ({} samples)\n", report.mean_add * kCentimetersPerMeter,
             report.mean_adds * kCentimetersPerMeter, report.steps.size());

  fs::create_directories(opts.out_dir);
  json cfg{{"real", eval.real.string()},
           {"sim", eval.sim.string()},
           {"mesh", eval.mesh.string()},
           {"points", eval.points},
           {"point_seed", eval.point_seed}};
  io::RunManifest manifest("eval", cfg);
  manifest.add_seed("points", eval.point_seed);
  manifest.add_input(eval.real);
  manifest.add_input(eval.sim);
  manifest.add_input(eval.mesh);
  {
    auto out = io::open_out(opts.out_dir / "eval.csv");
    out << "time_s,add_cm,adds_cm\n";
    for (const auto& s : report.steps) {
      out << io::fmt_double(s.time) << ',' << io::fmt_double(s.add * kCentimetersPerMeter) << ','
          << io::fmt_double(s.adds * kCentimetersPerMeter) << '\n';
    }
  }
  manifest.add_output(opts.out_dir / "eval.csv");
  manifest.write(opts.out_dir);
  return report;
}

}  // namespace twin_ident::cli
