// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>

#include <fmt/core.h>

#include "test_support.hpp"

using namespace twin_ident;
using namespace testing_support;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + TWIN_IDENT_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void require_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli_output.txt";
  if (const int code = run_cli(args, log); code != 0) {
    throw std::runtime_error(fmt::format("twin-ident {} exited {}: {}", args, code, read_file(log)));
  }
}

fs::path write_config(const fs::path& path, const json& j) {
  io::save_json(path, j);
  return path;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

HitSpec central_hit(double speed) {
  HitSpec h;
  h.contact_point = Vec2(-0.05, 0.0);
  h.direction = Vec2::UnitX();
  h.ee_speed = speed;
  h.ee_effective_mass = 1.0;
  return h;
}

// 1. Slide distance and stop time against v0^2 / (2 mu g) and v0 / (mu g).
Outcome ac1() {
  const ObjectModel model(make_box({0.1, 0.1, 0.1}));
  Rng rng(101);
  double worst_d = 0.0, worst_t = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double mu = uniform(rng, 0.05, 1.0), v0 = uniform(rng, 0.1, 2.0);
    // equal unit masses with no restitution: the object leaves at half the
    // end-effector speed
    const auto r = simulate_slide(SlideState{}, {mu, 1.0, Vec2::Zero()}, model, central_hit(2.0 * v0),
                                  kStandardGravity, 1e-4, v0 / (mu * kStandardGravity) + 1.0);
    if (!r.came_to_rest) return {false, fmt::format("episode {} did not come to rest", i)};
    worst_d = std::max(worst_d, rel_err(r.trajectory.back().pose.translation().x(),
                                        v0 * v0 / (2.0 * mu * kStandardGravity)));
    worst_t = std::max(worst_t, rel_err(r.stop_time, v0 / (mu * kStandardGravity)));
  }
  return {worst_d < 1e-3 && worst_t < 1e-3,
          fmt::format("50 episodes, worst rel. error distance {:.2e} stop time {:.2e} (limit 1e-3)", worst_d, worst_t)};
}

// 2. ADD / ADD-S identities against an exhaustive oracle.
Outcome ac2() {
  Rng rng(202);
  int violations = 0;
  const int pairs = 1000;
  for (int i = 0; i < pairs; ++i) {
    const auto n = static_cast<std::size_t>(1 + uniform_index(rng, 50));
    const PointCloud c = random_cloud(rng, n);
    const Pose a = random_pose(rng, 0.3), b = random_pose(rng, 0.3);
    const double add = add_metric(a, b, c), adds = adds_metric(a, b, c);
    violations += !(adds <= add) + (add_metric(a, a, c) != 0.0) + (adds != adds_oracle(a, b, c));
  }
  return {violations == 0, fmt::format("{} pose pairs, clouds of 1-50 points, {} violations", pairs, violations)};
}

// 3. Object parameters recovered from synthetic Control-Hit-Slide episodes.
Outcome ac3(const fs::path& root) {
  const fs::path dir = root / "ac3";
  const json id_cfg{{"mesh", "episodes/mesh.obj"}, {"episodes_dir", "episodes"}};

  require_cli("synth --config " + write_config(dir / "synth.json", {{"seed", 3}}).string() + " --out-dir " +
                  (dir / "episodes").string(),
              dir);
  require_cli("identify-object --config " + write_config(dir / "id.json", id_cfg).string() + " --out-dir " +
                  (dir / "fit").string(),
              dir);
  const auto truth = io::load_json(dir / "episodes" / "ground_truth.json");
  const auto report = io::load_json(dir / "fit" / "report.json");
  const double add_cm = report["mean_add_cm"].get<double>();
  const double mu_err = rel_err(report["physics"]["friction"].get<double>(), truth["physics"]["friction"].get<double>());

  const fs::path noisy = dir / "noisy";
  fs::create_directories(noisy);
  require_cli("synth --config " +
                  write_config(noisy / "synth.json", {{"seed", 3}, {"noise", {{"translation_sigma", 0.002}}}}).string() +
                  " --out-dir " + (noisy / "episodes").string(),
              noisy);
  require_cli("identify-object --config " + write_config(noisy / "id.json", id_cfg).string() + " --out-dir " +
                  (noisy / "fit").string(),
              noisy);
  const double floor_cm =
      io::load_json(noisy / "episodes" / "ground_truth.json")["noise_floor_add_m"].get<double>() * cli::kCentimetersPerMeter;
  const double noisy_cm = io::load_json(noisy / "fit" / "report.json")["mean_add_cm"].get<double>();

  return {add_cm < 0.1 && mu_err < 0.05 && noisy_cm <= 3.0 * floor_cm,
          fmt::format("noiseless: mean ADD {:.4f} cm (< 0.1), friction rel. error {:.2e} (< 0.05); "
                      "2 mm noise: mean ADD {:.3f} cm vs noise floor {:.3f} cm (limit 3x)",
                      add_cm, mu_err, noisy_cm, floor_cm)};
}

// 4. PD gains recovered from noiseless joint traces.
Outcome ac4(const fs::path& root) {
  const fs::path dir = root / "ac4";
  require_cli("synth --config " + write_config(dir / "synth.json", {{"seed", 4}, {"episodes", 4}}).string() +
                  " --out-dir " + (dir / "episodes").string(),
              dir);
  const auto truth = io::load_json(dir / "episodes" / "ground_truth.json");
  const PDParams pd = io::pd_from_json(truth["pd"]);
  // kp, kd and inertia only enter as ratios, so inertia is pinned at its true value
  json bounds = json::array();
  for (Eigen::Index j = 0; j < pd.kp.size(); ++j) {
    bounds.push_back({{"kp", {1.0, 300.0}}, {"kd", {0.1, 50.0}}, {"inertia", {pd.inertia[j], pd.inertia[j]}}});
  }
  require_cli("identify-robot --config " +
                  write_config(dir / "robot.json", {{"episodes_dir", "episodes"}, {"bounds", bounds}}).string() +
                  " --out-dir " + (dir / "fit").string(),
              dir);
  const auto report = io::load_json(dir / "fit" / "report.json");
  double worst = 0.0;
  for (const auto& j : report["joints"]) {
    const auto k = j["joint"].get<Eigen::Index>();
    worst = std::max({worst, rel_err(j["kp"].get<double>(), pd.kp[k]), rel_err(j["kd"].get<double>(), pd.kd[k])});
  }
  const double loss = report["robot_loss_rad"].get<double>();
  return {worst < 0.02 && loss < 1e-6,
          fmt::format("{} joints, worst kp/kd rel. error {:.2e} (< 0.02), L_robot {:.2e} rad (< 1e-6)",
                      report["joints"].size(), worst, loss)};
}

// 5. Camera pose recovered from a silhouette at a hidden 10 deg / 5 cm perturbation.
Outcome ac5(const fs::path& root) {
  const fs::path dir = root / "ac5";
  const json synth{{"kind", "viewpoint"}, {"seed", 5}, {"perturbation", {{"rotation_deg", 10.0}, {"translation_m", 0.05}}}};
  require_cli("synth --config " + write_config(dir / "synth.json", synth).string() + " --out-dir " +
                  (dir / "ref").string(),
              dir);
  const auto cfg = io::load_json(dir / "ref" / "viewpoint.json");
  const auto camera = io::camera_from_json(cfg["camera"]);
  if (camera.width != 320 || camera.height != 240) return {false, "reference is not 320x240"};
  require_cli("align-viewpoint --config " + (dir / "ref" / "viewpoint.json").string() + " --out-dir " +
                  (dir / "fit").string(),
              dir);
  const Pose found = io::pose_from_json(io::load_json(dir / "fit" / "fine_pose.json")["pose"]);
  const Pose truth = io::pose_from_json(io::load_json(dir / "ref" / "ground_truth.json")["pose"]);
  const double rot_deg = rotation_angle_between(found, truth) * 180.0 / std::numbers::pi;
  const double trans_mm = translation_distance(found, truth) * 1000.0;
  return {rot_deg < 0.5 && trans_mm < 2.0,
          fmt::format("320x240, error {:.3f} deg (< 0.5) and {:.3f} mm (< 2)", rot_deg, trans_mm)};
}

// 6. Swarm optimizer sanity and thread-count independence of CLI outputs.
Outcome ac6(const fs::path& root) {
  SwarmConfig cfg;
  cfg.particles = 32;
  cfg.iterations = 200;
  ParamBounds b;
  for (int d = 0; d < 5; ++d) {
    b.lower.push_back(-5.0);
    b.upper.push_back(5.0);
  }
  double worst = 0.0;
  bool monotone = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    const auto r = pso_minimize(
        [](std::span<const double> x) {
          double s = 0.0;
          for (double v : x) s += (v - 1.0) * (v - 1.0);
          return s;
        },
        b, cfg);
    worst = std::max(worst, r.best_loss);
    for (std::size_t i = 1; i < r.history.size(); ++i) monotone = monotone && r.history[i] <= r.history[i - 1];
  }

  const fs::path dir = root / "ac6";
  require_cli("synth --config " + write_config(dir / "synth.json", {{"episodes", 3}}).string() + " --out-dir " +
                  (dir / "episodes").string(),
              dir);
  const json id{{"mesh", "episodes/mesh.obj"}, {"episodes_dir", "episodes"}, {"swarm", {{"particles", 16}, {"iterations", 10}}}};
  const auto id_path = write_config(dir / "id.json", id).string();
  std::map<std::string, std::string> outputs[2];
  const int thread_counts[2] = {1, 8};
  for (int k = 0; k < 2; ++k) {
    const fs::path out = dir / fmt::format("threads_{}", thread_counts[k]);
    require_cli(fmt::format("identify-object --config {} --seed 9 --threads {} --out-dir {}", id_path, thread_counts[k],
                            out.string()),
                dir);
    for (const auto& e : fs::directory_iterator(out)) outputs[k][e.path().filename().string()] = read_file(e.path());
  }
  const bool same = !outputs[0].empty() && outputs[0] == outputs[1];
  return {worst < 1e-6 && monotone && same,
          fmt::format("sphere 32x200 over 10 seeds: worst best loss {:.2e} (< 1e-6), histories {}; "
                      "--threads 1 vs 8: {} output files {}",
                      worst, monotone ? "non-increasing" : "NOT monotone", outputs[0].size(),
                      same ? "bitwise identical" : "DIFFER")};
}

// 7. Halving dt halves the change in the final slide pose.
Outcome ac7() {
  const TriMesh box = make_box({0.12, 0.08, 0.05});
  const ObjectModel model(box);
  const PointCloud pts = sample_surface(box, 256, 0);
  Rng rng(707);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const ObjectPhysics p{uniform(rng, 0.1, 0.8), uniform(rng, 0.2, 1.5),
                          Vec2(uniform(rng, -0.015, 0.015), uniform(rng, -0.01, 0.01))};
    HitSpec h;
    h.contact_point = Vec2(-0.06, uniform(rng, -0.035, 0.035));
    h.ee_speed = uniform(rng, 0.5, 2.0);
    h.ee_effective_mass = 2.0;
    auto final_pose = [&](double dt) {
      return simulate_slide(SlideState{}, p, model, h, kStandardGravity, dt, 3.0).trajectory.back().pose;
    };
    const Pose p1 = final_pose(2e-3), p2 = final_pose(1e-3), p4 = final_pose(5e-4);
    const double ratio = add_metric(p1, p2, pts) / add_metric(p2, p4, pts);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  return {lo >= 1.5 && hi <= 2.5,
          fmt::format("20 episodes, |P(2h)-P(h)| / |P(h)-P(h/2)| in [{:.3f}, {:.3f}] (required [1.5, 2.5])", lo, hi)};
}

// 8. eval on a constant 1.39 cm offset.
Outcome ac8(const fs::path& root) {
  const fs::path dir = root / "ac8";
  {
    auto out = io::open_out(dir / "box.obj");
    write_obj(out, make_box({0.12, 0.08, 0.05}));
  }
  std::vector<PoseSample> real, sim;
  for (int i = 0; i < 50; ++i) {
    const double t = 0.02 * i;
    const Pose p = Pose::planar(0.3 + 0.01 * i, -0.1, 0.02 * i, 0.025);
    real.push_back({t, p});
    sim.push_back({t, Pose::from_translation({0.0, 0.0139, 0.0}) * p});
  }
  io::save_pose_trajectory(dir / "real.txt", PoseTrajectory(real));
  io::save_pose_trajectory(dir / "sim.txt", PoseTrajectory(sim));
  require_cli("eval --quiet --real " + (dir / "real.txt").string() + " --sim " + (dir / "sim.txt").string() +
                  " --mesh " + (dir / "box.obj").string() + " --out-dir " + (dir / "out").string(),
              dir);
  std::string printed = read_file(dir / "cli_output.txt");
  while (!printed.empty() && printed.back() == '\n') printed.pop_back();
  return {printed.starts_with("mean ADD 1.39 cm"), fmt::format("printed \"{}\"", printed)};
}

}  // namespace

int main() {
  const fs::path root = scratch_dir("acceptance");
  for (const char* d : {"ac3", "ac4", "ac5", "ac6", "ac8"}) fs::create_directories(root / d);
  struct Criterion {
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"AC1 slide closed form", 10, ac1},
      {"AC2 metric identities", 30, ac2},
      {"AC3 object identification", 600, [&] { return ac3(root); }},
      {"AC4 robot identification", 120, [&] { return ac4(root); }},
      {"AC5 viewpoint recovery", 300, [&] { return ac5(root); }},
      {"AC6 swarm sanity", 0, [&] { return ac6(root); }},
      {"AC7 first-order convergence", 0, ac7},
      {"AC8 eval format", 0, [&] { return ac8(root); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.limit_s == 0 || secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::string timing = fmt::format("{:.1f} s", secs);
    if (c.limit_s > 0) timing += fmt::format(" of {:.0f} s", c.limit_s);
    fmt::print("{} {}: {} [{}]\n", pass ? "PASS" : "FAIL", c.name, o.detail, timing);
    std::cout.flush();
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
