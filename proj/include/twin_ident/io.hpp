#pragma once

// File formats: pose/joint trajectory text files, binary PGM masks, CSV
// tables, JSON configs, episode records and run manifests.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <openssl/evp.h>

#include <json.hpp>

#include "twin_ident/dynamics.hpp"
#include "twin_ident/error.hpp"
#include "twin_ident/pose.hpp"
#include "twin_ident/pso.hpp"
#include "twin_ident/viewpoint.hpp"

namespace twin_ident::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// A config field that is missing, mistyped or out of range.
class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : InvalidInput("config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  return out;
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return in;
}

namespace detail {

inline std::vector<double> parse_numbers(const std::string& line, const std::string& source, std::size_t line_no) {
  std::vector<double> out;
  for (auto tok : twin_ident::detail::split_ws(line)) {
    double v;
    if (!twin_ident::detail::parse_double(tok, v)) {
      throw ParseError(source, line_no, "not a number: '" + std::string(tok) + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pose trajectories: "t qw qx qy qz tx ty tz" per line, '#' header/comments.

inline constexpr const char* kPoseHeader = "# twin-ident pose-trajectory v1 | t[s] qw qx qy qz tx[m] ty[m] tz[m]";

inline void write_pose_trajectory(std::ostream& out, const PoseTrajectory& traj, const std::string& frame = "world") {
  out << kPoseHeader << " | frame=" << frame << '\n';
  for (const auto& s : traj) {
    const auto& q = s.pose.rotation();
    const auto& t = s.pose.translation();
    out << fmt::format("{:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g}\n", s.time, q.w(), q.x(), q.y(),
                       q.z(), t.x(), t.y(), t.z());
  }
}

inline PoseTrajectory read_pose_trajectory(std::istream& in, const std::string& source = "<trajectory>") {
  std::vector<PoseSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto v = detail::parse_numbers(line, source, line_no);
    if (v.size() != 8) throw ParseError(source, line_no, "expected 8 values (t qw qx qy qz tx ty tz)");
    try {
      samples.push_back({v[0], Pose(Quat(v[1], v[2], v[3], v[4]), Vec3(v[5], v[6], v[7]))});
    } catch (const InvalidInput& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (samples.size() > 1 && !(samples.back().time > samples[samples.size() - 2].time)) {
      throw ParseError(source, line_no, "timestamps must be strictly increasing");
    }
  }
  if (samples.empty()) throw ParseError(source, line_no, "trajectory has no samples");
  return PoseTrajectory(std::move(samples));
}

inline void save_pose_trajectory(const fs::path& path, const PoseTrajectory& traj, const std::string& frame = "world") {
  auto out = open_out(path);
  write_pose_trajectory(out, traj, frame);
}

inline PoseTrajectory load_pose_trajectory(const fs::path& path) {
  auto in = open_in(path);
  return read_pose_trajectory(in, path.string());
}

// ---------------------------------------------------------------------------
// Joint trajectories: "t q_1..q_n qd_1..qd_n" per line.

inline void write_joint_trajectory(std::ostream& out, const JointTrajectory& traj) {
  out << "# twin-ident joint-trajectory v1 | joints=" << traj.joints()
      << " | t[s] q_1..q_n[rad] qd_1..qd_n[rad/s]\n";
  for (const auto& s : traj) {
    out << fmt_double(s.time);
    for (double q : s.positions) out << ' ' << fmt_double(q);
    for (double qd : s.velocities) out << ' ' << fmt_double(qd);
    out << '\n';
  }
}

inline JointTrajectory read_joint_trajectory(std::istream& in, const std::string& source = "<joints>") {
  std::vector<JointSample> samples;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> joints;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      const auto pos = line.find("joints=");
      if (pos != std::string::npos && !joints) joints = std::stoul(line.substr(pos + 7));
      continue;
    }
    const auto v = detail::parse_numbers(line, source, line_no);
    if (!joints) {
      if (v.size() < 3 || v.size() % 2 == 0) throw ParseError(source, line_no, "cannot infer joint count");
      joints = (v.size() - 1) / 2;
    }
    if (v.size() != 1 + 2 * *joints) {
      throw ParseError(source, line_no, "expected " + std::to_string(1 + 2 * *joints) + " values");
    }
    const auto n = static_cast<Eigen::Index>(*joints);
    JointSample s;
    s.time = v[0];
    s.positions = Eigen::Map<const VecX>(v.data() + 1, n);
    s.velocities = Eigen::Map<const VecX>(v.data() + 1 + n, n);
    if (!samples.empty() && !(s.time > samples.back().time)) {
      throw ParseError(source, line_no, "timestamps must be strictly increasing");
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw ParseError(source, line_no, "trajectory has no samples");
  return JointTrajectory(std::move(samples));
}

inline void save_joint_trajectory(const fs::path& path, const JointTrajectory& traj) {
  auto out = open_out(path);
  write_joint_trajectory(out, traj);
}

inline JointTrajectory load_joint_trajectory(const fs::path& path) {
  auto in = open_in(path);
  return read_joint_trajectory(in, path.string());
}

// ---------------------------------------------------------------------------
// PGM (P5, maxval <= 255), coverage scaled linearly to 0..maxval.

inline void write_pgm(std::ostream& out, const SilhouetteMask& mask) {
  out << "P5\n" << mask.width() << ' ' << mask.height() << "\n255\n";
  std::string bytes(mask.coverage().size(), '\0');
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(mask.coverage()[i] * 255.0)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline SilhouetteMask read_pgm(std::istream& in, const std::string& source = "<pgm>") {
  auto token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  if (token() != "P5") throw ParseError(source, 1, "not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw ParseError(source, 0, "malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw ParseError(source, 0, "unsupported PGM dimensions or maxval");
  }
  std::string bytes(static_cast<std::size_t>(w) * h, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw ParseError(source, 0, "truncated PGM data");
  std::vector<double> coverage(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    coverage[i] = static_cast<unsigned char>(bytes[i]) / static_cast<double>(maxval);
  }
  return {w, h, std::move(coverage)};
}

inline void save_pgm(const fs::path& path, const SilhouetteMask& mask) {
  auto out = open_out(path);
  write_pgm(out, mask);
}

inline SilhouetteMask load_pgm(const fs::path& path) {
  auto in = open_in(path);
  return read_pgm(in, path.string());
}

// ---------------------------------------------------------------------------
// CSV

inline void write_trace_csv(std::ostream& out, const OptResult& r, const std::vector<std::string>& names) {
  out << "iteration,best_loss";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    out << i << ',' << fmt_double(r.history[i]);
    for (double p : r.best_params_history[i]) out << ',' << fmt_double(p);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON conversion with field-level validation.

namespace detail {

inline const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(path + key, "required field is missing");
  return j.at(key);
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

inline double number(const json& j, const std::string& key, const std::string& path) {
  return number(field(j, key, path), path + key);
}

inline double number_or(const json& j, const std::string& key, double fallback, const std::string& path) {
  return j.is_object() && j.contains(key) ? number(j.at(key), path + key) : fallback;
}

inline std::uint64_t count_or(const json& j, const std::string& key, std::uint64_t fallback, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(path + key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::vector<double> numbers(const json& j, const std::string& path, std::optional<std::size_t> size = {}) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  if (size && out.size() != *size) throw ConfigError(path, "expected " + std::to_string(*size) + " values");
  return out;
}

inline VecX vecx(const json& j, const std::string& path) {
  const auto v = numbers(j, path);
  return Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json to_json(const VecX& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vec2 vec2(const json& j, const std::string& path) {
  const auto v = numbers(j, path, 2);
  return {v[0], v[1]};
}

inline std::pair<double, double> range(const json& j, const std::string& path) {
  const auto v = numbers(j, path, 2);
  if (!(v[0] <= v[1])) throw ConfigError(path, "expected [lower, upper] with lower <= upper");
  return {v[0], v[1]};
}

template <class Fn>
auto validated(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace detail

inline json to_json(const Pose& p) {
  const auto& q = p.rotation();
  const auto& t = p.translation();
  return {{"q", {q.w(), q.x(), q.y(), q.z()}}, {"t", {t.x(), t.y(), t.z()}}};
}

inline Pose pose_from_json(const json& j, const std::string& path = "pose.") {
  const auto q = detail::numbers(detail::field(j, "q", path), path + "q", 4);
  const auto t = detail::numbers(detail::field(j, "t", path), path + "t", 3);
  return detail::validated(path, [&] { return Pose(Quat(q[0], q[1], q[2], q[3]), Vec3(t[0], t[1], t[2])); });
}

inline json to_json(const ObjectPhysics& p) {
  return {{"friction", p.friction}, {"mass", p.mass}, {"com_offset", {p.com_offset.x(), p.com_offset.y()}}};
}

inline ObjectPhysics physics_from_json(const json& j, const std::string& path = "physics.") {
  ObjectPhysics p;
  p.friction = detail::number(j, "friction", path);
  p.mass = detail::number(j, "mass", path);
  p.com_offset = j.contains("com_offset") ? detail::vec2(j.at("com_offset"), path + "com_offset") : Vec2::Zero();
  detail::validated(path, [&] { p.validate(); return 0; });
  return p;
}

inline json to_json(const PDParams& p) {
  return {{"kp", detail::to_json(p.kp)}, {"kd", detail::to_json(p.kd)}, {"inertia", detail::to_json(p.inertia)}};
}

inline PDParams pd_from_json(const json& j, const std::string& path = "pd.") {
  PDParams p{detail::vecx(detail::field(j, "kp", path), path + "kp"),
             detail::vecx(detail::field(j, "kd", path), path + "kd"),
             detail::vecx(detail::field(j, "inertia", path), path + "inertia")};
  detail::validated(path, [&] { p.validate(); return 0; });
  return p;
}

inline json to_json(const SwarmConfig& c) {
  return {{"particles", c.particles},      {"iterations", c.iterations}, {"inertia", c.inertia},
          {"cognitive", c.cognitive},      {"social", c.social},         {"velocity_clamp", c.velocity_clamp},
          {"seed", c.seed},                {"threads", c.threads}};
}

inline SwarmConfig swarm_from_json(const json& j, const std::string& path = "swarm.") {
  SwarmConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  c.particles = detail::count_or(j, "particles", c.particles, path);
  c.iterations = detail::count_or(j, "iterations", c.iterations, path);
  c.inertia = detail::number_or(j, "inertia", c.inertia, path);
  c.cognitive = detail::number_or(j, "cognitive", c.cognitive, path);
  c.social = detail::number_or(j, "social", c.social, path);
  c.velocity_clamp = detail::number_or(j, "velocity_clamp", c.velocity_clamp, path);
  c.seed = detail::count_or(j, "seed", c.seed, path);
  c.threads = detail::count_or(j, "threads", c.threads, path);
  detail::validated(path, [&] { c.validate(); return 0; });
  return c;
}

inline json to_json(const CameraIntrinsics& c) {
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

inline CameraIntrinsics camera_from_json(const json& j, const std::string& path = "camera.") {
  CameraIntrinsics c;
  c.fx = detail::number(j, "fx", path);
  c.fy = detail::number(j, "fy", path);
  c.cx = detail::number(j, "cx", path);
  c.cy = detail::number(j, "cy", path);
  c.width = static_cast<int>(detail::count_or(j, "width", 0, path));
  c.height = static_cast<int>(detail::count_or(j, "height", 0, path));
  detail::validated(path, [&] { c.validate(); return 0; });
  return c;
}

inline json to_json(const HitSpec& h) {
  return {{"contact_point", {h.contact_point.x(), h.contact_point.y()}},
          {"direction", {h.direction.x(), h.direction.y()}},
          {"ee_speed", h.ee_speed},
          {"ee_effective_mass", h.ee_effective_mass}};
}

inline HitSpec hit_from_json(const json& j, const std::string& path = "hit.") {
  HitSpec h;
  h.contact_point = detail::vec2(detail::field(j, "contact_point", path), path + "contact_point");
  h.direction = detail::vec2(detail::field(j, "direction", path), path + "direction");
  h.ee_speed = detail::number(j, "ee_speed", path);
  h.ee_effective_mass = detail::number(j, "ee_effective_mass", path);
  detail::validated(path, [&] { h.validate(); return 0; });
  return h;
}

inline const char* to_string(FrictionDirection d) {
  return d == FrictionDirection::velocity ? "velocity" : "hit_axis";
}

inline json to_json(const SlideConfig& s) {
  return {{"rest_threshold", s.rest_threshold},
          {"friction_dir", to_string(s.friction_direction)},
          {"restitution", s.restitution},
          {"table_height", s.table_height}};
}

inline SlideConfig slide_from_json(const json& j, const std::string& path = "slide.") {
  SlideConfig s;
  if (j.is_null()) return s;
  s.rest_threshold = detail::number_or(j, "rest_threshold", s.rest_threshold, path);
  s.restitution = detail::number_or(j, "restitution", s.restitution, path);
  s.table_height = detail::number_or(j, "table_height", s.table_height, path);
  if (j.contains("friction_dir")) {
    const auto& v = j.at("friction_dir");
    if (v == "velocity") {
      s.friction_direction = FrictionDirection::velocity;
    } else if (v == "hit_axis") {
      s.friction_direction = FrictionDirection::hit_axis;
    } else {
      throw ConfigError(path + "friction_dir", "expected \"velocity\" or \"hit_axis\"");
    }
  }
  return s;
}

inline json to_json(const Scenario& s) {
  json controls = json::array();
  for (const auto& u : s.control.targets) controls.push_back(detail::to_json(u));
  return {{"dt", s.control.dt},
          {"controls", controls},
          {"initial_positions", detail::to_json(s.control.initial_positions)},
          {"initial_velocities", detail::to_json(s.control.initial_velocities)},
          {"hit_step", s.hit_step},
          {"hit", to_json(s.hit)},
          {"object_initial", {s.object_initial.x, s.object_initial.y, s.object_initial.yaw}},
          {"gravity", s.gravity},
          {"max_duration", s.max_duration},
          {"object_stride", s.object_stride},
          {"slide", to_json(s.slide)}};
}

inline Scenario scenario_from_json(const json& j, const std::string& path = "scenario.") {
  Scenario s;
  s.control.dt = detail::number(j, "dt", path);
  const auto& controls = detail::field(j, "controls", path);
  if (!controls.is_array()) throw ConfigError(path + "controls", "expected an array of joint-target arrays");
  for (std::size_t i = 0; i < controls.size(); ++i) {
    s.control.targets.push_back(detail::vecx(controls[i], path + "controls[" + std::to_string(i) + "]"));
  }
  s.control.initial_positions = detail::vecx(detail::field(j, "initial_positions", path), path + "initial_positions");
  s.control.initial_velocities =
      j.contains("initial_velocities") ? detail::vecx(j.at("initial_velocities"), path + "initial_velocities")
                                       : VecX::Zero(s.control.initial_positions.size());
  s.hit_step = detail::count_or(j, "hit_step", s.control.targets.size(), path);
  s.hit = hit_from_json(detail::field(j, "hit", path), path + "hit.");
  const auto o = detail::numbers(detail::field(j, "object_initial", path), path + "object_initial", 3);
  s.object_initial = {o[0], o[1], o[2]};
  s.gravity = detail::number_or(j, "gravity", kStandardGravity, path);
  s.max_duration = detail::number(j, "max_duration", path);
  s.object_stride = detail::count_or(j, "object_stride", 1, path);
  s.slide = slide_from_json(j.value("slide", json()), path + "slide.");
  detail::validated(path, [&] { s.validate(); return 0; });
  return s;
}

/// Bounds given as {"name": [lo, hi], ...} in a fixed parameter order.
inline ParamBounds bounds_from_json(const json& j, const std::vector<std::string>& names, const std::string& path) {
  std::vector<double> lo, hi;
  for (const auto& n : names) {
    const auto [a, b] = detail::range(detail::field(j, n, path), path + n);
    lo.push_back(a);
    hi.push_back(b);
  }
  return detail::validated(path, [&] { return ParamBounds(lo, hi); });
}

inline json to_json(const ParamBounds& b, const std::vector<std::string>& names) {
  json j = json::object();
  for (std::size_t i = 0; i < b.size(); ++i) j[names.at(i)] = {b.lower[i], b.upper[i]};
  return j;
}

inline json load_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

inline void save_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Episode records: <stem>.json (scenario, provenance, optional ground truth)
// next to <stem>.object.txt and <stem>.joints.txt.

struct EpisodeRecord {
  Scenario scenario;
  PoseTrajectory object;
  JointTrajectory joints;
  std::optional<ObjectPhysics> true_physics;
  std::optional<PDParams> true_pd;
  std::string provenance = "recorded";  // "synthetic" or "recorded"

  void validate() const {
    const bool synthetic = provenance == "synthetic";
    if (synthetic != (true_physics.has_value() && true_pd.has_value()) ||
        (!synthetic && (true_physics || true_pd))) {
      throw InvalidInput("EpisodeRecord: ground truth must be present exactly when provenance is synthetic");
    }
  }

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

inline void save_episode(const fs::path& dir, const std::string& stem, const EpisodeRecord& rec) {
  rec.validate();
  json j{{"format", "twin-ident episode v1"},
         {"provenance", rec.provenance},
         {"scenario", to_json(rec.scenario)},
         {"object_trajectory", stem + ".object.txt"},
         {"joint_trajectory", stem + ".joints.txt"}};
  if (rec.true_physics) j["ground_truth"] = {{"physics", to_json(*rec.true_physics)}, {"pd", to_json(*rec.true_pd)}};
  save_json(dir / (stem + ".json"), j);
  save_pose_trajectory(dir / (stem + ".object.txt"), rec.object, "table");
  save_joint_trajectory(dir / (stem + ".joints.txt"), rec.joints);
}

inline EpisodeRecord load_episode(const fs::path& path) {
  const json j = load_json(path);
  const auto dir = path.parent_path();
  auto file = [&](const char* key) {
    const auto& v = detail::field(j, key, "");
    if (!v.is_string()) throw ConfigError(key, "expected a file name");
    return dir / v.get<std::string>();
  };
  EpisodeRecord rec{scenario_from_json(detail::field(j, "scenario", ""), "scenario."),
                    load_pose_trajectory(file("object_trajectory")), load_joint_trajectory(file("joint_trajectory")),
                    std::nullopt, std::nullopt};
  rec.provenance = j.value("provenance", "recorded");
  if (j.contains("ground_truth")) {
    rec.true_physics = physics_from_json(detail::field(j["ground_truth"], "physics", "ground_truth."),
                                         "ground_truth.physics.");
    rec.true_pd = pd_from_json(detail::field(j["ground_truth"], "pd", "ground_truth."), "ground_truth.pd.");
  }
  detail::validated(path.string(), [&] { rec.validate(); return 0; });
  return rec;
}

// ---------------------------------------------------------------------------
// Run manifest

inline std::string sha256_file(const fs::path& path) {
  auto in = open_in(path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256: digest initialisation failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

#ifndef TWIN_IDENT_VERSION
#define TWIN_IDENT_VERSION "dev"
#endif

/// Records what a command read, how it was configured and what it wrote.
class RunManifest {
 public:
  RunManifest(std::string command, json config) : command_(std::move(command)), config_(std::move(config)) {}

  void add_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = seed; }
  void add_input(const fs::path& path) { inputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}}); }
  void add_output(const fs::path& path) { outputs_.push_back(path.filename().string()); }

  /// Writes manifest.json into `dir` and returns its path.
  fs::path write(const fs::path& dir) const {
    json j{{"tool", "twin-ident"}, {"version", TWIN_IDENT_VERSION}, {"command", command_},
           {"config", config_},    {"seeds", seeds_},               {"inputs", inputs_},
           {"outputs", outputs_}};
    const auto path = dir / "manifest.json";
    save_json(path, j);
    return path;
  }

 private:
  std::string command_;
  json config_;
  json seeds_ = json::object();
  json inputs_ = json::array();
  std::vector<std::string> outputs_;
};

}  // namespace twin_ident::io
