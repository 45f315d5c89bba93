// twin-ident command-line entry point.
//
// Exit codes: 0 success, 1 usage / input error, 2 numeric failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "twin_ident.hpp"

namespace {

namespace cli = twin_ident::cli;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<std::size_t> threads;

  cli::CommandOptions options() const { return {config, seed, out_dir, threads}; }
};

void add_common(CLI::App* app, Flags& f, bool config_required) {
  auto* c = app->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  if (config_required) c->required();
  app->add_option("--seed", f.seed, "override the random seed");
  app->add_option("--out-dir", f.out_dir, "output directory")->capture_default_str();
  app->add_option("--threads", f.threads, "worker threads for objective evaluation")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twin-ident: simulator-in-the-loop identification of object physics, robot PD gains and camera viewpoint"};
  app.set_version_flag("--version", std::string(TWIN_IDENT_VERSION));
  app.require_subcommand(1);

  Flags flags;
  auto* synth = app.add_subcommand("synth", "generate synthetic episodes or viewpoint references with ground truth");
  add_common(synth, flags, true);
  auto* obj = app.add_subcommand("identify-object", "identify friction, mass and COM offset from object trajectories");
  add_common(obj, flags, true);
  auto* robot = app.add_subcommand("identify-robot", "identify per-joint PD parameters from joint trajectories");
  add_common(robot, flags, true);
  auto* view = app.add_subcommand("align-viewpoint", "refine a coarse camera pose against reference masks");
  add_common(view, flags, true);
  auto* sim = app.add_subcommand("simulate", "run one Control-Hit-Slide episode with given parameters");
  add_common(sim, flags, true);

  cli::EvalOptions eval;
  std::string real, simulated, mesh;
  bool quiet = false;
  auto* ev = app.add_subcommand("eval", "ADD / ADD-S between a real and a simulated object trajectory");
  add_common(ev, flags, false);
  ev->add_option("--real", real, "real object trajectory")->check(CLI::ExistingFile);
  ev->add_option("--sim", simulated, "simulated object trajectory")->check(CLI::ExistingFile);
  ev->add_option("--mesh", mesh, "object mesh (OBJ)")->check(CLI::ExistingFile);
  ev->add_option("--points", eval.points, "model points sampled from the mesh")->capture_default_str();
  ev->add_option("--point-seed", eval.point_seed, "surface sampling seed")->capture_default_str();
  ev->add_flag("--quiet", quiet, "print only the mean line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const auto opts = flags.options();
    if (synth->parsed()) {
      cli::cmd_synth(opts, std::cout);
    } else if (obj->parsed()) {
      cli::cmd_identify_object(opts, std::cout);
    } else if (robot->parsed()) {
      cli::cmd_identify_robot(opts, std::cout);
    } else if (view->parsed()) {
      cli::cmd_align_viewpoint(opts, std::cout);
    } else if (sim->parsed()) {
      cli::cmd_simulate(opts, std::cout);
    } else if (ev->parsed()) {
      if (!flags.config.empty()) {
        const auto cfg = twin_ident::io::load_json(flags.config);
        const auto base = opts.config.parent_path();
        auto from_cfg = [&](std::string& dst, const char* key) {
          if (dst.empty() && cfg.contains(key) && cfg[key].is_string()) {
            dst = cli::detail::resolve(base, cfg[key].get<std::string>()).string();
          }
        };
        from_cfg(real, "real");
        from_cfg(simulated, "sim");
        from_cfg(mesh, "mesh");
        eval.points = twin_ident::io::detail::count_or(cfg, "points", eval.points, "");
        eval.point_seed = twin_ident::io::detail::count_or(cfg, "point_seed", eval.point_seed, "");
      }
      if (real.empty() || simulated.empty() || mesh.empty()) {
        std::cerr << "eval: --real, --sim and --mesh are required (directly or via --config)\n";
        return 1;
      }
      eval.real = real;
      eval.sim = simulated;
      eval.mesh = mesh;
      eval.per_step = !quiet;
      cli::cmd_eval(eval, opts, std::cout);
    }
  } catch (const twin_ident::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const twin_ident::InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
