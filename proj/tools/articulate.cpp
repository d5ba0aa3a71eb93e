#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "artic/errors.hpp"
#include "artic/eval.hpp"
#include "artic/io.hpp"
#include "artic/kernels.hpp"

namespace fs = std::filesystem;
using namespace artic;

namespace {

enum Exit { ok = 0, usage = 1, input = 2, numerical = 3 };

struct FitArgs {
  std::string template_path;
  std::vector<std::string> instances;
  std::size_t parts = 10;
  std::string init = "patches";
  double tau = 0.9;
  double sigma_mult = 1.0;
  double delta_start_frac = 0.25;
  double delta_growth = 1.5;
  std::optional<double> gamma;
  std::size_t max_iters = 50;
  unsigned hop_radius = default_hop_radius;
  std::uint64_t seed = 0;
  std::string out;
  bool emit_colored = false;
  bool emit_trace = false;
  bool quiet = false;
};

struct SynthArgs {
  std::size_t parts = 3;
  std::size_t poses = 5;
  std::string topology = "chain";
  double noise = 0.0;
  double segment_length = 1.0;
  double radius = 0.15;
  std::size_t vertices_per_segment = 500;
  double angle_span_deg = 60.0;
  std::uint64_t seed = 0;
  std::string format = "ply";
  std::string out;
};

struct EvalArgs {
  std::string model;
  std::string truth;
  std::string out;
};

bool same_path(const fs::path& a, const fs::path& b) {
  std::error_code ec;
  const auto ca = fs::weakly_canonical(a, ec);
  const auto cb = fs::weakly_canonical(b, ec);
  return ca == cb;
}

int run_fit(const FitArgs& args) {
  for (const auto& p : args.instances)
    if (same_path(p, args.out)) throw ParameterError("instance path " + p + " is the output directory");
  if (same_path(args.template_path, args.out)) throw ParameterError("template path is the output directory");

  EMConfig config;
  config.initial_part_count = args.parts;
  config.init = args.init == "cluster" ? InitMethod::cluster : InitMethod::patches;
  config.tau = args.tau;
  config.sigma_multiple = args.sigma_mult;
  config.delta_start_fraction = args.delta_start_frac;
  config.delta_growth = args.delta_growth;
  config.max_iterations = args.max_iters;
  config.hop_radius = args.hop_radius;
  config.seed = args.seed;
  config.validate();
  if (args.gamma && !(*args.gamma >= 0.0)) throw ParameterError("gamma must be >= 0");

  std::vector<fs::path> instance_paths(args.instances.begin(), args.instances.end());
  std::vector<std::string> warnings;
  const RegisteredSet set = load_registered_set(args.template_path, instance_paths, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  const EMResult em = run_em(set, config);
  const ArticulatedModel model =
      build_skeleton(set, em.labeling, em.transforms, args.gamma ? *args.gamma : -1.0);

  RunInfo meta{args.template_path, args.instances, args.seed};
  const ModelFile file = make_model_file(model, em, config, args.gamma, meta);
  export_model(file, set.template_mesh(), em.trace, {args.out, args.emit_colored, args.emit_trace});
  if (!args.quiet) {
    std::cout << "parts: " << model.labeling.part_count << "\n"
              << "joints: " << model.joints.size() << "\n"
              << "iterations: " << em.trace.records.size()
              << (em.trace.converged ? " (converged)" : " (not converged)") << "\n"
              << "wrote " << (fs::path(args.out) / "model.json").string() << "\n";
  }
  return ok;
}

int run_synth(const SynthArgs& args) {
  SynthSpec spec;
  spec.part_count = args.parts;
  spec.pose_count = args.poses;
  spec.topology = args.topology == "star" ? Topology::star : Topology::chain;
  spec.segment_length = args.segment_length;
  spec.radius = args.radius;
  spec.vertices_per_segment = args.vertices_per_segment;
  spec.angle_span = args.angle_span_deg * std::numbers::pi / 180.0;
  spec.noise_sigma = args.noise;
  spec.noise_relative = true;
  spec.seed = args.seed;
  const SynthResult result = generate(spec);

  const fs::path out(args.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  const std::string ext = "." + args.format;
  const Mesh& mesh = result.set.template_mesh();
  write_mesh(out / ("template" + ext), mesh.points(), mesh.triangles());
  for (std::size_t i = 0; i < result.set.instance_count(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "instance_%03zu", i + 1);
    write_mesh(out / (name + ext), result.set.instance(i), mesh.triangles());
  }
  write_file_atomic(out / "truth.json", ground_truth_to_json(result.truth, spec));
  std::cout << "vertices: " << mesh.vertex_count() << "\n"
            << "resolution: " << format_double(mesh_resolution(mesh)) << "\n"
            << "wrote " << result.set.instance_count() << " instances to " << out.string() << "\n";
  return ok;
}

int run_eval(const EvalArgs& args) {
  const ModelFile model = read_model(args.model);
  const GroundTruth truth = read_ground_truth(args.truth);
  const EvalReport report = evaluate(model, truth);
  const std::string json = report_to_json(report);
  if (!args.out.empty()) write_file_atomic(args.out, json);
  std::cout << json;
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recover rigid parts, per-pose transforms and joints from corresponded meshes."};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an articulated model to a template and instances");
  fit_cmd->add_option("--template", fit.template_path, "Template mesh (.ply or .obj)")->required();
  fit_cmd->add_option("--instances", fit.instances, "Instance meshes, corresponded by vertex order")
      ->required();
  fit_cmd->add_option("--parts", fit.parts, "Initial part count")->capture_default_str();
  fit_cmd->add_option("--init", fit.init, "Initialization")
      ->check(CLI::IsMember({"patches", "cluster"}))
      ->capture_default_str();
  fit_cmd->add_option("--tau", fit.tau, "Edge agreement probability in (0.5, 1)")->capture_default_str();
  fit_cmd->add_option("--sigma-mult", fit.sigma_mult, "sigma as a multiple of mesh resolution")
      ->capture_default_str();
  fit_cmd->add_option("--delta-start-frac", fit.delta_start_frac, "Starting fraction of target delta")
      ->capture_default_str();
  fit_cmd->add_option("--delta-growth", fit.delta_growth, "Delta growth per iteration")
      ->capture_default_str();
  fit_cmd->add_option("--gamma", fit.gamma, "Joint regularization weight (default: per-joint rule)");
  fit_cmd->add_option("--max-iters", fit.max_iters, "Maximum EM iterations")->capture_default_str();
  fit_cmd->add_option("--hop-radius", fit.hop_radius, "Neighborhood radius for cluster init")
      ->capture_default_str();
  fit_cmd->add_option("--seed", fit.seed, "Random seed")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "Output directory")->required();
  fit_cmd->add_flag("--emit-colored", fit.emit_colored, "Write colored.ply with per-part colors");
  fit_cmd->add_flag("--emit-trace", fit.emit_trace, "Write trace.csv");
  fit_cmd->add_flag("--quiet", fit.quiet, "No summary on stdout");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic articulated fixture");
  synth_cmd->add_option("--parts", synth.parts, "Number of rigid segments")->capture_default_str();
  synth_cmd->add_option("--poses", synth.poses, "Number of instance poses")->capture_default_str();
  synth_cmd->add_option("--topology", synth.topology, "Segment layout")
      ->check(CLI::IsMember({"chain", "star"}))
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "Noise sigma as a multiple of mesh resolution")
      ->capture_default_str();
  synth_cmd->add_option("--segment-length", synth.segment_length, "Segment length")->capture_default_str();
  synth_cmd->add_option("--radius", synth.radius, "Segment half-width")->capture_default_str();
  synth_cmd->add_option("--vertices-per-segment", synth.vertices_per_segment, "Tessellation density")
      ->capture_default_str();
  synth_cmd->add_option("--angle-span", synth.angle_span_deg, "Hinge sweep across poses, degrees")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--format", synth.format, "Mesh format")
      ->check(CLI::IsMember({"ply", "obj"}))
      ->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a model against synthetic ground truth");
  eval_cmd->add_option("--model", eval.model, "model.json from fit")->required();
  eval_cmd->add_option("--truth", eval.truth, "truth.json from synth")->required();
  eval_cmd->add_option("--out", eval.out, "Also write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return ok;
    const auto parsed = app.get_subcommands();
    std::cerr << "\n" << (parsed.empty() ? app.help() : parsed.front()->help());
    return usage;
  }

  try {
    if (*fit_cmd) return run_fit(fit);
    if (*synth_cmd) return run_synth(synth);
    if (*eval_cmd) return run_eval(eval);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const SolverFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return numerical;
  } catch (const AmbiguousJoint& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return numerical;
  } catch (const Error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return input;
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return input;
  }
  return usage;
}
