// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fail.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "artic/em.hpp"
#include "artic/eval.hpp"
#include "artic/io.hpp"
#include "artic/lp.hpp"
#include "artic/rounding.hpp"
#include "artic/skeleton.hpp"
#include "artic/synth.hpp"
#include "../support/fixtures.hpp"
#include "../support/labeling_oracle.hpp"
#include "../support/lp_oracle.hpp"
#include "../support/rigid_oracle.hpp"
#include "../support/temp_dir.hpp"

#ifndef ARTICULATE_PATH
#error "ARTICULATE_PATH must name the CLI binary"
#endif

using namespace artic;
using namespace artic::testing;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and thresholds.
constexpr double exact_tol = 1e-9;             // 1: relative, brute-force maximum
constexpr int integral_required = 95;          // 2: of 100 solves
constexpr double rotation_tol = 1e-7;          // 3: radians
constexpr double translation_tol = 1e-9;       // 3: times scale
constexpr double oracle_band = 0.02;           // 3: relative to the grid oracle
constexpr double monotone_slack = 1e-9;        // 4: relative
constexpr double contiguity_tol = 1e-12;       // 4: relative
constexpr double accuracy_required = 0.95;     // 5, 10
constexpr double joint_tol = 0.05;             // 5, 10: segment lengths
constexpr double run_seconds = 120.0;          // 5
constexpr double hinge_residual_tol = 1e-12;   // 8
constexpr double grid_tol = 2e-3;              // 8
constexpr double lp_tol = 1e-6;                // 9
constexpr double binomial_sigmas = 3.0;        // 9

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool near(double a, double b, double rel) { return std::abs(a - b) <= rel * (1.0 + std::abs(b)); }

struct Verdict {
  bool pass = true;
  std::ostringstream note;
  void require(bool ok, const std::string& why) {
    if (!ok) {
      if (pass) note << " failed: ";
      else note << "; ";
      note << why;
      pass = false;
    }
  }
};

int failures = 0;
std::map<int, std::string> lines;
const Clock::time_point program_start = Clock::now();

// Criterion 4 reads the runs of 5 to 7, so lines are collected and printed in
// order at the end; progress goes to stderr.
void report(int criterion, const std::string& title, Verdict& v, const std::string& summary) {
  lines[criterion] = std::string(v.pass ? "PASS" : "FAIL") + " criterion " + std::to_string(criterion) + ": " +
                     title + " (" + summary + ")" + v.note.str();
  std::cerr << "done criterion " << criterion << " at " << seconds_since(program_start) << " s" << std::endl;
  if (!v.pass) ++failures;
}

SynthSpec chain_spec(std::size_t parts, double noise, std::uint64_t seed) {
  SynthSpec spec;
  spec.part_count = parts;
  spec.pose_count = 5;
  spec.vertices_per_segment = 500;
  spec.angle_span = 60.0 * std::numbers::pi / 180.0;
  spec.noise_sigma = noise;
  spec.noise_relative = true;
  spec.seed = seed;
  return spec;
}

struct Tracked {
  std::string name;
  EMTrace trace;
};
std::vector<Tracked> tracked_runs;

// Non-decreasing objective within each stretch; contiguity leaves it alone.
void check_trace(const Tracked& run, Verdict& v) {
  for (const EMRecord& r : run.trace.records) {
    const double scale = std::abs(r.objective_before);
    v.require(r.objective_after_e >= r.objective_before - monotone_slack * scale,
              run.name + " iteration " + std::to_string(r.iteration) + " E-step decreased");
    v.require(r.objective_after_m >= r.objective_after_split - monotone_slack * scale,
              run.name + " iteration " + std::to_string(r.iteration) + " M-step decreased");
    v.require(std::abs(r.objective_after_split - r.objective_after_e) <=
                  contiguity_tol * std::abs(r.objective_after_e),
              run.name + " iteration " + std::to_string(r.iteration) + " contiguity changed the objective");
  }
}

struct Recovery {
  EMResult em;
  EvalReport report;
  double seconds = 0.0;
};

Recovery recover(const SynthResult& fixture, std::size_t initial_parts, const std::string& name) {
  EMConfig config;
  config.initial_part_count = initial_parts;
  const auto start = Clock::now();
  Recovery out;
  out.em = run_em(fixture.set, config);
  const ArticulatedModel model = build_skeleton(fixture.set, out.em.labeling, out.em.transforms, -1.0);
  out.seconds = seconds_since(start);
  const ModelFile file = make_model_file(model, out.em, config, std::nullopt, {"", {}, config.seed});
  out.report = evaluate(file, fixture.truth);
  tracked_runs.push_back({name, out.em.trace});
  return out;
}

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

// ----------------------------------------------------------------------------

void criterion_1() {
  Verdict v;
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> vertices(2, 10), labels(2, 3);
  std::uniform_real_distribution<double> separation(0.1, 3.0);
  int integral = 0, exact = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t J = vertices(rng), P = labels(rng);
    const Graph g = trial % 2 ? ring_graph(std::max<std::size_t>(J, 3)) : path_graph(J);
    const std::size_t n = g.vertex_count();
    const double s = separation(rng);
    const Eigen::MatrixXd c = random_costs(rng, n, P, 4.0);
    const LabelingResult r = solve_uniform_labeling(c, g, s, static_cast<std::uint64_t>(trial));
    if (!r.was_integral) continue;
    ++integral;
    const BruteForce bf = brute_force_labeling(c, g, s);
    const double attained = labeling_value(c, g, r.labeling.labels, s);
    if (near(attained, bf.best, exact_tol)) ++exact;
    else v.require(false, "instance " + std::to_string(trial) + " below the brute-force maximum");
  }
  const double secs = seconds_since(start);
  v.require(secs < 30.0, "took " + fmt(secs) + " s");
  report(1, "E-step exactness", v,
         std::to_string(exact) + "/" + std::to_string(integral) + " integral solves optimal, " + fmt(secs, 3) +
             " s");
}

void criterion_2() {
  Verdict v;
  int integral = 0, fractional_checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SynthSpec spec = chain_spec(3, 0.01, 100 + seed);
    spec.vertices_per_segment = 200;
    const SynthResult fx = generate(spec);
    EMConfig config;
    config.seed = seed;
    const PartModel start = initialize(fx.set, config);
    const ModelParams params = target_params(fx.set, config);
    const LabelingResult r = e_step(fx.set, start.transforms, params, seed);
    if (r.was_integral) {
      ++integral;
      continue;
    }
    // Fractional cases must still give a monotone run.
    ++fractional_checked;
    Tracked run{"fractional seed " + std::to_string(seed), run_em(fx.set, config).trace};
    check_trace(run, v);
  }
  v.require(integral >= integral_required, "only " + std::to_string(integral) + " integral");
  report(2, "integrality rate", v,
         std::to_string(integral) + "/100 integral, " + std::to_string(fractional_checked) +
             " fractional runs checked");
}

void criterion_3() {
  Verdict v;
  const auto start = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> log_scale(-2.0, 2.0);
  double worst_angle = 0.0, worst_translation = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double scale = std::pow(10.0, log_scale(rng));
    const RigidTransform truth = random_transform(rng, scale);
    const PointSet src = random_points(rng, 4 + trial % 40, scale);
    const RigidFit fit = fit_rigid(src, transformed(src, truth));
    worst_angle = std::max(worst_angle, rotation_angle_between(fit.transform, truth));
    worst_translation =
        std::max(worst_translation, (fit.transform.translation() - truth.translation()).norm() / scale);
  }
  v.require(worst_angle <= rotation_tol, "rotation error " + fmt(worst_angle));
  v.require(worst_translation <= translation_tol, "translation error " + fmt(worst_translation));

  std::normal_distribution<double> noise(0.0, 0.1);
  double worst_band = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const PointSet src = random_points(rng, 10, 1.0);
    PointSet dst = transformed(src, random_transform(rng));
    for (std::size_t j = 0; j < dst.size(); ++j) dst.set(j, dst[j] + Eigen::Vector3d(noise(rng), noise(rng), noise(rng)));
    const double oracle = GridRotationOracle(src, dst).best();
    const double fit = fit_rigid(src, dst).residual;
    worst_band = std::max(worst_band, std::abs(fit - oracle) / oracle);
  }
  v.require(worst_band <= oracle_band, "oracle mismatch " + fmt(worst_band));
  const double secs = seconds_since(start);
  v.require(secs < 10.0, "took " + fmt(secs) + " s");
  report(3, "rigid-fit oracle", v,
         "max angle " + fmt(worst_angle) + " rad, max translation " + fmt(worst_translation) +
             " x scale, max oracle gap " + fmt(worst_band) + ", " + fmt(secs, 3) + " s");
}

struct Criterion5 {
  Recovery k3, k5;
};

bool recovered(const Recovery& r, std::size_t parts, Verdict& v, const std::string& name) {
  const bool ok = r.em.labeling.part_count == parts && r.report.label_accuracy >= accuracy_required &&
                  r.report.max_joint_error <= joint_tol && r.seconds <= run_seconds;
  v.require(r.em.labeling.part_count == parts, name + " found " + std::to_string(r.em.labeling.part_count) + " parts");
  v.require(r.report.label_accuracy >= accuracy_required, name + " accuracy " + fmt(r.report.label_accuracy));
  v.require(r.report.max_joint_error <= joint_tol, name + " joint error " + fmt(r.report.max_joint_error));
  v.require(r.seconds <= run_seconds, name + " took " + fmt(r.seconds) + " s");
  return ok;
}

Criterion5 criterion_5() {
  Verdict v;
  Criterion5 out;
  const SynthSpec s3 = chain_spec(3, 0.01, 7);
  out.k3 = recover(generate(s3), 10, "K=3");
  recovered(out.k3, 3, v, "K=3");
  const SynthSpec s5 = chain_spec(5, 0.01, 7);
  out.k5 = recover(generate(s5), 16, "K=5");
  recovered(out.k5, 5, v, "K=5");
  auto line = [](const char* name, const Recovery& r) {
    return std::string(name) + ": " + std::to_string(r.em.labeling.part_count) + " parts, accuracy " +
           fmt(r.report.label_accuracy) + ", joint error " + fmt(r.report.max_joint_error) + ", " +
           fmt(r.seconds, 3) + " s";
  };
  report(5, "end-to-end recovery", v, line("K=3", out.k3) + "; " + line("K=5", out.k5));
  return out;
}

void criterion_6(const Criterion5& c5) {
  Verdict v;
  const SynthResult fx = generate(chain_spec(3, 0.01, 7));
  std::map<std::size_t, std::size_t> found;
  found[10] = c5.k3.em.labeling.part_count;
  for (std::size_t p : {2, 3, 4, 6, 8, 12})
    found[p] = recover(fx, p, "P=" + std::to_string(p)).em.labeling.part_count;
  for (std::size_t p : {4, 6, 8, 12})
    v.require(found[p] == found[10], "P=" + std::to_string(p) + " gave " + std::to_string(found[p]));
  for (std::size_t p : {2, 3})
    v.require(found[p] <= 3, "P=" + std::to_string(p) + " gave " + std::to_string(found[p]));
  std::string summary;
  for (const auto& [p, k] : found) summary += (summary.empty() ? "" : ", ") + std::to_string(p) + "->" + std::to_string(k);
  report(6, "part-count saturation", v, summary);
}

void criterion_4() {
  Verdict v;
  std::size_t iterations = 0;
  for (const Tracked& run : tracked_runs) {
    check_trace(run, v);
    iterations += run.trace.records.size();
  }
  report(4, "EM monotonicity", v,
         std::to_string(tracked_runs.size()) + " runs, " + std::to_string(iterations) + " iterations");
}

void criterion_7() {
  Verdict v;
  const SynthSpec spec = chain_spec(2, 0.05, 7);
  const SynthResult fx = generate(spec);
  EMConfig annealed;
  const EMResult a = run_em(fx.set, annealed);
  EMConfig direct = annealed;
  direct.delta_start_fraction = 1.0;
  const EMResult d = run_em(fx.set, direct);
  tracked_runs.push_back({"annealed", a.trace});
  tracked_runs.push_back({"direct", d.trace});
  const std::size_t a_first = a.trace.records.front().part_count;
  const std::size_t d_first = d.trace.records.front().part_count;
  v.require(d_first >= a_first, "direct first iteration has fewer parts");
  v.require(a.trace.converged, "annealed run did not converge");
  v.require(a.labeling.part_count == 2, "annealed run ended with " + std::to_string(a.labeling.part_count) + " parts");
  report(7, "annealing behavior", v,
         "first iteration parts: direct " + std::to_string(d_first) + ", annealed " + std::to_string(a_first) +
             "; annealed final " + std::to_string(a.labeling.part_count) + " after " +
             std::to_string(a.trace.records.size()) + " iterations");
}

void criterion_8() {
  Verdict v;
  std::mt19937_64 rng(8);
  double worst_residual = 0.0, worst_grid = 0.0;
  bool all_flagged = true;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d pivot = random_vector(rng);
    const Eigen::Vector3d axis = random_vector(rng).normalized();
    const RigidTransform base = random_transform(rng);
    std::uniform_real_distribution<double> angle(-1.0, 1.0);
    TransformSet ts(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
      ts(i, 0) = base;
      ts(i, 1) = base * RigidTransform::about_pivot(axis, angle(rng), pivot);
    }
    std::vector<Eigen::Vector3d> centroids;
    for (std::size_t i = 0; i < 4; ++i) centroids.push_back(ts(i, 0)(pivot + random_vector(rng, 0.2)));

    const JointEstimate hinge = estimate_joint(0, 1, ts, centroids, 0.0);
    all_flagged = all_flagged && hinge.ambiguous;
    worst_residual = std::max(worst_residual, joint_objective(0, 1, ts, centroids, 0.0, hinge.joint.position));

    const double gamma = 0.1;
    const JointEstimate reg = estimate_joint(0, 1, ts, centroids, gamma);
    auto f = [&](const Eigen::Vector3d& y) { return joint_objective(0, 1, ts, centroids, gamma, y); };
    // Coarse-to-fine cubic grid search around the origin.
    Eigen::Vector3d best = Eigen::Vector3d::Zero();
    double step = 0.1, radius = 3.0;
    for (int level = 0; level < 3; ++level) {
      const Eigen::Vector3d centre = best;
      double best_value = f(best);
      const int n = static_cast<int>(std::round(radius / step));
      for (int a = -n; a <= n; ++a)
        for (int b = -n; b <= n; ++b)
          for (int c = -n; c <= n; ++c) {
            const Eigen::Vector3d y = centre + step * Eigen::Vector3d(a, b, c);
            if (const double value = f(y); value < best_value) {
              best_value = value;
              best = y;
            }
          }
      radius = 2 * step;
      step /= 10;
    }
    worst_grid = std::max(worst_grid, (reg.joint.position - best).norm());
    v.require(!reg.ambiguous, "regularized joint flagged ambiguous");
  }
  v.require(all_flagged, "a hinge was not flagged ambiguous");
  v.require(worst_residual <= hinge_residual_tol, "hinge residual " + fmt(worst_residual));
  v.require(worst_grid <= grid_tol, "grid distance " + fmt(worst_grid));
  report(8, "joint degeneracy", v,
         "max hinge residual " + fmt(worst_residual) + ", max distance to grid optimum " + fmt(worst_grid));
}

void criterion_9() {
  Verdict v;
  std::mt19937_64 rng(9);
  int feasible = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const LinearProgram lp = random_small_lp(rng);
    const auto expected = enumerate_vertices(lp);
    const LPSolution sol = solve_lp(lp);
    if (!expected) {
      v.require(sol.status == LPStatus::infeasible, "program " + std::to_string(trial) + " should be infeasible");
      continue;
    }
    ++feasible;
    v.require(sol.status == LPStatus::optimal, "program " + std::to_string(trial) + " not solved");
    const double err = std::abs(sol.objective_value - *expected) / (1.0 + std::abs(*expected));
    worst = std::max(worst, err);
  }
  v.require(worst <= lp_tol, "LP error " + fmt(worst));

  Eigen::MatrixXd alpha(4, 3);
  alpha << 0.2, 0.5, 0.3, 0.0, 0.25, 0.75, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0.9, 0.05, 0.05;
  const int trials = 100000;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(4, 3);
  for (int seed = 0; seed < trials; ++seed) {
    const auto l = kt_round(alpha, static_cast<std::uint64_t>(seed));
    for (int j = 0; j < 4; ++j) counts(j, l[j]) += 1.0;
  }
  double worst_sigmas = 0.0;
  for (int j = 0; j < 4; ++j)
    for (int p = 0; p < 3; ++p) {
      const double a = alpha(j, p), sd = std::sqrt(a * (1 - a) / trials);
      const double dev = std::abs(counts(j, p) / trials - a);
      if (sd > 0) worst_sigmas = std::max(worst_sigmas, dev / sd);
      else v.require(dev == 0.0, "deterministic marginal violated");
    }
  v.require(worst_sigmas <= binomial_sigmas, "marginal off by " + fmt(worst_sigmas) + " sigma");
  report(9, "LP solver and rounding", v,
         std::to_string(feasible) + "/500 feasible, max LP error " + fmt(worst) + ", max marginal deviation " +
             fmt(worst_sigmas, 3) + " sigma");
}

int articulate(const std::string& args, std::string* output = nullptr) {
  const std::string command = std::string("'") + ARTICULATE_PATH + "' " + args + " 2>&1";
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return -1;
  std::string text;
  char buffer[4096];
  while (const std::size_t n = std::fread(buffer, 1, sizeof buffer, pipe)) text.append(buffer, n);
  const int status = pclose(pipe);
  if (output) *output = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_10() {
  Verdict v;
  TempDir dir;
  auto q = [](const std::filesystem::path& p) { return "'" + p.string() + "'"; };
  std::string out;
  int code = articulate("synth --parts 3 --poses 5 --noise 0.01 --seed 7 --vertices-per-segment 500 --out " +
                        q(dir / "fix"), &out);
  v.require(code == 0, "synth exited " + std::to_string(code));
  std::string instances;
  for (int i = 1; i <= 5; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "instance_%03d.ply", i);
    instances += " " + q(dir / "fix" / name);
  }
  const auto start = Clock::now();
  code = articulate("fit --template " + q(dir / "fix/template.ply") + " --instances" + instances +
                    " --parts 10 --emit-trace --emit-colored --quiet --out " + q(dir / "out"), &out);
  const double secs = seconds_since(start);
  v.require(code == 0, "fit exited " + std::to_string(code) + ": " + out);
  code = articulate("eval --model " + q(dir / "out/model.json") + " --truth " + q(dir / "fix/truth.json"), &out);
  v.require(code == 0, "eval exited " + std::to_string(code));

  double accuracy = 0.0, joint_error = INFINITY;
  bool count_match = false;
  try {
    const auto report_json = nlohmann::json::parse(out);
    accuracy = report_json.at("label_accuracy").get<double>();
    count_match = report_json.at("part_count_match").get<bool>();
    if (!report_json.at("max_joint_error").is_null()) joint_error = report_json.at("max_joint_error").get<double>();
  } catch (const std::exception& e) {
    v.require(false, std::string("unreadable report: ") + e.what());
  }
  v.require(count_match, "part count mismatch");
  v.require(accuracy >= accuracy_required, "accuracy " + fmt(accuracy));
  v.require(joint_error <= joint_tol, "joint error " + fmt(joint_error));
  v.require(secs <= run_seconds, "fit took " + fmt(secs) + " s");

  // Files reload to identical values and re-serialize byte for byte.
  try {
    const std::string model_text = slurp(dir / "out/model.json");
    v.require(model_to_json(model_from_json(model_text)) == model_text, "model JSON does not round-trip");
    v.require(read_model(dir / "out/model.json") == model_from_json(model_text), "model reload differs");
    SynthSpec spec;
    const std::string truth_text = slurp(dir / "fix/truth.json");
    const GroundTruth truth = ground_truth_from_json(truth_text, &spec);
    v.require(ground_truth_to_json(truth, spec) == truth_text, "truth JSON does not round-trip");
    const MeshData templ = read_mesh(dir / "fix/template.ply");
    write_mesh(dir / "copy.ply", templ.points, templ.triangles);
    const MeshData copy = read_mesh(dir / "copy.ply");
    v.require(copy.points == templ.points && copy.triangles == templ.triangles, "PLY does not round-trip");
    const std::string trace = slurp(dir / "out/trace.csv");
    const auto rows = static_cast<std::size_t>(std::count(trace.begin(), trace.end(), '\n'));
    v.require(rows == read_model(dir / "out/model.json").iterations + 1, "trace rows do not match iterations");
  } catch (const std::exception& e) {
    v.require(false, std::string("reload failed: ") + e.what());
  }
  report(10, "CLI round-trip", v,
         "accuracy " + fmt(accuracy) + ", joint error " + fmt(joint_error) + ", fit " + fmt(secs, 3) + " s");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  const Criterion5 c5 = criterion_5();
  criterion_6(c5);
  criterion_7();
  criterion_4();
  criterion_8();
  criterion_9();
  criterion_10();
  for (const auto& [criterion, line] : lines) std::cout << line << "\n";
  std::cout << (failures ? "FAILED " + std::to_string(failures) + " criteria" : "all criteria passed")
            << std::endl;
  return failures ? 1 : 0;
}
