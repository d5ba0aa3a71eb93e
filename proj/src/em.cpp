#include "artic/em.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "artic/errors.hpp"

namespace artic {

void EMConfig::validate() const {
  if (initial_part_count < 1) throw ParameterError("initial part count must be >= 1");
  if (!(tau > 0.5 && tau < 1.0)) throw ParameterError("tau must lie in (0.5, 1)");
  if (!(sigma_multiple > 0.0) || !std::isfinite(sigma_multiple))
    throw ParameterError("sigma multiple must be positive");
  if (!(delta_start_fraction > 0.0 && delta_start_fraction <= 1.0))
    throw ParameterError("delta start fraction must lie in (0, 1]");
  if (!(delta_growth >= 1.0) || !std::isfinite(delta_growth))
    throw ParameterError("delta growth must be >= 1");
  if (max_iterations < 1) throw ParameterError("max iterations must be >= 1");
  if (!(epsilon > 0.0)) throw ParameterError("convergence epsilon must be positive");
  if (hop_radius < 1) throw ParameterError("hop radius must be >= 1");
}

TransformSet m_step(const RegisteredSet& set, const PartLabeling& labeling,
                    const TransformSet* previous) {
  if (labeling.vertex_count() != set.vertex_count())
    throw ParameterError("labeling size does not match the vertex count");
  labeling.validate(true);
  if (previous && (previous->part_count() != labeling.part_count ||
                   previous->instance_count() != set.instance_count()))
    throw ParameterError("previous transforms do not match the labeling");

  std::vector<std::vector<VertexId>> members(labeling.part_count);
  for (VertexId j = 0; j < labeling.vertex_count(); ++j) members[labeling.labels[j]].push_back(j);

  TransformSet out(set.instance_count(), labeling.part_count);
  for (PartId p = 0; p < labeling.part_count; ++p) {
    const PointSet src = set.template_mesh().points().gather(members[p]);
    const std::vector<double> ones(members[p].size(), 1.0);
    for (std::size_t i = 0; i < set.instance_count(); ++i) {
      const PointSet dst = set.instance(i).gather(members[p]);
      try {
        out(i, p) = fit_rigid(src, dst, ones).transform;
      } catch (const DegenerateFit& degenerate) {
        out(i, p) = degenerate.fallback().transform;
        if (previous) {
          const double kept =
              kernels::weighted_squared_residual(src, dst, ones, (*previous)(i, p).affine_map());
          if (kept < degenerate.fallback().residual) out(i, p) = (*previous)(i, p);
        }
      }
    }
  }
  return out;
}

double data_residual(const RegisteredSet& set, const TransformSet& ts, const PartLabeling& labeling) {
  double sum = 0.0;
  const PointSet& x = set.template_mesh().points();
  for (VertexId j = 0; j < set.vertex_count(); ++j)
    for (std::size_t i = 0; i < set.instance_count(); ++i)
      sum += (set.instance(i)[j] - ts(i, labeling.labels[j])(x[j])).squaredNorm();
  return sum;
}

ModelParams target_params(const RegisteredSet& set, const EMConfig& config) {
  config.validate();
  const double sigma = config.sigma_multiple * mesh_resolution(set.template_mesh());
  ModelParams params;
  params.sigma_sq = sigma * sigma;
  params.tau = config.tau;
  params.validate();
  return params;
}

PartModel initialize(const RegisteredSet& set, const EMConfig& config) {
  config.validate();
  const Mesh& mesh = set.template_mesh();
  if (config.initial_part_count > mesh.vertex_count())
    throw ParameterError("initial part count exceeds the vertex count");
  PartModel model;
  if (config.init == InitMethod::patches) {
    model.labeling = subdivide_patches(mesh, config.initial_part_count, config.seed);
  } else {
    const std::size_t J = mesh.vertex_count();
    const std::size_t N = set.instance_count();
    Eigen::MatrixXd features(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(6 * N));
    for (VertexId j = 0; j < J; ++j) {
      const auto hood = hop_neighborhood(mesh.graph(), j, config.hop_radius);
      const PointSet src = mesh.points().gather(hood);
      for (std::size_t i = 0; i < N; ++i) {
        const PointSet dst = set.instance(i).gather(hood);
        RigidTransform t;
        try {
          t = fit_rigid(src, dst).transform;
        } catch (const DegenerateFit& degenerate) {
          t = degenerate.fallback().transform;
        }
        features.block<1, 6>(j, static_cast<Eigen::Index>(6 * i)) = transform_feature(t).transpose();
      }
    }
    PartLabeling clusters;
    clusters.labels = cluster_features(features, config.initial_part_count, config.seed);
    clusters.part_count = static_cast<PartId>(config.initial_part_count);
    const TransformSet placeholder(N, config.initial_part_count);
    model.labeling = enforce_hard_contiguity(clusters, placeholder, mesh).labeling;
  }
  model.transforms = m_step(set, model.labeling);
  return model;
}

EMResult refine(const RegisteredSet& set, PartModel state, const EMConfig& config) {
  const ModelParams target = target_params(set, config);
  const Mesh& mesh = set.template_mesh();
  EMResult result;
  result.params = target;

  ModelParams params = target;
  params.sigma_sq = target.sigma_sq * config.delta_start_fraction;
  bool have_target_objective = false;
  double last_target_objective = 0.0;

  for (std::size_t iteration = 1; iteration <= config.max_iterations; ++iteration) {
    EMRecord record;
    record.iteration = iteration;
    record.sigma_sq = params.sigma_sq;
    record.delta = params.delta();
    record.at_target = params.sigma_sq >= target.sigma_sq;
    record.objective_before = objective(set, state.transforms, state.labeling, params);

    LabelingResult estep = e_step(set, state.transforms, params, config.seed + 7919 * iteration);
    record.was_integral = estep.was_integral;
    PartLabeling labels = std::move(estep.labeling);
    record.objective_after_e = objective(set, state.transforms, labels, params);
    if (!estep.was_integral && record.objective_after_e < record.objective_before) {
      labels = state.labeling;
      labels.part_count = static_cast<PartId>(state.transforms.part_count());
      record.objective_after_e = record.objective_before;
      record.kept_previous = true;
    }

    PartModel split = enforce_hard_contiguity(labels, state.transforms, mesh);
    record.objective_after_split = objective(set, split.transforms, split.labeling, params);
    split.transforms = m_step(set, split.labeling, &split.transforms);
    record.objective_after_m = objective(set, split.transforms, split.labeling, params);
    record.part_count = split.labeling.part_count;
    record.part_sizes = split.labeling.part_sizes();

    const bool unchanged = split.labeling == state.labeling;
    state = std::move(split);
    result.trace.records.push_back(record);

    if (record.at_target) {
      const double now = record.objective_after_m;
      const bool flat = have_target_objective &&
                        std::abs(now - last_target_objective) <
                            config.epsilon * std::max(std::abs(last_target_objective), 1e-300);
      if (unchanged || flat) {
        result.trace.converged = true;
        break;
      }
      have_target_objective = true;
      last_target_objective = now;
    } else {
      params.sigma_sq = std::min(params.sigma_sq * config.delta_growth, target.sigma_sq);
    }
  }
  result.labeling = std::move(state.labeling);
  result.transforms = std::move(state.transforms);
  return result;
}

EMResult run_em(const RegisteredSet& set, const EMConfig& config) {
  return refine(set, initialize(set, config), config);
}

}  // namespace artic
