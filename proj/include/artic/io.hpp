#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "artic/em.hpp"
#include "artic/skeleton.hpp"
#include "artic/synth.hpp"

namespace artic {

struct MeshData {
  PointSet points;
  std::vector<Triangle> triangles;
};

/// OBJ (v / f lines; polygons fan-triangulated, other directives ignored) or
/// PLY (ascii or binary_little_endian; float/double x, y, z; uchar-counted
/// int32 face lists), chosen by extension. Throws FormatError with the line
/// or byte offset of the problem, IoError if the file cannot be read.
MeshData read_mesh(const std::filesystem::path& path);

using Color = std::array<std::uint8_t, 3>;

enum class PlyEncoding { binary, ascii };

/// PLY with double coordinates and optional per-vertex colors.
void write_ply(const std::filesystem::path& path, const PointSet& points,
               const std::vector<Triangle>& triangles, PlyEncoding encoding = PlyEncoding::binary,
               const std::vector<Color>* colors = nullptr);
void write_obj(const std::filesystem::path& path, const PointSet& points,
               const std::vector<Triangle>& triangles);
/// By extension: .ply (binary) or .obj.
void write_mesh(const std::filesystem::path& path, const PointSet& points,
                const std::vector<Triangle>& triangles);

/// Template supplies the triangles; instances correspond by vertex order.
/// Instance triangles that differ from the template's are ignored with a
/// message appended to `warnings`. Throws CorrespondenceError naming both
/// files on a vertex-count mismatch.
RegisteredSet load_registered_set(const std::filesystem::path& template_path,
                                  const std::vector<std::filesystem::path>& instance_paths,
                                  std::vector<std::string>* warnings = nullptr);

/// Deterministic, well-separated color for a zero-based part id.
Color part_color(PartId part);

/// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

struct RunInfo {
  std::string template_path;
  std::vector<std::string> instance_paths;
  std::uint64_t seed = 0;
};

/// Everything stored in a model file. Part ids are one-based on disk.
struct ModelFile {
  PartLabeling labeling;
  TransformSet transforms;
  std::vector<Joint> joints;
  ModelParams params;
  /// Gamma requested by the user; empty means the per-joint default rule.
  std::optional<double> gamma;
  EMConfig config;
  bool converged = false;
  std::size_t iterations = 0;
  RunInfo meta;

  friend bool operator==(const ModelFile&, const ModelFile&);
};

/// Numbers use 17 significant digits.
std::string model_to_json(const ModelFile& model);
/// Strict: unknown or missing keys and inconsistent parts raise FormatError.
ModelFile model_from_json(const std::string& text);
ModelFile read_model(const std::filesystem::path& path);

std::string ground_truth_to_json(const GroundTruth& truth, const SynthSpec& spec);
/// Strict like model_from_json.
GroundTruth ground_truth_from_json(const std::string& text, SynthSpec* spec = nullptr);
GroundTruth read_ground_truth(const std::filesystem::path& path, SynthSpec* spec = nullptr);

/// iteration, delta, objective, part_count, was_integral; one row per
/// iteration.
std::string trace_to_csv(const EMTrace& trace);

struct ExportOptions {
  std::filesystem::path out_dir;
  bool colored_mesh = false;
  bool trace_csv = false;
};

ModelFile make_model_file(const ArticulatedModel& model, const EMResult& em,
                          const EMConfig& config, std::optional<double> gamma, RunInfo meta);

/// model.json always; colored.ply and trace.csv when requested.
void export_model(const ModelFile& model, const Mesh& template_mesh, const EMTrace& trace,
                  const ExportOptions& options);

/// Number formatting shared by the writers: 17 significant digits.
std::string format_double(double value);

}  // namespace artic
