#pragma once

#include <stdexcept>
#include <string>

namespace artic {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed mesh or labeling structure (bad indices, degenerate triangles,
/// empty parts, edgeless meshes).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied parameter is outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// The LP solver gave up for numerical reasons. Distinct from an infeasible or
/// unbounded program, which are reported through LPSolution::status.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// Joint position is undetermined: no articulation signal and no regularizer.
class AmbiguousJoint : public Error {
 public:
  using Error::Error;
};

/// A mesh, JSON or CSV file could not be parsed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Instance meshes do not correspond to the template vertex-for-vertex.
class CorrespondenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace artic
