#pragma once

#include <stdexcept>
#include <string>

namespace shapeoed {

/// Root of every exception thrown by the library. `kind()` is a stable
/// machine-readable label (used by the CLI to pick exit codes).
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define SHAPEOED_ERROR_KINDS(X)                                                \
  /* numerics */ X(NotPositiveDefinite) X(NoConvergence) X(DimensionMismatch)  \
  /* mesh */ X(DegenerateInput) X(ConstraintCrossing) X(RefinementBudgetExceeded) \
  X(InvalidGeometry) X(UnknownTag) X(ParseError) X(UnsupportedVersion)          \
  /* shape */ X(MultipleLoops) X(OpenLoop) X(CentersOutOfRange) X(DisconnectedGraph) \
  /* fem */ X(MissingTag) X(MeshInversion)                                      \
  /* fim */ X(InstantOutOfRange) X(CacheMismatch)                               \
  /* oed */ X(SingularInformation) X(NonIntegerBudget) X(Infeasible) X(MaxIterations) \
  /* pipeline */ X(ConfigError) X(IoError)

#define SHAPEOED_DEFINE_ERROR(Name)                                            \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string& what) : Error(#Name, what) {}             \
  };

SHAPEOED_ERROR_KINDS(SHAPEOED_DEFINE_ERROR)

#undef SHAPEOED_DEFINE_ERROR

/// Throws the concrete error class registered under `kind`, so that context
/// can be added to a caught error without changing its type.
[[noreturn]] inline void throw_error(const std::string& kind, const std::string& what) {
#define SHAPEOED_THROW_KIND(Name) \
  if (kind == #Name) throw Name(what);
  SHAPEOED_ERROR_KINDS(SHAPEOED_THROW_KIND)
#undef SHAPEOED_THROW_KIND
  throw Error(kind, what);
}

} // namespace shapeoed
