#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include "hjkit/types.hpp"

namespace hjkit {

/// Base of all numerical failures raised by the library. `name()` is the
/// stable identifier the CLI reports (e.g. "InversionFailure").
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& message)
      : std::runtime_error(name + ": " + message), name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define HJKIT_DEFINE_ERROR(Type)                                              \
  class Type : public Error {                                                 \
   public:                                                                    \
    explicit Type(const std::string& message) : Error(#Type, message) {}      \
  }

HJKIT_DEFINE_ERROR(BadCurve);
HJKIT_DEFINE_ERROR(DegenerateLagrangian);
HJKIT_DEFINE_ERROR(BoundaryPoint);
HJKIT_DEFINE_ERROR(BadParameterDirection);
HJKIT_DEFINE_ERROR(CrossingNotFound);
HJKIT_DEFINE_ERROR(NotTangent);
HJKIT_DEFINE_ERROR(NotEquidistantFamily);
HJKIT_DEFINE_ERROR(StripFailure);
HJKIT_DEFINE_ERROR(OutOfSheet);
HJKIT_DEFINE_ERROR(CausticSuspected);
HJKIT_DEFINE_ERROR(NoConnection);
HJKIT_DEFINE_ERROR(AmbiguousConnection);
HJKIT_DEFINE_ERROR(RecoveryFailure);
HJKIT_DEFINE_ERROR(SamplingTooCoarse);
HJKIT_DEFINE_ERROR(StationaryFront);
HJKIT_DEFINE_ERROR(UnstableStep);
HJKIT_DEFINE_ERROR(NodeOnPath);
HJKIT_DEFINE_ERROR(NodeEncounter);

#undef HJKIT_DEFINE_ERROR

/// Newton inversion of p = L_q̇ did not converge.
class InversionFailure : public Error {
 public:
  InversionFailure(const std::string& message, double residual)
      : Error("InversionFailure", message), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A curve left its domain. Carries whatever was integrated before the exit.
class DomainEscape : public Error {
 public:
  explicit DomainEscape(const std::string& message, ExtremalCurve partial = {})
      : Error("DomainEscape", message), partial_(std::move(partial)) {}
  const ExtremalCurve& partial() const noexcept { return partial_; }

 private:
  ExtremalCurve partial_;
};

/// A ray stopped advancing along the optical axis.
class ParaxialViolation : public Error {
 public:
  explicit ParaxialViolation(const std::string& message, ExtremalCurve partial = {})
      : Error("ParaxialViolation", message), partial_(std::move(partial)) {}
  const ExtremalCurve& partial() const noexcept { return partial_; }

 private:
  ExtremalCurve partial_;
};

}  // namespace hjkit
