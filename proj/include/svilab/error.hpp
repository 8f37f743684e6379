#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace svilab {

/// Base of every error raised by the library. The name() is stable and is
/// what the CLI writes into diagnostics files.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* name() const noexcept { return "Error"; }
};

#define SVILAB_DEFINE_ERROR(Type)                                     \
  class Type : public Error {                                         \
   public:                                                            \
    using Error::Error;                                               \
    const char* name() const noexcept override { return #Type; }      \
  };

SVILAB_DEFINE_ERROR(ConvergenceFailure)
SVILAB_DEFINE_ERROR(GrowthClassError)
SVILAB_DEFINE_ERROR(DomainTooSmall)
SVILAB_DEFINE_ERROR(ParamError)
SVILAB_DEFINE_ERROR(GridMismatch)
SVILAB_DEFINE_ERROR(ModeOutOfRange)
SVILAB_DEFINE_ERROR(StabilityViolation)
SVILAB_DEFINE_ERROR(ConfigMismatch)
SVILAB_DEFINE_ERROR(AlignmentError)
SVILAB_DEFINE_ERROR(ConfigError)

#undef SVILAB_DEFINE_ERROR

/// Raised when the implicit step fails to reduce its residual. Carries the
/// residual history (H^-1 norms) of the failed solve.
class NewtonDivergence : public Error {
 public:
  NewtonDivergence(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const char* name() const noexcept override { return "NewtonDivergence"; }
  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace svilab
