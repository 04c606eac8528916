#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace beable {

/// Error categories raised by the library. The CLI maps these onto exit codes.
enum class ErrorKind {
  Size,
  Shape,
  Config,
  Numerical,
  Domain,
  Starvation,
  NotNormal,
  Algebra,
  Range,
  Fit,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define BEABLE_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

BEABLE_DEFINE_ERROR(SizeError, Size)
BEABLE_DEFINE_ERROR(ShapeError, Shape)
BEABLE_DEFINE_ERROR(ConfigError, Config)
BEABLE_DEFINE_ERROR(NumericalError, Numerical)
BEABLE_DEFINE_ERROR(DomainError, Domain)
BEABLE_DEFINE_ERROR(StarvationError, Starvation)
BEABLE_DEFINE_ERROR(NotNormalError, NotNormal)
BEABLE_DEFINE_ERROR(AlgebraError, Algebra)
BEABLE_DEFINE_ERROR(RangeError, Range)

#undef BEABLE_DEFINE_ERROR

/// Raised when a decay fit cannot be performed; carries the data for inspection.
class FitError : public Error {
 public:
  FitError(const std::string& what, std::vector<double> times, std::vector<double> metric)
      : Error(ErrorKind::Fit, what), times_(std::move(times)), metric_(std::move(metric)) {}

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<double>& metric() const noexcept { return metric_; }

 private:
  std::vector<double> times_;
  std::vector<double> metric_;
};

}  // namespace beable
