#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace solitondyn {

enum class ErrorCategory {
  dimension,
  convergence,
  degenerate_minimizer,
  minimality_violation,
  step_size,
  blow_up,
  domain_too_small,
  conservation,
  domain_exit,
  cutoff,
  insufficient_data,
  config,
  stability,
  io,
  usage,
};

std::string_view category_name(ErrorCategory category) noexcept;
std::optional<ErrorCategory> category_from_name(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message);

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, double last_residual);

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

// Raised from inside a time loop; carries where it happened.
class StepError : public Error {
 public:
  StepError(ErrorCategory category, const std::string& message, long step_index, double time);

  long step_index() const noexcept { return step_index_; }
  double time() const noexcept { return time_; }

 private:
  long step_index_;
  double time_;
};

}  // namespace solitondyn
