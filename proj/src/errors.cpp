#include "solitondyn/errors.hpp"

#include <sstream>

namespace solitondyn {

std::string_view category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::dimension: return "dimension";
    case ErrorCategory::convergence: return "convergence";
    case ErrorCategory::degenerate_minimizer: return "degenerate-minimizer";
    case ErrorCategory::minimality_violation: return "minimality-violation";
    case ErrorCategory::step_size: return "step-size";
    case ErrorCategory::blow_up: return "blow-up";
    case ErrorCategory::domain_too_small: return "domain-too-small";
    case ErrorCategory::conservation: return "conservation";
    case ErrorCategory::domain_exit: return "domain-exit";
    case ErrorCategory::cutoff: return "cutoff";
    case ErrorCategory::insufficient_data: return "insufficient-data";
    case ErrorCategory::config: return "config";
    case ErrorCategory::stability: return "stability";
    case ErrorCategory::io: return "io";
    case ErrorCategory::usage: return "usage";
  }
  return "unknown";
}

std::optional<ErrorCategory> category_from_name(std::string_view name) noexcept {
  for (int c = 0; c <= static_cast<int>(ErrorCategory::usage); ++c)
    if (category_name(static_cast<ErrorCategory>(c)) == name) return static_cast<ErrorCategory>(c);
  return std::nullopt;
}

Error::Error(ErrorCategory category, const std::string& message)
    : std::runtime_error(message), category_(category) {}

ConvergenceError::ConvergenceError(const std::string& message, double last_residual)
    : Error(ErrorCategory::convergence, message), last_residual_(last_residual) {}

namespace {
std::string with_location(const std::string& message, long step_index, double time) {
  std::ostringstream os;
  os << message << " (step " << step_index << ", t=" << time << ")";
  return os.str();
}
}  // namespace

StepError::StepError(ErrorCategory category, const std::string& message, long step_index,
                     double time)
    : Error(category, with_location(message, step_index, time)),
      step_index_(step_index),
      time_(time) {}

}  // namespace solitondyn
