#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hadcomp {

/// Failure categories raised by the library. The CLI maps them to exit codes.
enum class ErrorKind {
  invalid_argument,
  singular_kinematics,
  ambiguous_branch,
  pole_proximity,
  no_open_channel,
  search_failed,
  branch_point_convergence,
  contour_invalid,
  degenerate,
  resolution,
  no_zero,
  continuation_blocked,
  cutoff,
  infeasible,
  config,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::singular_kinematics: return "singular-kinematics";
    case ErrorKind::ambiguous_branch: return "ambiguous-branch";
    case ErrorKind::pole_proximity: return "pole-proximity";
    case ErrorKind::no_open_channel: return "no-open-channel";
    case ErrorKind::search_failed: return "search-failed";
    case ErrorKind::branch_point_convergence: return "branch-point-convergence";
    case ErrorKind::contour_invalid: return "contour-invalid";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::no_zero: return "no-zero";
    case ErrorKind::continuation_blocked: return "continuation-blocked";
    case ErrorKind::cutoff: return "cutoff";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hadcomp
