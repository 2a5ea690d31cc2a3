#pragma once

#include <stdexcept>
#include <string>

namespace greenpot {

/// Invalid or degenerate geometry (zero speed, folded offsets, negative radii).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kernel evaluated at a singular or out-of-domain point.
class KernelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solve failed: singular or ill-conditioned system, or residual check failed.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace greenpot
