#pragma once

#include <stdexcept>
#include <string>

namespace sparseweak {

/// A required relation between parameters does not hold (maps to CLI exit 1).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The computation is well posed but refuses to produce a number, e.g. a
/// Young function whose series c_phi diverges (maps to CLI exit 2).
class ComputationRefused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sparseweak
