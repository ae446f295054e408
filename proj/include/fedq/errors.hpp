#pragma once

#include <stdexcept>
#include <string>

namespace fedq {

// All failures surface as typed exceptions; the CLI maps any of them to
// exit code 1 with the message on stderr.

// Bad or inconsistent experiment configuration (unknown key, out-of-range
// value, missing file, ...).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input data (IDX magic/count mismatch, unparseable CSV cell, ...).
struct data_error : std::runtime_error {
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

// Dimension/shape mismatch between tensors, codecs or aggregation inputs.
struct dimension_error : std::runtime_error {
  explicit dimension_error(const std::string& what) : std::runtime_error(what) {}
};

// Violated runtime precondition inside the simulation (non-finite input,
// nonpositive time, degenerate controller state, ...).
struct sim_error : std::runtime_error {
  explicit sim_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedq
