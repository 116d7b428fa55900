#pragma once

#include <stdexcept>
#include <string>

namespace bbmlab {

// Bad arguments or malformed configuration. CLI maps this to exit code 2.
class input_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Resource limits (population cap, rejection budget). Exit code 3.
class resource_error : public std::runtime_error {
 public:
  resource_error(const std::string& what, double partial = 0.0)
      : std::runtime_error(what), partial_statistic(partial) {}
  double partial_statistic;
};

}  // namespace bbmlab
