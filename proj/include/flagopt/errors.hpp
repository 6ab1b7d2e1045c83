#pragma once

#include <stdexcept>
#include <string>

namespace flagopt {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, long line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  long line_number;
};

}  // namespace flagopt
