#pragma once

#include <stdexcept>
#include <string>

namespace mutor {

// Shapes of operands do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A configuration value is outside its admissible range.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An attention mask leaves a row with nothing to attend to.
class MaskError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Token ids or other model inputs are out of range.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A prompt does not fit into the model's context window.
class ContextError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Malformed file content. `line` is 1-based, 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mutor
