#pragma once

#include <stdexcept>
#include <string>

namespace rtlm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Estimator
class DegenerateDesign : public Error { using Error::Error; };
class NonFiniteLoss : public Error { using Error::Error; };
class EmptyScores : public Error { using Error::Error; };
class HashMismatch : public Error { using Error::Error; };

// Workload
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};
class InvalidRecord : public Error { using Error::Error; };
class EstimatorMissing : public Error { using Error::Error; };

// Metrics
class EmptyLog : public Error { using Error::Error; };
class MismatchedWorkloads : public Error { using Error::Error; };

// Configuration
class ConfigError : public Error { using Error::Error; };

}  // namespace rtlm
