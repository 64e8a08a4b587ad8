#pragma once

#include <stdexcept>
#include <string>

namespace spcg {

enum class ErrorCategory {
  config,      // malformed or inconsistent configuration
  data,        // dataset ingestion / decoding problems
  dimension,   // tensor shape disagreements
  validation,  // contract violations (bad arguments, out-of-range values)
  training,    // non-finite losses, aborted runs
  io,          // filesystem failures
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void throw_config(const std::string& m) { throw Error(ErrorCategory::config, m); }
[[noreturn]] inline void throw_data(const std::string& m) { throw Error(ErrorCategory::data, m); }
[[noreturn]] inline void throw_dimension(const std::string& m) { throw Error(ErrorCategory::dimension, m); }
[[noreturn]] inline void throw_validation(const std::string& m) { throw Error(ErrorCategory::validation, m); }
[[noreturn]] inline void throw_training(const std::string& m) { throw Error(ErrorCategory::training, m); }
[[noreturn]] inline void throw_io(const std::string& m) { throw Error(ErrorCategory::io, m); }

}  // namespace spcg
