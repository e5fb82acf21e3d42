#ifndef KFP_ERRORS_HPP
#define KFP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kfp {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// validation/input/domain/config/threshold -> 2, numerical blowup -> 3.

struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ThresholdError : std::runtime_error {
  explicit ThresholdError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ResolutionError : std::runtime_error {
  explicit ResolutionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvariantError : std::runtime_error {
  explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace kfp

#endif
