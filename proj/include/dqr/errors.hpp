#ifndef DQR_ERRORS_HPP_
#define DQR_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dqr {

//! Malformed or inconsistent run configuration (CLI exit code 2).
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

//! Input data that fails ingestion validation (CLI exit code 3).
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

//! Numerical failure such as a singular system (CLI exit code 4).
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dqr

#endif  // DQR_ERRORS_HPP_
