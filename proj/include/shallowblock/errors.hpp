#pragma once

#include <stdexcept>
#include <string>

namespace shallowblock {

// Invalid parameters or incompatible components (wrong measure for an index,
// threshold out of range, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (missing columns, duplicate ids,
// matches referencing unknown records, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace shallowblock
