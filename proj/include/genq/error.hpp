#pragma once

#include <stdexcept>
#include <string>

namespace genq {

/// Base class for all data and usage errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace genq
