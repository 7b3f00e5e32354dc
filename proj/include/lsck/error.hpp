#pragma once

#include <stdexcept>
#include <string>

namespace ckm {

/// Thrown for malformed input, violated preconditions and backend failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ckm
