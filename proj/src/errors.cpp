#include "mgt/errors.hpp"

#include <utility>

namespace mgt {

Error::Error(std::string kind, const std::string& message, int exit_code)
    : std::runtime_error(kind + ": " + message), kind_(std::move(kind)), exit_code_(exit_code) {}

}  // namespace mgt
