#include "dramcal/error.hpp"

namespace dramcal {

ParseError::ParseError(std::string stage, const std::string& source, std::size_t line, const std::string& msg)
    : Error(std::move(stage), source + ":" + std::to_string(line) + ": " + msg), line_(line) {}

}  // namespace dramcal
