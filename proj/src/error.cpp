#include "ddn/error.hpp"

namespace ddn {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

ShapeError::ShapeError(const std::string& op, const std::string& what, const Shape& a,
                       const Shape& b)
    : Error(op + ": " + what + " (" + to_string(a) + " vs " + to_string(b) + ")") {}

}  // namespace ddn
