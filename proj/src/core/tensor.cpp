#include "fine/core/tensor.hpp"

namespace fine {

std::string shape_string(const Shape &shape)
{
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) {
      s += "x";
    }
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

const char *dtype_name(DType d)
{
  switch (d) {
  case DType::Real32: return "real32";
  case DType::Real64: return "real64";
  case DType::Complex64: return "complex64";
  case DType::Complex128: return "complex128";
  }
  return "unknown";
}

} // namespace fine
