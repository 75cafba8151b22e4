#pragma once

#include <filesystem>

#include "fine/core/tensor.hpp"

namespace fine {

// FNT1 tensor file:
//   bytes 0-3  magic "FNT1"
//   byte  4    dtype code (0 real32, 1 real64, 2 complex64, 3 complex128)
//   byte  5    rank r
//   then r little-endian u64 extents, then the row-major little-endian payload
//   (complex values interleaved re, im).
void save_tensor(const AnyTensor &t, const std::filesystem::path &path);
AnyTensor load_tensor(const std::filesystem::path &path);

std::vector<std::uint8_t> encode_tensor(const AnyTensor &t);
AnyTensor decode_tensor(std::span<const std::uint8_t> bytes);

template <typename T>
void save_tensor(const Tensor<T> &t, const std::filesystem::path &path)
{
  save_tensor(AnyTensor(t), path);
}

// Loads and requires the stored dtype to be T.
template <typename T>
Tensor<T> load_tensor_as(const std::filesystem::path &path)
{
  AnyTensor any = load_tensor(path);
  if (auto *t = std::get_if<Tensor<T>>(&any)) {
    return std::move(*t);
  }
  throw TypeError(path.string() + ": stored dtype " + dtype_name(dtype_of(any)) + ", expected " +
                  dtype_name(dtype_of<T>()));
}

} // namespace fine
