#include "fine/core/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fine {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'F', 'N', 'T', '1'};
constexpr std::size_t kMaxRank = 16;

template <typename U>
void put_le(std::vector<std::uint8_t> &out, U v)
{
  std::array<std::uint8_t, sizeof(U)> b;
  std::memcpy(b.data(), &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(b.begin(), b.end());
  }
  out.insert(out.end(), b.begin(), b.end());
}

template <typename U>
U get_le(const std::uint8_t *p)
{
  std::array<std::uint8_t, sizeof(U)> b;
  std::memcpy(b.data(), p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(b.begin(), b.end());
  }
  U v;
  std::memcpy(&v, b.data(), sizeof(U));
  return v;
}

template <typename R>
void put_scalar(std::vector<std::uint8_t> &out, R v)
{
  using Bits = std::conditional_t<sizeof(R) == 4, std::uint32_t, std::uint64_t>;
  put_le(out, std::bit_cast<Bits>(v));
}

template <typename R>
R get_scalar(const std::uint8_t *p)
{
  using Bits = std::conditional_t<sizeof(R) == 4, std::uint32_t, std::uint64_t>;
  return std::bit_cast<R>(get_le<Bits>(p));
}

template <typename T>
AnyTensor decode_payload(Shape shape, const std::uint8_t *p)
{
  using R = real_t<T>;
  const std::size_t n = element_count(shape);
  std::vector<T> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    if constexpr (is_complex_v<T>) {
      const R re = get_scalar<R>(p);
      const R im = get_scalar<R>(p + sizeof(R));
      data[i] = T(re, im);
      p += 2 * sizeof(R);
    } else {
      data[i] = get_scalar<R>(p);
      p += sizeof(R);
    }
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

std::size_t element_bytes(DType d)
{
  switch (d) {
  case DType::Real32: return 4;
  case DType::Real64: return 8;
  case DType::Complex64: return 8;
  case DType::Complex128: return 16;
  }
  return 0;
}

} // namespace

std::vector<std::uint8_t> encode_tensor(const AnyTensor &t)
{
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  const Shape &shape = shape_of(t);
  out.push_back(static_cast<std::uint8_t>(dtype_of(t)));
  out.push_back(static_cast<std::uint8_t>(shape.size()));
  for (auto e : shape) {
    put_le<std::uint64_t>(out, e);
  }
  std::visit(
    [&](const auto &x) {
      using T = typename std::decay_t<decltype(x)>::value_type;
      out.reserve(out.size() + x.size() * sizeof(T));
      for (const auto &v : x.data()) {
        if constexpr (is_complex_v<T>) {
          put_scalar(out, v.real());
          put_scalar(out, v.imag());
        } else {
          put_scalar(out, v);
        }
      }
    },
    t);
  return out;
}

AnyTensor decode_tensor(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < 4 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw LoadError(LoadErrorKind::BadMagic, "not an FNT1 tensor (bad magic bytes)");
  }
  if (bytes.size() < 6) {
    throw LoadError(LoadErrorKind::Truncated, "FNT1 header truncated");
  }
  const std::uint8_t code = bytes[4];
  if (code > 3) {
    throw LoadError(LoadErrorKind::UnknownDType, "unknown FNT1 dtype code " + std::to_string(code));
  }
  const auto dtype = static_cast<DType>(code);
  const std::size_t rank = bytes[5];
  if (rank == 0 || rank > kMaxRank) {
    throw LoadError(LoadErrorKind::Truncated, "FNT1 rank " + std::to_string(rank) + " unsupported");
  }
  if (bytes.size() < 6 + 8 * rank) {
    throw LoadError(LoadErrorKind::Truncated, "FNT1 extents truncated");
  }
  Shape shape(rank);
  for (std::size_t a = 0; a < rank; ++a) {
    shape[a] = get_le<std::uint64_t>(bytes.data() + 6 + 8 * a);
    if (shape[a] == 0) {
      throw LoadError(LoadErrorKind::Truncated, "FNT1 zero extent");
    }
  }
  const std::size_t header = 6 + 8 * rank;
  const std::size_t payload = element_count(shape) * element_bytes(dtype);
  if (bytes.size() - header < payload) {
    throw LoadError(LoadErrorKind::Truncated, "FNT1 payload truncated: expected " + std::to_string(payload) +
                                                " bytes, found " + std::to_string(bytes.size() - header));
  }
  const std::uint8_t *p = bytes.data() + header;
  switch (dtype) {
  case DType::Real32: return decode_payload<float>(std::move(shape), p);
  case DType::Real64: return decode_payload<double>(std::move(shape), p);
  case DType::Complex64: return decode_payload<cfloat>(std::move(shape), p);
  case DType::Complex128: return decode_payload<cdouble>(std::move(shape), p);
  }
  throw LoadError(LoadErrorKind::UnknownDType, "unreachable dtype");
}

void save_tensor(const AnyTensor &t, const std::filesystem::path &path)
{
  const auto bytes = encode_tensor(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  f.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) {
    throw IoError("write failed: " + path.string());
  }
}

AnyTensor load_tensor(const std::filesystem::path &path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw LoadError(LoadErrorKind::Unreadable, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const LoadError &e) {
    throw LoadError(e.kind(), path.string() + ": " + e.what());
  }
}

} // namespace fine
