#include "partproto/npy.hpp"

#include <bit>
#include <cstring>
#include <regex>

#include "partproto/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "array payloads are copied verbatim and assume a little-endian host");

namespace partproto::npy {

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";
constexpr std::size_t kPreludeSize = 10;  // magic + version + header length
constexpr std::size_t kAlignment = 64;

[[noreturn]] void malformed(const std::string& why) {
  throw Error(ErrorKind::kMalformedArchive, "npy: " + why);
}

template <typename T>
Array from_values(DType dtype, std::vector<std::size_t> shape, std::span<const T> values) {
  Array array{dtype, std::move(shape), {}};
  if (array.element_count() != values.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "npy: value count does not match shape");
  }
  array.bytes.resize(values.size_bytes());
  std::memcpy(array.bytes.data(), values.data(), values.size_bytes());
  return array;
}

template <typename T>
std::vector<T> to_values(const Array& array, DType expected) {
  if (array.dtype != expected) {
    malformed("unexpected dtype " + std::string(descr(array.dtype)) + ", wanted " +
              std::string(descr(expected)));
  }
  std::vector<T> out(array.element_count());
  std::memcpy(out.data(), array.bytes.data(), out.size() * sizeof(T));
  return out;
}

std::string shape_literal(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ",";
  out += ")";
  return out;
}

}  // namespace

std::string_view descr(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return "<f4";
    case DType::kUInt8: return "|u1";
    case DType::kInt32: return "<i4";
  }
  return "?";
}

std::size_t element_size(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return 4;
    case DType::kUInt8: return 1;
    case DType::kInt32: return 4;
  }
  return 0;
}

std::size_t Array::element_count() const {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Array from_floats(std::vector<std::size_t> shape, std::span<const float> values) {
  return from_values(DType::kFloat32, std::move(shape), values);
}
Array from_u8(std::vector<std::size_t> shape, std::span<const std::uint8_t> values) {
  return from_values(DType::kUInt8, std::move(shape), values);
}
Array from_i32(std::vector<std::size_t> shape, std::span<const std::int32_t> values) {
  return from_values(DType::kInt32, std::move(shape), values);
}

std::vector<float> to_floats(const Array& array) { return to_values<float>(array, DType::kFloat32); }
std::vector<std::uint8_t> to_u8(const Array& array) {
  return to_values<std::uint8_t>(array, DType::kUInt8);
}
std::vector<std::int32_t> to_i32(const Array& array) {
  return to_values<std::int32_t>(array, DType::kInt32);
}

std::string encode(const Array& array) {
  std::string header = "{'descr': '" + std::string(descr(array.dtype)) +
                       "', 'fortran_order': False, 'shape': " + shape_literal(array.shape) +
                       ", }";
  const std::size_t unpadded = kPreludeSize + header.size() + 1;
  header.append((kAlignment - unpadded % kAlignment) % kAlignment, ' ');
  header.push_back('\n');

  std::string out;
  out.reserve(kPreludeSize + header.size() + array.bytes.size());
  out.append(kMagic);
  out.push_back('\x01');
  out.push_back('\x00');
  const auto len = static_cast<std::uint16_t>(header.size());
  out.push_back(static_cast<char>(len & 0xFF));
  out.push_back(static_cast<char>(len >> 8));
  out += header;
  out += array.bytes;
  return out;
}

Array decode(std::string_view bytes) {
  if (bytes.size() < kPreludeSize || bytes.substr(0, kMagic.size()) != kMagic) {
    malformed("bad magic");
  }
  if (bytes[6] != '\x01' || bytes[7] != '\x00') malformed("only format version 1.0 is accepted");
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < kPreludeSize + header_len) malformed("truncated header");
  const std::string header(bytes.substr(kPreludeSize, header_len));

  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  std::smatch m;

  Array array;
  if (!std::regex_search(header, m, descr_re)) malformed("missing descr");
  const std::string d = m[1];
  if (d == "<f4") {
    array.dtype = DType::kFloat32;
  } else if (d == "|u1") {
    array.dtype = DType::kUInt8;
  } else if (d == "<i4") {
    array.dtype = DType::kInt32;
  } else {
    malformed("unsupported dtype '" + d + "' (little-endian f4, u1 or i4 required)");
  }

  if (!std::regex_search(header, m, order_re)) malformed("missing fortran_order");
  if (m[1] == "True") malformed("fortran-ordered arrays are not accepted");

  if (!std::regex_search(header, m, shape_re)) malformed("missing shape");
  const std::string dims = m[1];
  static const std::regex dim_re(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), dim_re);
       it != std::sregex_iterator(); ++it) {
    array.shape.push_back(static_cast<std::size_t>(std::stoull(it->str())));
  }

  const std::size_t payload = array.element_count() * element_size(array.dtype);
  const std::size_t offset = kPreludeSize + header_len;
  if (bytes.size() != offset + payload) {
    malformed("payload is " + std::to_string(bytes.size() - offset) + " bytes, expected " +
              std::to_string(payload));
  }
  array.bytes.assign(bytes.substr(offset));
  return array;
}

}  // namespace partproto::npy
