#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace partproto::npy {

/// The three element types the archive format admits.
enum class DType { kFloat32, kUInt8, kInt32 };

/// Descriptor string as written in the header, e.g. "<f4".
std::string_view descr(DType dtype);
std::size_t element_size(DType dtype);

/// A C-contiguous little-endian array. `bytes` holds the raw payload.
struct Array {
  DType dtype = DType::kFloat32;
  std::vector<std::size_t> shape;
  std::string bytes;

  std::size_t element_count() const;
};

Array from_floats(std::vector<std::size_t> shape, std::span<const float> values);
Array from_u8(std::vector<std::size_t> shape, std::span<const std::uint8_t> values);
Array from_i32(std::vector<std::size_t> shape, std::span<const std::int32_t> values);

std::vector<float> to_floats(const Array& array);
std::vector<std::uint8_t> to_u8(const Array& array);
std::vector<std::int32_t> to_i32(const Array& array);

/// Serializes to NPY format version 1.0.
std::string encode(const Array& array);

/// Strict NPY 1.0 parser: only '<f4', '|u1' and '<i4', C order.
/// Anything else raises MalformedArchive.
Array decode(std::string_view bytes);

}  // namespace partproto::npy
