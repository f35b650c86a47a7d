#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "freqprior/shape.hpp"

namespace freqprior {

// Tensor file layout (all integers little-endian):
//   bytes 0..3   magic "NPRT"
//   bytes 4..7   u32 header length L
//   bytes 8..8+L UTF-8 JSON {"shape":[f,h,w],"dtype":"f64","order":"row-major","seed":s?}
//   rest         f*h*w float64 values, little-endian, row-major

class TensorIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File does not start with "NPRT".
class BadMagicError : public TensorIoError {
 public:
  using TensorIoError::TensorIoError;
};

/// File ends before the length field or the JSON header is complete, so no
/// payload can be located.
class TruncatedPayloadError : public TensorIoError {
 public:
  using TensorIoError::TensorIoError;
};

/// Payload byte count differs from 8 * f * h * w.
class ShapeMismatchError : public TensorIoError {
 public:
  ShapeMismatchError(const std::string& what, std::uint64_t expected, std::uint64_t actual)
      : TensorIoError(what), expected_bytes(expected), actual_bytes(actual) {}
  std::uint64_t expected_bytes;
  std::uint64_t actual_bytes;
};

/// Header is not valid JSON or violates the schema (dtype, order, shape).
class MalformedHeaderError : public TensorIoError {
 public:
  using TensorIoError::TensorIoError;
};

struct TensorFile {
  NoiseTensor tensor;
  std::optional<std::uint64_t> seed;
};

void write_tensor(const std::filesystem::path& path, const NoiseTensor& x,
                  std::optional<std::uint64_t> seed = std::nullopt);
NoiseTensor read_tensor(const std::filesystem::path& path);
TensorFile read_tensor_file(const std::filesystem::path& path);

/// In-memory encode/decode used by the file functions.
std::string encode_tensor(const NoiseTensor& x, std::optional<std::uint64_t> seed = std::nullopt);
TensorFile decode_tensor(const std::string& bytes);

}  // namespace freqprior
