#include "freqprior/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <fmt/format.h>
#include <json.hpp>

namespace freqprior {
namespace {

constexpr char kMagic[4] = {'N', 'P', 'R', 'T'};

static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32_le(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

void put_f64_le(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

double get_f64_le(const std::string& in, std::size_t pos) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

LatentShape parse_header_shape(const nlohmann::json& header) {
  const auto it = header.find("shape");
  if (it == header.end() || !it->is_array() || it->size() != 3) {
    throw MalformedHeaderError("tensor header 'shape' must be an array of three counts");
  }
  std::size_t dims[3];
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& d = (*it)[i];
    if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0) {
      throw MalformedHeaderError("tensor header 'shape' entries must be positive integers");
    }
    dims[i] = d.get<std::size_t>();
  }
  return LatentShape(dims[0], dims[1], dims[2]);
}

}  // namespace

std::string encode_tensor(const NoiseTensor& x, std::optional<std::uint64_t> seed) {
  nlohmann::ordered_json header;
  header["shape"] = {x.shape().frames(), x.shape().height(), x.shape().width()};
  header["dtype"] = "f64";
  header["order"] = "row-major";
  if (seed) header["seed"] = *seed;
  const std::string text = header.dump();

  std::string out(kMagic, 4);
  put_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + 8 * x.size());
  for (double v : x.values()) put_f64_le(out, v);
  return out;
}

TensorFile decode_tensor(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw BadMagicError("not a tensor file: missing NPRT magic");
  }
  if (bytes.size() < 8) {
    throw TruncatedPayloadError("tensor file ends inside the header-length field");
  }
  const std::uint32_t header_len = get_u32_le(bytes, 4);
  if (bytes.size() < 8 + static_cast<std::size_t>(header_len)) {
    throw TruncatedPayloadError(fmt::format(
        "tensor file ends inside the {}-byte header ({} bytes present)", header_len,
        bytes.size() - 8));
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedHeaderError(fmt::format("tensor header is not valid JSON: {}", e.what()));
  }
  if (!header.is_object()) throw MalformedHeaderError("tensor header must be a JSON object");
  if (header.value("dtype", "") != "f64") {
    throw MalformedHeaderError("tensor header 'dtype' must be \"f64\"");
  }
  if (header.value("order", "") != "row-major") {
    throw MalformedHeaderError("tensor header 'order' must be \"row-major\"");
  }
  const LatentShape shape = parse_header_shape(header);

  TensorFile file;
  if (auto it = header.find("seed"); it != header.end()) {
    if (!it->is_number_unsigned()) throw MalformedHeaderError("tensor header 'seed' must be a non-negative integer");
    file.seed = it->get<std::uint64_t>();
  }

  const std::size_t payload_offset = 8 + header_len;
  const std::uint64_t expected = 8 * static_cast<std::uint64_t>(shape.count());
  const std::uint64_t actual = bytes.size() - payload_offset;
  if (actual != expected) {
    throw ShapeMismatchError(
        fmt::format("tensor header shape {} expects {} payload bytes, found {}", shape.to_string(),
                    expected, actual),
        expected, actual);
  }

  std::vector<double> values(shape.count());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = get_f64_le(bytes, payload_offset + 8 * i);
    if (!std::isfinite(values[i])) {
      throw TensorIoError(fmt::format("tensor payload value {} is not finite", i));
    }
  }
  file.tensor = NoiseTensor(shape, std::move(values));
  return file;
}

void write_tensor(const std::filesystem::path& path, const NoiseTensor& x,
                  std::optional<std::uint64_t> seed) {
  const std::string bytes = encode_tensor(x, seed);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TensorIoError(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw TensorIoError(fmt::format("failed writing '{}'", path.string()));
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TensorIoError(fmt::format("cannot open '{}' for reading", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

NoiseTensor read_tensor(const std::filesystem::path& path) {
  return read_tensor_file(path).tensor;
}

}  // namespace freqprior
