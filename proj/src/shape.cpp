#include "freqprior/shape.hpp"

#include <charconv>
#include <cmath>

namespace freqprior {

LatentShape::LatentShape(std::size_t frames, std::size_t height, std::size_t width)
    : frames_(frames), height_(height), width_(width) {
  if (frames == 0 || height == 0 || width == 0) {
    throw InvalidArgument("latent shape dimensions must be positive, got " + to_string());
  }
}

std::string LatentShape::to_string() const {
  return std::to_string(frames_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
}

LatentShape LatentShape::parse(std::string_view text) {
  std::size_t dims[3] = {0, 0, 0};
  std::size_t axis = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (axis < 3) {
    auto [next, ec] = std::from_chars(p, end, dims[axis]);
    if (ec != std::errc{} || next == p) {
      throw InvalidArgument("malformed shape '" + std::string(text) + "', expected FxHxW");
    }
    p = next;
    ++axis;
    if (axis < 3) {
      if (p == end || (*p != 'x' && *p != 'X' && *p != ',')) {
        throw InvalidArgument("malformed shape '" + std::string(text) + "', expected FxHxW");
      }
      ++p;
    }
  }
  if (p != end) {
    throw InvalidArgument("malformed shape '" + std::string(text) + "', expected FxHxW");
  }
  return LatentShape(dims[0], dims[1], dims[2]);
}

void require_finite(const NoiseTensor& x, std::string_view what) {
  for (double v : x.values()) {
    if (!std::isfinite(v)) {
      throw InvalidArgument(std::string(what) + " contains non-finite values");
    }
  }
}

void require_same_shape(const LatentShape& a, const LatentShape& b, std::string_view what) {
  if (!(a == b)) {
    throw InvalidArgument(std::string(what) + ": shape mismatch " + a.to_string() + " vs " +
                          b.to_string());
  }
}

}  // namespace freqprior
