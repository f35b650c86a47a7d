#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "freqprior/errors.hpp"

namespace freqprior {

/// Frames x height x width of a video latent. Tensors are flattened
/// row-major (frame-major, then height, then width), which matches the
/// Kronecker order F_T (x) F_H (x) F_W of the 3D DFT matrix.
class LatentShape {
 public:
  LatentShape() = default;
  LatentShape(std::size_t frames, std::size_t height, std::size_t width);

  std::size_t frames() const { return frames_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t count() const { return frames_ * height_ * width_; }

  std::size_t flat_index(std::size_t f, std::size_t h, std::size_t w) const {
    return (f * height_ + h) * width_ + w;
  }

  /// "16x20x20"
  std::string to_string() const;
  /// Parses "FxHxW"; throws InvalidArgument on malformed input.
  static LatentShape parse(std::string_view text);

  friend bool operator==(const LatentShape&, const LatentShape&) = default;

 private:
  std::size_t frames_ = 1;
  std::size_t height_ = 1;
  std::size_t width_ = 1;
};

/// Dense row-major 3D array over a LatentShape.
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(LatentShape shape, T fill = T{})
      : shape_(shape), values_(shape.count(), fill) {}
  Tensor3(LatentShape shape, std::vector<T> values)
      : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.count()) {
      throw InvalidArgument("tensor value count " + std::to_string(values_.size()) +
                            " does not match shape " + shape_.to_string());
    }
  }

  const LatentShape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& operator()(std::size_t f, std::size_t h, std::size_t w) {
    return values_[shape_.flat_index(f, h, w)];
  }
  const T& operator()(std::size_t f, std::size_t h, std::size_t w) const {
    return values_[shape_.flat_index(f, h, w)];
  }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::vector<T>& storage() { return values_; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  LatentShape shape_;
  std::vector<T> values_;
};

/// Real float64 latent: noise, refined priors, masks.
using NoiseTensor = Tensor3<double>;
/// Complex spectrum in unshifted DFT bin order.
using SpectralTensor = Tensor3<std::complex<double>>;

/// Throws InvalidArgument unless every element is finite.
void require_finite(const NoiseTensor& x, std::string_view what);

/// Throws InvalidArgument if the two shapes differ.
void require_same_shape(const LatentShape& a, const LatentShape& b, std::string_view what);

}  // namespace freqprior
