#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace freqprior {

/// Reproducible Gaussian source identified by (seed, stream).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard; it is keyed through std::seed_seq with both words of the seed
/// and the stream id. Normals come from the Marsaglia polar method applied
/// to 53-bit uniforms, so draws do not depend on the standard library's
/// distribution implementations.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Independent generator on a child stream; the parent's state is untouched.
  SeededRng derive(std::uint64_t child) const;

  /// Uniform in the open interval (0, 1).
  double uniform();
  double gaussian();
  void fill_gaussian(std::span<double> out);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; used to hash stream ids.
std::uint64_t mix64(std::uint64_t x);

}  // namespace freqprior
