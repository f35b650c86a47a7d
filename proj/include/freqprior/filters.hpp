#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "freqprior/shape.hpp"

namespace freqprior {

enum class FilterKind { butterworth, gaussian, ideal };

std::string_view to_string(FilterKind kind);
/// Accepts "butterworth", "gaussian", "ideal"; throws InvalidArgument otherwise.
FilterKind parse_filter_kind(std::string_view name);

/// Low-pass filter parameterization. The cutoff is a normalized
/// spatial-temporal frequency: every axis spans [0, 1], so the joint
/// distance ranges over [0, sqrt(3)].
struct FilterSpec {
  FilterKind kind = FilterKind::butterworth;
  double cutoff = 0.25;
  int order = 4;  // butterworth only

  void validate() const;
  std::string describe() const;
};

/// Per-bin attenuation in [0, 1], stored in unshifted DFT bin order.
class FilterMask {
 public:
  FilterMask() = default;
  /// Throws InvalidArgument if any value lies outside [0, 1].
  explicit FilterMask(NoiseTensor values);

  const LatentShape& shape() const { return values_.shape(); }
  const NoiseTensor& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  /// True iff M(a,b,c) == M(-a,-b,-c) for every bin (indices taken mod the axis sizes).
  bool is_frequency_symmetric() const;

  static FilterMask constant(const LatentShape& shape, double value);

 private:
  NoiseTensor values_;
};

/// Normalized per-axis coordinate of DFT bin k on an axis of length n:
/// 2 * min(k, n - k) / n.
double normalized_frequency(std::size_t k, std::size_t n);

FilterMask build_mask(const FilterSpec& spec, const LatentShape& shape);

/// 1 - M
FilterMask highpass_classic(const FilterMask& mask);
/// sqrt(1 - M^2), so that M^2 + H^2 = 1.
FilterMask highpass_energy(const FilterMask& mask);

/// Diagonal of the filter matrix Lambda in the same flattening as fft3 bins.
Eigen::VectorXd mask_to_lambda(const FilterMask& mask);

}  // namespace freqprior
