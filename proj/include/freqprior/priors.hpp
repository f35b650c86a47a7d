#pragma once

#include "freqprior/filters.hpp"
#include "freqprior/rng.hpp"
#include "freqprior/shape.hpp"

namespace freqprior {

/// Which complement of the low-pass mask feeds the high-frequency noise.
/// `classic` (1 - M) exists only as a negative control for the property suite.
enum class HighpassRule { energy_preserving, classic };

struct RefinementConfig {
  double cos_theta = 0.8;
  FilterMask mask;
  HighpassRule highpass = HighpassRule::energy_preserving;

  double sin_theta() const;
  void validate() const;
};

/// High-pass complement selected by cfg.highpass.
FilterMask highpass_mask(const RefinementConfig& cfg);

NoiseTensor sample_gaussian(const LatentShape& shape, SeededRng& rng);

/// Frame-correlated prior z_j = (eps_j + eps_share) / sqrt(2); eps_share is
/// one (h, w) frame drawn before the per-frame terms.
NoiseTensor mixed_prior(const LatentShape& shape, SeededRng& rng);

/// Classic frequency mixing:
/// Re(ifft3(fft3(z_noise) * M + fft3(eta) * (1 - M))).
NoiseTensor freeinit_refine(const NoiseTensor& z_noise, const NoiseTensor& eta,
                            const FilterMask& mask);

/// Three-step refinement:
///   1. x_k = (cos(t) z_noise + sin(t) eta_k) / sqrt(1 + cos^2(t)),  k = 1, 2
///   2. z~_k = M * fft3(x_k) + sqrt(1 - M^2) * fft3(y_k)
///   3. out = (Re z_1 + Im z_1 + Re z_2 - Im z_2) / sqrt(2),  z_k = ifft3(z~_k)
/// eta_1, eta_2, y_1, y_2 are drawn from streams 0..3 derived from `rng`.
NoiseTensor freqprior_refine(const NoiseTensor& z_noise, const RefinementConfig& cfg,
                             const SeededRng& rng);

}  // namespace freqprior
