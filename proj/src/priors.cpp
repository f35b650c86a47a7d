#include "freqprior/priors.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "freqprior/spectral.hpp"

namespace freqprior {

double RefinementConfig::sin_theta() const {
  return std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
}

void RefinementConfig::validate() const {
  if (!(cos_theta >= 0.0 && cos_theta <= 1.0)) {
    throw InvalidArgument(fmt::format("cos_theta must lie in [0, 1], got {}", cos_theta));
  }
}

FilterMask highpass_mask(const RefinementConfig& cfg) {
  return cfg.highpass == HighpassRule::energy_preserving ? highpass_energy(cfg.mask)
                                                         : highpass_classic(cfg.mask);
}

NoiseTensor sample_gaussian(const LatentShape& shape, SeededRng& rng) {
  NoiseTensor out(shape);
  rng.fill_gaussian(out.values());
  return out;
}

NoiseTensor mixed_prior(const LatentShape& shape, SeededRng& rng) {
  const std::size_t frame = shape.height() * shape.width();
  std::vector<double> shared(frame);
  rng.fill_gaussian(shared);
  NoiseTensor out(shape);
  rng.fill_gaussian(out.values());
  const double scale = 1.0 / std::numbers::sqrt2;
  for (std::size_t j = 0; j < shape.frames(); ++j) {
    for (std::size_t p = 0; p < frame; ++p) {
      double& v = out[j * frame + p];
      v = scale * (v + shared[p]);
    }
  }
  return out;
}

NoiseTensor freeinit_refine(const NoiseTensor& z_noise, const NoiseTensor& eta,
                            const FilterMask& mask) {
  require_same_shape(z_noise.shape(), eta.shape(), "freeinit_refine(z_noise, eta)");
  require_same_shape(z_noise.shape(), mask.shape(), "freeinit_refine(z_noise, mask)");
  const auto x = fft3(z_noise);
  const auto y = fft3(eta);
  SpectralTensor mixed(z_noise.shape());
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    mixed[i] = x[i] * mask[i] + y[i] * (1.0 - mask[i]);
  }
  const auto z = ifft3(mixed);
  NoiseTensor out(z_noise.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = z[i].real();
  return out;
}

NoiseTensor freqprior_refine(const NoiseTensor& z_noise, const RefinementConfig& cfg,
                             const SeededRng& rng) {
  cfg.validate();
  const auto& shape = z_noise.shape();
  require_same_shape(shape, cfg.mask.shape(), "freqprior_refine(z_noise, mask)");

  SeededRng eta1_rng = rng.derive(0);
  SeededRng eta2_rng = rng.derive(1);
  SeededRng y1_rng = rng.derive(2);
  SeededRng y2_rng = rng.derive(3);
  const auto eta1 = sample_gaussian(shape, eta1_rng);
  const auto eta2 = sample_gaussian(shape, eta2_rng);
  const auto y1 = sample_gaussian(shape, y1_rng);
  const auto y2 = sample_gaussian(shape, y2_rng);

  // Step 1: two low-frequency carriers sharing z_noise.
  const double c = cfg.cos_theta;
  const double s = cfg.sin_theta();
  const double norm = 1.0 / std::sqrt(1.0 + c * c);
  NoiseTensor x1(shape), x2(shape);
  for (std::size_t i = 0; i < x1.size(); ++i) {
    x1[i] = norm * (c * z_noise[i] + s * eta1[i]);
    x2[i] = norm * (c * z_noise[i] + s * eta2[i]);
  }

  // Step 2: low-pass the carriers, fill the complement from fresh noise.
  const FilterMask high = highpass_mask(cfg);
  const auto x1f = fft3(x1), x2f = fft3(x2), y1f = fft3(y1), y2f = fft3(y2);
  SpectralTensor z1f(shape), z2f(shape);
  for (std::size_t i = 0; i < z1f.size(); ++i) {
    z1f[i] = cfg.mask[i] * x1f[i] + high[i] * y1f[i];
    z2f[i] = cfg.mask[i] * x2f[i] + high[i] * y2f[i];
  }

  // Step 3: keep both real and imaginary parts, with opposite imaginary signs.
  const auto z1 = ifft3(z1f);
  const auto z2 = ifft3(z2f);
  NoiseTensor out(shape);
  const double scale = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = scale * (z1[i].real() + z1[i].imag() + z2[i].real() - z2[i].imag());
  }
  return out;
}

}  // namespace freqprior
