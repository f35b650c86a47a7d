#include "freqprior/filters.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "freqprior/spectral.hpp"

namespace freqprior {

std::string_view to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::butterworth: return "butterworth";
    case FilterKind::gaussian: return "gaussian";
    case FilterKind::ideal: return "ideal";
  }
  return "unknown";
}

FilterKind parse_filter_kind(std::string_view name) {
  if (name == "butterworth") return FilterKind::butterworth;
  if (name == "gaussian") return FilterKind::gaussian;
  if (name == "ideal") return FilterKind::ideal;
  throw InvalidArgument(fmt::format("unknown filter kind '{}'", name));
}

void FilterSpec::validate() const {
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) {
    throw InvalidArgument(fmt::format("filter cutoff must be positive, got {}", cutoff));
  }
  if (cutoff > std::sqrt(3.0) + 1e-12) {
    throw InvalidArgument(fmt::format("filter cutoff must not exceed sqrt(3), got {}", cutoff));
  }
  if (kind == FilterKind::butterworth && order < 1) {
    throw InvalidArgument(fmt::format("butterworth order must be >= 1, got {}", order));
  }
}

std::string FilterSpec::describe() const {
  if (kind == FilterKind::butterworth) {
    return fmt::format("butterworth(order={}, cutoff={})", order, cutoff);
  }
  return fmt::format("{}(cutoff={})", to_string(kind), cutoff);
}

FilterMask::FilterMask(NoiseTensor values) : values_(std::move(values)) {
  for (double v : values_.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument(fmt::format("filter mask value {} outside [0, 1]", v));
    }
  }
}

FilterMask FilterMask::constant(const LatentShape& shape, double value) {
  return FilterMask(NoiseTensor(shape, value));
}

bool FilterMask::is_frequency_symmetric() const {
  const auto& s = shape();
  const auto f = s.frames(), h = s.height(), w = s.width();
  for (std::size_t a = 0; a < f; ++a) {
    for (std::size_t b = 0; b < h; ++b) {
      for (std::size_t c = 0; c < w; ++c) {
        if (values_(a, b, c) != values_((f - a) % f, (h - b) % h, (w - c) % w)) return false;
      }
    }
  }
  return true;
}

double normalized_frequency(std::size_t k, std::size_t n) {
  return 2.0 * static_cast<double>(std::min(k, n - k)) / static_cast<double>(n);
}

FilterMask build_mask(const FilterSpec& spec, const LatentShape& shape) {
  spec.validate();
  NoiseTensor values(shape);
  const double d0_sq = spec.cutoff * spec.cutoff;
  for (std::size_t a = 0; a < shape.frames(); ++a) {
    const double uf = normalized_frequency(a, shape.frames());
    for (std::size_t b = 0; b < shape.height(); ++b) {
      const double uh = normalized_frequency(b, shape.height());
      for (std::size_t c = 0; c < shape.width(); ++c) {
        const double uw = normalized_frequency(c, shape.width());
        const double d_sq = uf * uf + uh * uh + uw * uw;
        double m = 0.0;
        switch (spec.kind) {
          case FilterKind::butterworth:
            m = 1.0 / (1.0 + std::pow(d_sq / d0_sq, spec.order));
            break;
          case FilterKind::gaussian:
            m = std::exp(-d_sq / (2.0 * d0_sq));
            break;
          case FilterKind::ideal:
            // Compare distances, not squares: sqrt(3)^2 rounds below 3.
            m = std::sqrt(d_sq) <= spec.cutoff ? 1.0 : 0.0;
            break;
        }
        values(a, b, c) = m;
      }
    }
  }
  return FilterMask(std::move(values));
}

FilterMask highpass_classic(const FilterMask& mask) {
  NoiseTensor out(mask.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = 1.0 - mask[i];
  return FilterMask(std::move(out));
}

FilterMask highpass_energy(const FilterMask& mask) {
  NoiseTensor out(mask.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out[i] = std::sqrt(std::max(0.0, 1.0 - mask[i] * mask[i]));
  }
  return FilterMask(std::move(out));
}

Eigen::VectorXd mask_to_lambda(const FilterMask& mask) { return to_vector(mask.values()); }

}  // namespace freqprior
