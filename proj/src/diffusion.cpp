#include "freqprior/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace freqprior {

double DiffusionSchedule::beta(int t) const {
  if (t < 1 || t > total_steps_) {
    throw InvalidArgument(fmt::format("timestep {} outside 1..{}", t, total_steps_));
  }
  return betas_[static_cast<std::size_t>(t)];
}

double DiffusionSchedule::alpha(int t) const { return 1.0 - beta(t); }

double DiffusionSchedule::alpha_bar(int t) const {
  if (t < 0 || t > total_steps_) {
    throw InvalidArgument(fmt::format("timestep {} outside 0..{}", t, total_steps_));
  }
  return alpha_bars_[static_cast<std::size_t>(t)];
}

std::vector<int> DiffusionSchedule::ddim_grid(int sampler_steps) const {
  if (sampler_steps < 1 || sampler_steps > total_steps_) {
    throw InvalidArgument(
        fmt::format("sampler steps must lie in 1..{}, got {}", total_steps_, sampler_steps));
  }
  const int stride = total_steps_ / sampler_steps;
  std::vector<int> grid;
  grid.reserve(static_cast<std::size_t>(sampler_steps));
  for (int k = 0; k < sampler_steps; ++k) {
    const int t = offset_ + k * stride;
    if (t >= 0 && t <= total_steps_) grid.push_back(t);
  }
  return grid;
}

int DiffusionSchedule::snap_to_grid(int t, int sampler_steps) const {
  if (t < 0 || t > total_steps_) {
    throw InvalidArgument(fmt::format("timestep {} outside 0..{}", t, total_steps_));
  }
  int snapped = 0;
  for (int g : ddim_grid(sampler_steps)) {
    if (g <= t) snapped = g;
  }
  return snapped;
}

DiffusionSchedule make_schedule(int total_steps, double beta_start, double beta_end, int offset) {
  if (total_steps < 1) {
    throw InvalidArgument(fmt::format("schedule needs at least one step, got {}", total_steps));
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw InvalidArgument(fmt::format(
        "beta range must satisfy 0 < start <= end < 1, got [{}, {}]", beta_start, beta_end));
  }
  if (offset < 0 || offset > total_steps) {
    throw InvalidArgument(fmt::format("timestep offset {} outside 0..{}", offset, total_steps));
  }
  DiffusionSchedule s;
  s.total_steps_ = total_steps;
  s.offset_ = offset;
  s.betas_.assign(static_cast<std::size_t>(total_steps) + 1, 0.0);
  s.alpha_bars_.assign(static_cast<std::size_t>(total_steps) + 1, 1.0);
  for (int t = 1; t <= total_steps; ++t) {
    const double frac = total_steps == 1 ? 0.0 : static_cast<double>(t - 1) / (total_steps - 1);
    const double beta = beta_start + frac * (beta_end - beta_start);
    s.betas_[static_cast<std::size_t>(t)] = beta;
    s.alpha_bars_[static_cast<std::size_t>(t)] =
        s.alpha_bars_[static_cast<std::size_t>(t - 1)] * (1.0 - beta);
  }
  return s;
}

void ToyDataModel::validate() const {
  if (mean.size() != variance.size() || mean.size() == 0) {
    throw InvalidArgument("toy model mean and variance must be non-empty and of equal length");
  }
  if ((variance.array() < 0.0).any()) {
    throw InvalidArgument("toy model variances must be non-negative");
  }
}

ToyDataModel ToyDataModel::isotropic(std::size_t n) {
  const auto size = static_cast<Eigen::Index>(n);
  return {Eigen::VectorXd::Zero(size), Eigen::VectorXd::Ones(size)};
}

ToyDataModel ToyDataModel::seeded(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  const auto size = static_cast<Eigen::Index>(n);
  ToyDataModel model{Eigen::VectorXd(size), Eigen::VectorXd(size)};
  for (Eigen::Index i = 0; i < size; ++i) model.mean[i] = rng.gaussian();
  for (Eigen::Index i = 0; i < size; ++i) model.variance[i] = 0.25 + 3.75 * rng.uniform();
  return model;
}

std::vector<double> analytic_eps(const ToyDataModel& model, std::span<const double> x_t, int t,
                                 const DiffusionSchedule& sched) {
  if (t < 1 || t > sched.steps()) {
    throw InvalidArgument(fmt::format("analytic_eps needs 1 <= t <= {}, got {}", sched.steps(), t));
  }
  if (x_t.size() != model.size()) {
    throw InvalidArgument("analytic_eps: latent length does not match the toy model");
  }
  const double ab = sched.alpha_bar(t);
  const double sqrt_ab = std::sqrt(ab);
  const double sqrt_one_minus = std::sqrt(1.0 - ab);
  std::vector<double> eps(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double mu = model.mean[k];
    const double var = model.variance[k];
    const double posterior_mean =
        mu + sqrt_ab * var * (x_t[i] - sqrt_ab * mu) / (ab * var + (1.0 - ab));
    eps[i] = (x_t[i] - sqrt_ab * posterior_mean) / sqrt_one_minus;
  }
  return eps;
}

Denoiser make_analytic_denoiser(const ToyDataModel& model, const DiffusionSchedule& sched) {
  model.validate();
  return [model, sched](std::span<const double> x, int t) {
    return analytic_eps(model, x, t, sched);
  };
}

std::vector<double> ddim_sample(const DiffusionSchedule& sched, const Denoiser& denoiser,
                                std::span<const double> z_start, int t_start, int t_stop,
                                int steps) {
  if (steps < 1) throw InvalidArgument("ddim_sample: empty timestep grid (steps < 1)");
  if (t_stop < 0 || t_start > sched.steps() || t_start < t_stop) {
    throw InvalidArgument(fmt::format("ddim_sample: need T >= t_start >= t_stop >= 0, got {} -> {}",
                                      t_start, t_stop));
  }
  std::vector<double> x(z_start.begin(), z_start.end());
  if (t_start == t_stop) return x;

  std::vector<int> path{t_start};
  const auto grid = sched.ddim_grid(steps);
  for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
    if (*it < t_start && *it > t_stop) path.push_back(*it);
  }
  path.push_back(t_stop);

  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const int t = path[k];
    const int t_next = path[k + 1];
    const auto eps = denoiser(x, t);
    const double ab = sched.alpha_bar(t);
    const double ab_next = sched.alpha_bar(t_next);
    const double sqrt_ab = std::sqrt(ab), sqrt_one_minus = std::sqrt(1.0 - ab);
    const double sqrt_ab_next = std::sqrt(ab_next), sqrt_one_minus_next = std::sqrt(1.0 - ab_next);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double x0_hat = (x[i] - sqrt_one_minus * eps[i]) / sqrt_ab;
      x[i] = sqrt_ab_next * x0_hat + sqrt_one_minus_next * eps[i];
    }
  }
  return x;
}

std::vector<double> rediffuse(std::span<const double> z_t, int t, std::span<const double> eps,
                              const DiffusionSchedule& sched) {
  if (z_t.size() != eps.size()) {
    throw InvalidArgument("rediffuse: latent and noise lengths differ");
  }
  const double ratio = sched.alpha_bar(sched.steps()) / sched.alpha_bar(t);
  const double keep = std::sqrt(ratio);
  const double add = std::sqrt(std::max(0.0, 1.0 - ratio));
  std::vector<double> out(z_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep * z_t[i] + add * eps[i];
  return out;
}

std::string_view to_string(RefineStrategy strategy) {
  switch (strategy) {
    case RefineStrategy::none: return "none";
    case RefineStrategy::freeinit: return "freeinit";
    case RefineStrategy::freqprior: return "freqprior";
  }
  return "unknown";
}

RefineStrategy parse_refine_strategy(std::string_view name) {
  if (name == "none") return RefineStrategy::none;
  if (name == "freeinit") return RefineStrategy::freeinit;
  if (name == "freqprior") return RefineStrategy::freqprior;
  throw InvalidArgument(fmt::format("unknown refinement strategy '{}'", name));
}

void PipelineConfig::validate(const DiffusionSchedule& sched) const {
  if (iterations < 0) throw InvalidArgument("iterations must be non-negative");
  if (mid_timestep < 0 || mid_timestep > sched.steps()) {
    throw InvalidArgument(
        fmt::format("mid timestep {} outside 0..{}", mid_timestep, sched.steps()));
  }
  if (sampler_steps < 1) throw InvalidArgument("sampler steps must be >= 1");
  if (strategy != RefineStrategy::none) {
    refinement.validate();
    require_same_shape(shape, refinement.mask.shape(), "pipeline refinement mask");
  }
}

NoiseTensor refine_once(const NoiseTensor& z_noise, const PipelineConfig& cfg,
                        const SeededRng& rng) {
  switch (cfg.strategy) {
    case RefineStrategy::none:
      return z_noise;
    case RefineStrategy::freeinit: {
      SeededRng eta_rng = rng.derive(0);
      const auto eta = sample_gaussian(z_noise.shape(), eta_rng);
      return freeinit_refine(z_noise, eta, cfg.refinement.mask);
    }
    case RefineStrategy::freqprior:
      return freqprior_refine(z_noise, cfg.refinement, rng);
  }
  return z_noise;
}

PriorSearch find_prior_traced(const PipelineConfig& cfg, const ToyDataModel& model,
                              const DiffusionSchedule& sched, const SeededRng& rng) {
  cfg.validate(sched);
  if (model.size() != cfg.shape.count()) {
    throw InvalidArgument(fmt::format("toy model has {} elements, latent shape {} has {}",
                                      model.size(), cfg.shape.to_string(), cfg.shape.count()));
  }
  PriorSearch search;
  SeededRng eps_rng = rng.derive(0);
  search.initial_noise = sample_gaussian(cfg.shape, eps_rng);
  search.prior = search.initial_noise;
  search.sampled_timestep = sched.snap_to_grid(cfg.mid_timestep, cfg.sampler_steps);
  if (cfg.strategy == RefineStrategy::none) return search;

  const auto denoiser = make_analytic_denoiser(model, sched);
  const auto eps = search.initial_noise.values();
  for (int i = 0; i < cfg.iterations; ++i) {
    const auto z_t = ddim_sample(sched, denoiser, search.prior.values(), sched.steps(),
                                 search.sampled_timestep, cfg.sampler_steps);
    search.last_noisy_latent =
        NoiseTensor(cfg.shape, rediffuse(z_t, search.sampled_timestep, eps, sched));
    search.prior =
        refine_once(search.last_noisy_latent, cfg, rng.derive(static_cast<std::uint64_t>(i) + 1));
  }
  return search;
}

NoiseTensor find_prior(const PipelineConfig& cfg, const ToyDataModel& model,
                       const DiffusionSchedule& sched, const SeededRng& rng) {
  return find_prior_traced(cfg, model, sched, rng).prior;
}

PopulationAccumulator::PopulationAccumulator(std::size_t elements)
    : sum_(elements, 0.0), sum_sq_(elements, 0.0) {}

void PopulationAccumulator::add(std::span<const double> sample) {
  if (sample.size() != sum_.size()) {
    throw InvalidArgument("population sample has the wrong number of elements");
  }
  for (std::size_t i = 0; i < sample.size(); ++i) {
    sum_[i] += sample[i];
    sum_sq_[i] += sample[i] * sample[i];
  }
  ++runs_;
}

std::vector<double> PopulationAccumulator::element_variances() const {
  std::vector<double> var(sum_.size(), 0.0);
  if (runs_ < 2) return var;
  const double n = static_cast<double>(runs_);
  for (std::size_t i = 0; i < var.size(); ++i) {
    var[i] = (sum_sq_[i] - sum_[i] * sum_[i] / n) / (n - 1.0);
  }
  return var;
}

PopulationStats PopulationAccumulator::stats() const {
  PopulationStats s;
  s.runs = runs_;
  if (runs_ == 0 || sum_.empty()) return s;
  const auto var = element_variances();
  double mean_sum = 0.0, var_sum = 0.0;
  for (std::size_t i = 0; i < sum_.size(); ++i) {
    mean_sum += sum_[i] / static_cast<double>(runs_);
    var_sum += var[i];
  }
  s.mean = mean_sum / static_cast<double>(sum_.size());
  s.variance = var_sum / static_cast<double>(sum_.size());
  return s;
}

PartialVsFullReport partial_vs_full_experiment(const PipelineConfig& cfg,
                                               const ToyDataModel& model,
                                               const DiffusionSchedule& sched, int n_runs,
                                               std::uint64_t seed) {
  if (n_runs < 2) throw InvalidArgument("partial_vs_full_experiment needs at least 2 runs");
  PipelineConfig full_cfg = cfg;
  full_cfg.mid_timestep = 0;
  const std::size_t n = cfg.shape.count();
  PopulationAccumulator partial_noise(n), full_noise(n), partial_prior(n), full_prior(n);
  double paired_sq = 0.0;
  PartialVsFullReport report;
  for (int r = 0; r < n_runs; ++r) {
    const SeededRng rng(seed, static_cast<std::uint64_t>(r));
    const auto partial = find_prior_traced(cfg, model, sched, rng);
    const auto full = find_prior_traced(full_cfg, model, sched, rng);
    report.partial_timestep = partial.sampled_timestep;
    if (partial.last_noisy_latent.size() == n) {
      partial_noise.add(partial.last_noisy_latent.values());
      full_noise.add(full.last_noisy_latent.values());
    }
    partial_prior.add(partial.prior.values());
    full_prior.add(full.prior.values());
    for (std::size_t i = 0; i < n; ++i) {
      const double d = partial.prior[i] - full.prior[i];
      paired_sq += d * d;
    }
  }
  report.partial_noise = partial_noise.stats();
  report.full_noise = full_noise.stats();
  report.partial_prior = partial_prior.stats();
  report.full_prior = full_prior.stats();
  report.mean_discrepancy = std::abs(report.partial_prior.mean - report.full_prior.mean);
  report.variance_discrepancy =
      std::abs(report.partial_prior.variance - report.full_prior.variance);
  report.paired_rms = std::sqrt(paired_sq / (static_cast<double>(n) * n_runs));
  return report;
}

std::vector<double> variance_decay_experiment(RefineStrategy strategy, const PipelineConfig& cfg,
                                              int iterations, int n_runs, std::uint64_t seed) {
  if (iterations < 1) throw InvalidArgument("variance_decay_experiment needs iterations >= 1");
  if (n_runs < 2) throw InvalidArgument("variance_decay_experiment needs at least 2 runs");
  PipelineConfig run_cfg = cfg;
  run_cfg.strategy = strategy;
  if (strategy != RefineStrategy::none) {
    run_cfg.refinement.validate();
    require_same_shape(cfg.shape, cfg.refinement.mask.shape(), "variance decay mask");
  }
  const std::size_t n = cfg.shape.count();
  std::vector<PopulationAccumulator> per_iteration(static_cast<std::size_t>(iterations),
                                                   PopulationAccumulator(n));
  for (int r = 0; r < n_runs; ++r) {
    const SeededRng rng(seed, static_cast<std::uint64_t>(r));
    SeededRng input_rng = rng.derive(0);
    auto z = sample_gaussian(cfg.shape, input_rng);
    for (int i = 0; i < iterations; ++i) {
      z = refine_once(z, run_cfg, rng.derive(static_cast<std::uint64_t>(i) + 1));
      per_iteration[static_cast<std::size_t>(i)].add(z.values());
    }
  }
  std::vector<double> series;
  series.reserve(per_iteration.size());
  for (const auto& acc : per_iteration) series.push_back(acc.stats().variance);
  return series;
}

}  // namespace freqprior
