#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "freqprior/priors.hpp"

namespace freqprior {

/// Discrete DDPM schedule. Index t runs over 0..T with alpha_bar(0) = 1.
class DiffusionSchedule {
 public:
  int steps() const { return total_steps_; }
  int offset() const { return offset_; }

  double beta(int t) const;       // t in 1..T
  double alpha(int t) const;      // 1 - beta(t)
  double alpha_bar(int t) const;  // t in 0..T

  /// Timesteps visited by a `sampler_steps`-step DDIM sampler, ascending:
  /// offset + k * (T / sampler_steps) for k = 0 .. sampler_steps - 1,
  /// keeping only points in [0, T].
  std::vector<int> ddim_grid(int sampler_steps) const;

  /// Largest grid point <= t, or 0 when t lies below the whole grid.
  int snap_to_grid(int t, int sampler_steps) const;

 private:
  friend DiffusionSchedule make_schedule(int, double, double, int);

  int total_steps_ = 0;
  int offset_ = 0;
  std::vector<double> betas_;       // betas_[0] unused
  std::vector<double> alpha_bars_;  // alpha_bars_[0] = 1
};

/// Linear beta interpolation from beta_start (t = 1) to beta_end (t = T).
DiffusionSchedule make_schedule(int total_steps = 1000, double beta_start = 1e-4,
                                double beta_end = 0.02, int offset = 1);

/// Gaussian data model N(mean, diag(variance)) with an exact MMSE denoiser.
struct ToyDataModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;

  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
  void validate() const;

  /// mean = 0, variance = 1.
  static ToyDataModel isotropic(std::size_t n);
  /// mean ~ N(0, 1) and variance ~ U[0.25, 4], drawn from `seed`.
  static ToyDataModel seeded(std::size_t n, std::uint64_t seed);
};

/// eps_hat = (x_t - sqrt(ab) E[x0 | x_t]) / sqrt(1 - ab) under the toy model.
/// Throws InvalidArgument for t outside 1..T.
std::vector<double> analytic_eps(const ToyDataModel& model, std::span<const double> x_t, int t,
                                 const DiffusionSchedule& sched);

/// Noise predictor eps(x_t, t).
using Denoiser = std::function<std::vector<double>(std::span<const double>, int)>;
Denoiser make_analytic_denoiser(const ToyDataModel& model, const DiffusionSchedule& sched);

/// Deterministic (eta = 0) DDIM from t_start down to t_stop, visiting the
/// grid points of ddim_grid(steps) strictly between them.
/// Returns z_start unchanged when t_start == t_stop.
std::vector<double> ddim_sample(const DiffusionSchedule& sched, const Denoiser& denoiser,
                                std::span<const double> z_start, int t_start, int t_stop,
                                int steps);

/// sqrt(ab_T / ab_t) z_t + sqrt(1 - ab_T / ab_t) eps
std::vector<double> rediffuse(std::span<const double> z_t, int t, std::span<const double> eps,
                              const DiffusionSchedule& sched);

enum class RefineStrategy { none, freeinit, freqprior };
std::string_view to_string(RefineStrategy strategy);
RefineStrategy parse_refine_strategy(std::string_view name);

struct PipelineConfig {
  LatentShape shape{4, 4, 4};
  int iterations = 2;
  int mid_timestep = 321;
  int sampler_steps = 50;
  RefinementConfig refinement;
  RefineStrategy strategy = RefineStrategy::freqprior;

  void validate(const DiffusionSchedule& sched) const;
};

/// Applies the configured refinement once. `rng` supplies eta for freeinit
/// and the four internal streams for freqprior.
NoiseTensor refine_once(const NoiseTensor& z_noise, const PipelineConfig& cfg,
                        const SeededRng& rng);

struct PriorSearch {
  NoiseTensor prior;
  NoiseTensor initial_noise;
  NoiseTensor last_noisy_latent;  // z_noise of the final iteration (empty when n = 0)
  int sampled_timestep = 0;       // mid timestep after snapping to the DDIM grid
};

/// Prior search loop:
///   z_T = eps
///   repeat n times: z_t = DDIM(z_T -> t); z_noise = rediffuse(z_t, t, eps); z_T = refine(z_noise)
/// eps comes from rng.derive(0); iteration i refines with rng.derive(i + 1).
PriorSearch find_prior_traced(const PipelineConfig& cfg, const ToyDataModel& model,
                              const DiffusionSchedule& sched, const SeededRng& rng);
NoiseTensor find_prior(const PipelineConfig& cfg, const ToyDataModel& model,
                       const DiffusionSchedule& sched, const SeededRng& rng);

/// Element-averaged population moments: mean over elements of the per-element
/// sample mean and sample variance (n - 1 denominator).
struct PopulationStats {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t runs = 0;
};

class PopulationAccumulator {
 public:
  explicit PopulationAccumulator(std::size_t elements);
  void add(std::span<const double> sample);
  PopulationStats stats() const;
  std::vector<double> element_variances() const;

 private:
  std::size_t runs_ = 0;
  std::vector<double> sum_, sum_sq_;
};

struct PartialVsFullReport {
  int partial_timestep = 0;  // snapped
  PopulationStats partial_noise, full_noise;  // z_noise of the last iteration
  PopulationStats partial_prior, full_prior;  // returned priors
  double mean_discrepancy = 0.0;      // |mean(partial prior) - mean(full prior)|
  double variance_discrepancy = 0.0;  // |var(partial prior) - var(full prior)|
  double paired_rms = 0.0;            // RMS of (partial - full) over seeds and elements
};

/// Runs the prior search with cfg.mid_timestep and with t = 0 on the same
/// seeds (run r uses SeededRng(seed, r)).
PartialVsFullReport partial_vs_full_experiment(const PipelineConfig& cfg,
                                               const ToyDataModel& model,
                                               const DiffusionSchedule& sched, int n_runs,
                                               std::uint64_t seed);

/// Refinement-only loop on fresh standard-Gaussian inputs: z_0 ~ N(0, I),
/// z_{i+1} = refine(z_i) with fresh internal noise. Returns the element-averaged
/// variance after each of `iterations` refinements.
std::vector<double> variance_decay_experiment(RefineStrategy strategy, const PipelineConfig& cfg,
                                              int iterations, int n_runs, std::uint64_t seed);

}  // namespace freqprior
