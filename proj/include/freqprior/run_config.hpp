#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "freqprior/diffusion.hpp"
#include "freqprior/filters.hpp"

namespace freqprior {

/// Schema violation in a run configuration; `field` is a dotted JSON path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error("config field '" + field + "': " + message), field(std::move(field)) {}
  std::string field;
};

struct ScheduleConfig {
  int total_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int offset = 1;
};

struct ModelConfig {
  enum class Kind { seeded, isotropic } kind = Kind::seeded;
  std::uint64_t seed = 1;
};

struct VarianceDecayConfig {
  RefineStrategy strategy = RefineStrategy::freeinit;
  int iterations = 3;
  int runs = 2000;
};

struct PartialVsFullConfig {
  int runs = 2000;
  std::vector<int> timesteps{100, 321, 600};
};

/// JSON document driving `simulate`. Every key is optional; unknown keys are
/// rejected.
///
/// {
///   "seed": 42, "runs": 10000, "output_dir": "simulate_out",
///   "shape": [4, 4, 4], "strategy": "freqprior", "iterations": 2,
///   "mid_timestep": 321, "sampler_steps": 50, "cos_theta": 0.8,
///   "filter": {"kind": "butterworth", "order": 4, "cutoff": 0.25},
///   "schedule": {"total_steps": 1000, "beta_start": 1e-4, "beta_end": 0.02, "offset": 1},
///   "model": {"kind": "seeded", "seed": 1},
///   "experiments": {
///     "variance_decay": {"strategy": "freeinit", "iterations": 3, "runs": 2000},
///     "partial_vs_full": {"runs": 2000, "timesteps": [100, 321, 600]}
///   }
/// }
struct RunConfig {
  std::optional<std::uint64_t> seed;
  int runs = 10000;
  std::filesystem::path output_dir = "simulate_out";
  LatentShape shape{4, 4, 4};
  RefineStrategy strategy = RefineStrategy::freqprior;
  int iterations = 2;
  int mid_timestep = 321;
  int sampler_steps = 50;
  double cos_theta = 0.8;
  FilterSpec filter;
  ScheduleConfig schedule;
  ModelConfig model;
  std::optional<VarianceDecayConfig> variance_decay;
  std::optional<PartialVsFullConfig> partial_vs_full;

  DiffusionSchedule make_schedule() const;
  ToyDataModel make_model() const;
  PipelineConfig make_pipeline() const;
};

/// Parses and validates; throws ConfigError naming the offending field.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace freqprior
