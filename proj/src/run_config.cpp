#include "freqprior/run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <iterator>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

namespace freqprior {
namespace {

using nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void reject_unknown(const json& obj, const std::string& prefix,
                    std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) throw ConfigError(join(prefix, key), "unknown field");
  }
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void read_int(const json& obj, const std::string& prefix, const char* key, int& out, int lo,
              int hi) {
  const json* v = find(obj, key);
  if (v == nullptr) return;
  const auto field = join(prefix, key);
  if (!v->is_number_integer()) throw ConfigError(field, "must be an integer");
  const auto value = v->get<std::int64_t>();
  if (value < lo || value > hi) {
    throw ConfigError(field, fmt::format("must lie in [{}, {}], got {}", lo, hi, value));
  }
  out = static_cast<int>(value);
}

void read_u64(const json& obj, const std::string& prefix, const char* key, std::uint64_t& out) {
  const json* v = find(obj, key);
  if (v == nullptr) return;
  if (!v->is_number_unsigned()) {
    throw ConfigError(join(prefix, key), "must be a non-negative integer");
  }
  out = v->get<std::uint64_t>();
}

void read_double(const json& obj, const std::string& prefix, const char* key, double& out) {
  const json* v = find(obj, key);
  if (v == nullptr) return;
  if (!v->is_number()) throw ConfigError(join(prefix, key), "must be a number");
  out = v->get<double>();
}

std::string read_string(const json& obj, const std::string& prefix, const char* key,
                        std::string fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_string()) throw ConfigError(join(prefix, key), "must be a string");
  return v->get<std::string>();
}

const json* read_object(const json& obj, const std::string& prefix, const char* key) {
  const json* v = find(obj, key);
  if (v != nullptr && !v->is_object()) throw ConfigError(join(prefix, key), "must be an object");
  return v;
}

template <typename Parse>
auto parse_enum(const json& obj, const std::string& prefix, const char* key,
                const std::string& fallback, Parse parse) {
  const auto text = read_string(obj, prefix, key, fallback);
  try {
    return parse(text);
  } catch (const InvalidArgument& e) {
    throw ConfigError(join(prefix, key), e.what());
  }
}

constexpr int kMaxInt = std::numeric_limits<int>::max();

}  // namespace

DiffusionSchedule RunConfig::make_schedule() const {
  return freqprior::make_schedule(schedule.total_steps, schedule.beta_start, schedule.beta_end,
                                  schedule.offset);
}

ToyDataModel RunConfig::make_model() const {
  return model.kind == ModelConfig::Kind::isotropic ? ToyDataModel::isotropic(shape.count())
                                                    : ToyDataModel::seeded(shape.count(), model.seed);
}

PipelineConfig RunConfig::make_pipeline() const {
  PipelineConfig cfg;
  cfg.shape = shape;
  cfg.iterations = iterations;
  cfg.mid_timestep = mid_timestep;
  cfg.sampler_steps = sampler_steps;
  cfg.strategy = strategy;
  cfg.refinement.cos_theta = cos_theta;
  cfg.refinement.mask = build_mask(filter, shape);
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", fmt::format("invalid JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw ConfigError("<root>", "must be a JSON object");
  reject_unknown(doc, "",
                 {"seed", "runs", "output_dir", "shape", "strategy", "iterations", "mid_timestep",
                  "sampler_steps", "cos_theta", "filter", "schedule", "model", "experiments"});

  RunConfig cfg;
  if (find(doc, "seed") != nullptr) {
    std::uint64_t seed = 0;
    read_u64(doc, "", "seed", seed);
    cfg.seed = seed;
  }
  read_int(doc, "", "runs", cfg.runs, 2, kMaxInt);
  cfg.output_dir = read_string(doc, "", "output_dir", cfg.output_dir.string());

  if (const json* shape = find(doc, "shape")) {
    if (!shape->is_array() || shape->size() != 3) {
      throw ConfigError("shape", "must be an array [frames, height, width]");
    }
    std::size_t dims[3];
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& d = (*shape)[i];
      if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0) {
        throw ConfigError(fmt::format("shape[{}]", i), "must be a positive integer");
      }
      dims[i] = d.get<std::size_t>();
    }
    cfg.shape = LatentShape(dims[0], dims[1], dims[2]);
  }

  cfg.strategy = parse_enum(doc, "", "strategy", "freqprior", parse_refine_strategy);
  read_int(doc, "", "iterations", cfg.iterations, 0, kMaxInt);
  read_int(doc, "", "sampler_steps", cfg.sampler_steps, 1, kMaxInt);
  read_double(doc, "", "cos_theta", cfg.cos_theta);
  if (!(cfg.cos_theta >= 0.0 && cfg.cos_theta <= 1.0)) {
    throw ConfigError("cos_theta", fmt::format("must lie in [0, 1], got {}", cfg.cos_theta));
  }

  if (const json* filter = read_object(doc, "", "filter")) {
    reject_unknown(*filter, "filter", {"kind", "order", "cutoff"});
    cfg.filter.kind = parse_enum(*filter, "filter", "kind", "butterworth", parse_filter_kind);
    read_int(*filter, "filter", "order", cfg.filter.order, 1, 64);
    read_double(*filter, "filter", "cutoff", cfg.filter.cutoff);
    try {
      cfg.filter.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError("filter.cutoff", e.what());
    }
  }

  if (const json* sched = read_object(doc, "", "schedule")) {
    reject_unknown(*sched, "schedule", {"total_steps", "beta_start", "beta_end", "offset"});
    read_int(*sched, "schedule", "total_steps", cfg.schedule.total_steps, 1, 1000000);
    read_double(*sched, "schedule", "beta_start", cfg.schedule.beta_start);
    read_double(*sched, "schedule", "beta_end", cfg.schedule.beta_end);
    read_int(*sched, "schedule", "offset", cfg.schedule.offset, 0, cfg.schedule.total_steps);
    if (!(cfg.schedule.beta_start > 0.0 && cfg.schedule.beta_start <= cfg.schedule.beta_end &&
          cfg.schedule.beta_end < 1.0)) {
      throw ConfigError("schedule.beta_start",
                        "beta range must satisfy 0 < beta_start <= beta_end < 1");
    }
  }
  read_int(doc, "", "mid_timestep", cfg.mid_timestep, 0, cfg.schedule.total_steps);
  if (cfg.sampler_steps > cfg.schedule.total_steps) {
    throw ConfigError("sampler_steps", "must not exceed schedule.total_steps");
  }

  if (const json* model = read_object(doc, "", "model")) {
    reject_unknown(*model, "model", {"kind", "seed"});
    const auto kind = read_string(*model, "model", "kind", "seeded");
    if (kind == "seeded") {
      cfg.model.kind = ModelConfig::Kind::seeded;
    } else if (kind == "isotropic") {
      cfg.model.kind = ModelConfig::Kind::isotropic;
    } else {
      throw ConfigError("model.kind", "must be \"seeded\" or \"isotropic\"");
    }
    read_u64(*model, "model", "seed", cfg.model.seed);
  }

  if (const json* experiments = read_object(doc, "", "experiments")) {
    reject_unknown(*experiments, "experiments", {"variance_decay", "partial_vs_full"});
    if (const json* vd = read_object(*experiments, "experiments", "variance_decay")) {
      const std::string prefix = "experiments.variance_decay";
      reject_unknown(*vd, prefix, {"strategy", "iterations", "runs"});
      VarianceDecayConfig decay;
      decay.strategy = parse_enum(*vd, prefix, "strategy", "freeinit", parse_refine_strategy);
      read_int(*vd, prefix, "iterations", decay.iterations, 1, kMaxInt);
      read_int(*vd, prefix, "runs", decay.runs, 2, kMaxInt);
      cfg.variance_decay = decay;
    }
    if (const json* pf = read_object(*experiments, "experiments", "partial_vs_full")) {
      const std::string prefix = "experiments.partial_vs_full";
      reject_unknown(*pf, prefix, {"runs", "timesteps"});
      PartialVsFullConfig compare;
      read_int(*pf, prefix, "runs", compare.runs, 2, kMaxInt);
      if (const json* ts = find(*pf, "timesteps")) {
        if (!ts->is_array()) throw ConfigError(prefix + ".timesteps", "must be an array");
        compare.timesteps.clear();
        for (std::size_t i = 0; i < ts->size(); ++i) {
          const auto& t = (*ts)[i];
          const auto field = fmt::format("{}.timesteps[{}]", prefix, i);
          if (!t.is_number_integer()) throw ConfigError(field, "must be an integer");
          const auto value = t.get<std::int64_t>();
          if (value < 0 || value > cfg.schedule.total_steps) {
            throw ConfigError(field, fmt::format("must lie in [0, {}]", cfg.schedule.total_steps));
          }
          compare.timesteps.push_back(static_cast<int>(value));
        }
      }
      cfg.partial_vs_full = compare;
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", fmt::format("cannot open '{}'", path.string()));
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

}  // namespace freqprior
