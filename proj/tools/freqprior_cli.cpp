// freqprior: command-line front end.
//
// Exit codes: 0 success, 1 a property or consistency check failed,
// 2 usage, configuration or input error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "freqprior/covariance.hpp"
#include "freqprior/diffusion.hpp"
#include "freqprior/properties.hpp"
#include "freqprior/run_config.hpp"
#include "freqprior/table1.hpp"
#include "freqprior/tensor_io.hpp"

namespace fp = freqprior;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

// Resolves --seed; an omitted seed is drawn from the OS and logged so the run
// can be repeated.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& requested) {
  std::uint64_t seed = 0;
  if (requested) {
    seed = *requested;
  } else {
    std::random_device rd;
    seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  fmt::print(stderr, "seed: {}{}\n", seed, requested ? "" : " (random)");
  return seed;
}

std::vector<fp::LatentShape> parse_shapes(const std::vector<std::string>& items) {
  std::vector<fp::LatentShape> shapes;
  for (const auto& s : items) shapes.push_back(fp::LatentShape::parse(s));
  return shapes;
}

// Writes to `path`, or stdout when path is "-".
void emit(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw fp::InvalidArgument(fmt::format("cannot open '{}' for writing", path));
  out << text;
}

struct FilterFlags {
  std::string kind = "butterworth";
  double cutoff = 0.25;
  int order = 4;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--filter", kind, "butterworth | gaussian | ideal")->capture_default_str();
    cmd->add_option("--cutoff", cutoff, "normalized cutoff in (0, sqrt(3)]")->capture_default_str();
    cmd->add_option("--order", order, "butterworth order")->capture_default_str();
  }
  fp::FilterSpec spec() const {
    fp::FilterSpec s{fp::parse_filter_kind(kind), cutoff, order};
    s.validate();
    return s;
  }
};

struct Table1Args {
  std::optional<std::uint64_t> seed;
  std::vector<std::string> shapes{"16x20x20", "16x30x30", "16x40x40"};
  std::vector<std::string> filters{"butterworth", "gaussian"};
  int order = 4;
  double cutoff = 0.25;
  double cos_theta = 0.8;
  unsigned threads = 0;
  std::string output = "-";
  bool no_timing = false;
};

int run_table1(const Table1Args& args) {
  resolve_seed(args.seed);
  fp::Table1Options options;
  options.shapes = parse_shapes(args.shapes);
  options.filters.clear();
  for (const auto& f : args.filters) options.filters.push_back(fp::parse_filter_kind(f));
  options.order = args.order;
  options.cutoff = args.cutoff;
  options.cos_theta = args.cos_theta;
  options.threads = args.threads;
  fp::FilterSpec{fp::FilterKind::butterworth, args.cutoff, args.order}.validate();

  const auto result = fp::run_table1(options);
  std::string csv = fp::csv_header() + "\n";
  for (const auto& row : result.rows) csv += fp::to_csv_row(row, !args.no_timing) + "\n";
  emit(args.output, csv);
  for (const auto& check : result.checks) {
    fmt::print(stderr, "{} {}: {}\n", check.passed ? "PASS" : "FAIL", check.name, check.detail);
  }
  return result.consistent() ? kExitOk : kExitCheckFailed;
}

struct VerifyArgs {
  std::optional<std::uint64_t> seed;
  int samples = 200000;
  bool break_highpass = false;
};

int run_verify(const VerifyArgs& args) {
  fp::VerifyOptions options;
  options.seed = resolve_seed(args.seed);
  options.samples = args.samples;
  options.break_highpass = args.break_highpass;
  const auto results = fp::run_property_suite(options);
  int failed = 0;
  for (const auto& r : results) {
    fmt::print("{} {}: {}\n", r.passed ? "PASS" : "FAIL", r.name, r.detail);
    if (!r.passed) ++failed;
  }
  fmt::print("{}/{} properties passed\n", results.size() - failed, results.size());
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

struct RefineArgs {
  std::optional<std::uint64_t> seed;
  std::string input;
  std::string shape = "4x4x4";
  std::string output;
  std::string method = "freqprior";
  double cos_theta = 0.8;
  FilterFlags filter;
};

int run_refine(const RefineArgs& args) {
  const std::uint64_t seed = resolve_seed(args.seed);
  const fp::SeededRng rng(seed);
  fp::NoiseTensor z;
  if (args.input.empty()) {
    fp::SeededRng draw = rng.derive(0);
    z = fp::sample_gaussian(fp::LatentShape::parse(args.shape), draw);
  } else {
    z = fp::read_tensor(args.input);
  }
  const fp::FilterMask mask = fp::build_mask(args.filter.spec(), z.shape());

  fp::NoiseTensor out;
  if (args.method == "freqprior") {
    fp::RefinementConfig cfg;
    cfg.cos_theta = args.cos_theta;
    cfg.mask = mask;
    out = fp::freqprior_refine(z, cfg, rng.derive(1));
  } else if (args.method == "freeinit") {
    fp::SeededRng eta_rng = rng.derive(1);
    out = fp::freeinit_refine(z, fp::sample_gaussian(z.shape(), eta_rng), mask);
  } else {
    throw fp::InvalidArgument(
        fmt::format("unknown method '{}', expected freqprior or freeinit", args.method));
  }
  fp::write_tensor(args.output, out, seed);
  fmt::print("refined {} tensor {} -> {}\n", args.method, z.shape().to_string(), args.output);
  return kExitOk;
}

struct MaskArgs {
  std::optional<std::uint64_t> seed;
  std::string shape = "16x20x20";
  std::string output;
  std::string component = "lowpass";
  FilterFlags filter;
};

int run_mask(const MaskArgs& args) {
  resolve_seed(args.seed);
  const fp::LatentShape shape = fp::LatentShape::parse(args.shape);
  fp::FilterMask mask = fp::build_mask(args.filter.spec(), shape);
  if (args.component == "energy") {
    mask = fp::highpass_energy(mask);
  } else if (args.component == "classic") {
    mask = fp::highpass_classic(mask);
  } else if (args.component != "lowpass") {
    throw fp::InvalidArgument(fmt::format(
        "unknown component '{}', expected lowpass, energy or classic", args.component));
  }
  fp::write_tensor(args.output, mask.values());
  fmt::print("{} {} mask {} -> {}\n", args.filter.spec().describe(), args.component,
             shape.to_string(), args.output);
  return kExitOk;
}

struct CovarianceArgs {
  std::optional<std::uint64_t> seed;
  std::string prior = "freeinit";
  std::string shape = "16x20x20";
  std::string method = "matrix_free";
  double cos_theta = 0.8;
  unsigned threads = 0;
  bool no_timing = false;
  FilterFlags filter;
};

int run_covariance(const CovarianceArgs& args) {
  resolve_seed(args.seed);
  fp::PriorDistribution dist;
  dist.kind = fp::parse_prior_kind(args.prior);
  dist.shape = fp::LatentShape::parse(args.shape);
  if (dist.kind == fp::PriorKind::freeinit || dist.kind == fp::PriorKind::freqprior) {
    dist.filter = args.filter.spec();
  }
  if (dist.kind == fp::PriorKind::freqprior) dist.cos_theta = args.cos_theta;

  fp::CovarianceReport report;
  if (args.method == "dense") {
    report = fp::covariance_error_dense(dist);
  } else if (args.method == "matrix_free") {
    report = fp::covariance_error_matrix_free(dist, {args.threads});
  } else if (args.method == "analytic") {
    report = fp::covariance_error_analytic(dist);
  } else {
    throw fp::InvalidArgument(fmt::format(
        "unknown method '{}', expected dense, matrix_free or analytic", args.method));
  }
  fmt::print("{}\n{}\n", fp::csv_header(), fp::to_csv_row(report, !args.no_timing));
  return kExitOk;
}

struct SimulateArgs {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string output_dir;
};

std::string stats_fields(const fp::PopulationStats& s) {
  return fmt::format("{:.12g},{:.12g}", s.mean, s.variance);
}

int run_simulate(const SimulateArgs& args) {
  const fp::RunConfig config = fp::load_run_config(args.config);
  const std::uint64_t seed = resolve_seed(args.seed ? args.seed : config.seed);
  const std::filesystem::path dir = 
      args.output_dir.empty() ? config.output_dir : std::filesystem::path(args.output_dir);
  std::filesystem::create_directories(dir);

  const fp::DiffusionSchedule sched = config.make_schedule();
  const fp::ToyDataModel model = config.make_model();
  const fp::PipelineConfig pipeline = config.make_pipeline();
  pipeline.validate(sched);

  const auto prior = fp::find_prior(pipeline, model, sched, fp::SeededRng(seed));
  fp::write_tensor(dir / "prior.nprt", prior, seed);

  fp::PopulationAccumulator population(pipeline.shape.count());
  for (int r = 0; r < config.runs; ++r) {
    const auto p = fp::find_prior(pipeline, model, sched,
                                  fp::SeededRng(seed, static_cast<std::uint64_t>(r) + 1));
    population.add(p.values());
  }
  const auto stats = population.stats();
  emit((dir / "find_prior.csv").string(),
       fmt::format("strategy,iterations,mid_timestep,runs,mean,variance\n{},{},{},{},{}\n",
                   fp::to_string(pipeline.strategy), pipeline.iterations, pipeline.mid_timestep,
                   stats.runs, stats_fields(stats)));
  fmt::print("find_prior: strategy={} iterations={} t={} runs={} mean={:.5f} variance={:.5f}\n",
             fp::to_string(pipeline.strategy), pipeline.iterations, pipeline.mid_timestep,
             stats.runs, stats.mean, stats.variance);

  if (config.variance_decay) {
    const auto& vd = *config.variance_decay;
    const auto series = fp::variance_decay_experiment(vd.strategy, pipeline, vd.iterations,
                                                      vd.runs, seed);
    std::string csv = "iteration,variance\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
      csv += fmt::format("{},{:.12g}\n", i + 1, series[i]);
    }
    emit((dir / "variance_decay.csv").string(), csv);
    std::string listed;
    for (double v : series) listed += fmt::format("{}{:.5f}", listed.empty() ? "" : " ", v);
    fmt::print("variance_decay: strategy={} runs={} variance=[{}]\n", fp::to_string(vd.strategy),
               vd.runs, listed);
  }

  if (config.partial_vs_full) {
    const auto& pf = *config.partial_vs_full;
    std::string csv =
        "timestep,snapped,partial_noise_mean,partial_noise_variance,full_noise_mean,"
        "full_noise_variance,partial_prior_mean,partial_prior_variance,full_prior_mean,"
        "full_prior_variance,mean_discrepancy,variance_discrepancy,paired_rms\n";
    for (const int t : pf.timesteps) {
      fp::PipelineConfig cfg = pipeline;
      cfg.mid_timestep = t;
      const auto rep = fp::partial_vs_full_experiment(cfg, model, sched, pf.runs, seed);
      csv += fmt::format("{},{},{},{},{},{},{:.12g},{:.12g},{:.12g}\n", t, rep.partial_timestep,
                         stats_fields(rep.partial_noise), stats_fields(rep.full_noise),
                         stats_fields(rep.partial_prior), stats_fields(rep.full_prior),
                         rep.mean_discrepancy, rep.variance_discrepancy, rep.paired_rms);
      fmt::print(
          "partial_vs_full: t={} (grid {}) runs={} noise variance {:.5f} vs {:.5f}, prior "
          "variance {:.5f} vs {:.5f}, paired rms {:.5f}\n",
          t, rep.partial_timestep, pf.runs, rep.partial_noise.variance, rep.full_noise.variance,
          rep.partial_prior.variance, rep.full_prior.variance, rep.paired_rms);
    }
    emit((dir / "partial_vs_full.csv").string(), csv);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-domain noise priors: covariance analysis and toy diffusion pipeline"};
  app.require_subcommand(1);

  Table1Args table1;
  auto* t1 = app.add_subcommand("table1", "covariance-error grid over shapes, filters and priors");
  t1->add_option("--seed", table1.seed, "accepted for uniformity; table1 is deterministic");
  t1->add_option("--shapes", table1.shapes, "shapes as FxHxW")->delimiter(',')->capture_default_str();
  t1->add_option("--filters", table1.filters, "filter kinds")->delimiter(',')->capture_default_str();
  t1->add_option("--order", table1.order, "butterworth order")->capture_default_str();
  t1->add_option("--cutoff", table1.cutoff, "normalized cutoff")->capture_default_str();
  t1->add_option("--cos-theta", table1.cos_theta, "freqprior mixing cosine")->capture_default_str();
  t1->add_option("--threads", table1.threads, "matrix-free worker threads (0 = all cores)");
  t1->add_option("--output,-o", table1.output, "CSV path, '-' for stdout")->capture_default_str();
  t1->add_flag("--no-timing", table1.no_timing, "leave the seconds column empty");

  VerifyArgs verify;
  auto* vf = app.add_subcommand("verify", "run the property suite");
  vf->add_option("--seed", verify.seed, "seed for random trials and Monte Carlo");
  vf->add_option("--samples", verify.samples, "Monte Carlo samples")->capture_default_str()
      ->check(CLI::Range(2, 100000000));
  vf->add_flag("--break-highpass", verify.break_highpass,
               "negative control: use 1 - M as the freqprior high-pass");

  RefineArgs refine;
  auto* rf = app.add_subcommand("refine", "refine one noise tensor");
  rf->add_option("--seed", refine.seed, "seed for the input draw and refinement noise");
  rf->add_option("--input,-i", refine.input, "input tensor; omitted draws N(0, I) of --shape");
  rf->add_option("--shape", refine.shape, "shape when drawing the input")->capture_default_str();
  rf->add_option("--output,-o", refine.output, "output tensor path")->required();
  rf->add_option("--method", refine.method, "freqprior | freeinit")->capture_default_str();
  rf->add_option("--cos-theta", refine.cos_theta, "freqprior mixing cosine")->capture_default_str();
  refine.filter.add_to(rf);

  MaskArgs mask;
  auto* mk = app.add_subcommand("mask", "export a filter mask as a tensor file");
  mk->add_option("--seed", mask.seed, "accepted for uniformity; masks are deterministic");
  mk->add_option("--shape", mask.shape, "mask shape FxHxW")->capture_default_str();
  mk->add_option("--output,-o", mask.output, "output tensor path")->required();
  mk->add_option("--component", mask.component, "lowpass | energy | classic")->capture_default_str();
  mask.filter.add_to(mk);

  CovarianceArgs cov;
  auto* cv = app.add_subcommand("covariance", "covariance error of one prior");
  cv->add_option("--seed", cov.seed, "accepted for uniformity; results are deterministic");
  cv->add_option("--prior", cov.prior, "gaussian | mixed | freeinit | freqprior")->capture_default_str();
  cv->add_option("--shape", cov.shape, "shape FxHxW")->capture_default_str();
  cv->add_option("--method", cov.method, "dense | matrix_free | analytic")->capture_default_str();
  cv->add_option("--cos-theta", cov.cos_theta, "freqprior mixing cosine")->capture_default_str();
  cv->add_option("--threads", cov.threads, "matrix-free worker threads (0 = all cores)");
  cv->add_flag("--no-timing", cov.no_timing, "leave the seconds column empty");
  cov.filter.add_to(cv);

  SimulateArgs sim;
  auto* sm = app.add_subcommand("simulate", "run the prior search and experiments from a config");
  sm->add_option("--seed", sim.seed, "overrides the config seed");
  sm->add_option("--config,-c", sim.config, "JSON run configuration")->required();
  sm->add_option("--output-dir", sim.output_dir, "overrides the config output_dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*t1) return run_table1(table1);
    if (*vf) return run_verify(verify);
    if (*rf) return run_refine(refine);
    if (*mk) return run_mask(mask);
    if (*cv) return run_covariance(cov);
    if (*sm) return run_simulate(sim);
  } catch (const fp::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitUsage;
  } catch (const fp::TensorIoError& e) {
    fmt::print(stderr, "tensor file error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "invalid argument: {}\n", e.what());
    return kExitUsage;
  } catch (const fp::ResourceLimitError& e) {
    fmt::print(stderr, "resource limit: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitCheckFailed;
  }
  return kExitUsage;
}
