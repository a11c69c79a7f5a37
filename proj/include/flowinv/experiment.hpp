#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flowinv/checkpoint.hpp"
#include "flowinv/config.hpp"
#include "flowinv/dataset.hpp"
#include "flowinv/hash.hpp"
#include "flowinv/metrics.hpp"
#include "flowinv/noise.hpp"
#include "flowinv/report.hpp"
#include "flowinv/solve.hpp"
#include "flowinv/theory.hpp"
#include "flowinv/train.hpp"

namespace flowinv {

enum class ExperimentKind {
  denoise_flow_noise,
  denoise_sinusoidal,
  denoise_radial,
  cs_noisy,
  cs_1bit,
  theorem,
};

inline ExperimentKind experiment_kind_from_string(const std::string& name) {
  if (name == "denoise_flow_noise") return ExperimentKind::denoise_flow_noise;
  if (name == "denoise_sinusoidal") return ExperimentKind::denoise_sinusoidal;
  if (name == "denoise_radial") return ExperimentKind::denoise_radial;
  if (name == "cs_noisy") return ExperimentKind::cs_noisy;
  if (name == "cs_1bit") return ExperimentKind::cs_1bit;
  if (name == "theorem") return ExperimentKind::theorem;
  throw ConfigError("experiment.kind: unknown experiment `" + name + "`");
}

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::denoise_flow_noise: return "denoise_flow_noise";
    case ExperimentKind::denoise_sinusoidal: return "denoise_sinusoidal";
    case ExperimentKind::denoise_radial: return "denoise_radial";
    case ExperimentKind::cs_noisy: return "cs_noisy";
    case ExperimentKind::cs_1bit: return "cs_1bit";
    case ExperimentKind::theorem: return "theorem";
  }
  return "?";
}

struct TrainSettings {
  TrainConfig config;
  std::size_t layers = 8;
  std::size_t hidden = 64;
  double s_clamp = 3.0;
};

struct TheoremSettings {
  AnalyticPrior::Kind prior = AnalyticPrior::Kind::gaussian;
  std::size_t dim = 2;
  double tau = 1.0;
  double a = 1.0;
  double b = 0.1;
  std::vector<double> sigmas = {0.3, 1.0, 3.0};
  std::vector<double> delta_scales = {0.5, 1.0, 2.0};
  std::size_t trials = 100;
  double tol = 1e-10;
};

/// Fully resolved experiment description (config file + defaults + flags).
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::denoise_sinusoidal;
  std::size_t instances = 20;
  std::vector<SolveMethod> methods = {SolveMethod::map};
  std::uint64_t seed = 0;
  std::string out_dir;
  bool ood = false;
  std::size_t workers = 1;

  // data
  bool synth = true;
  SynthKind synth_kind = SynthKind::blobs8x8;
  std::size_t synth_n = 0;  // 0: one pool row per instance
  std::string data_path;

  // priors
  std::string signal_checkpoint;
  std::string noise_checkpoint;
  double noise_prior_shift = 0.0;
  double noise_prior_scale = 1.0;

  // operator
  std::size_t measurements = 32;
  double scale_factor = 0.5;

  // noise
  double amplitude = 0.1;
  double noise_mean = 0.0;

  std::map<SolveMethod, SolveConfig> solve_configs;
  TrainSettings train;
  TheoremSettings theorem;
};

namespace detail {

struct MethodDefaults {
  std::size_t steps;
  double beta;
  double gamma;
  double lambda_bora;
};

inline MethodDefaults method_defaults(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::denoise_flow_noise: return {400, 1.0, 0.0, 0.01};
    case ExperimentKind::cs_noisy: return {300, 100.0, 10.0, 0.001};
    case ExperimentKind::denoise_sinusoidal: return {150, 0.5, 2.0, 0.01};
    case ExperimentKind::denoise_radial: return {150, 0.5, 2.0, 0.01};
    case ExperimentKind::cs_1bit: return {200, 1.0, 1.0, 0.01};
    case ExperimentKind::theorem: return {1, 0.0, 0.0, 0.0};
  }
  return {400, 1.0, 0.0, 0.01};
}

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"experiment",
       {"kind", "instances", "methods", "seed", "out", "ood", "workers"}},
      {"data", {"source", "path", "synth_kind", "synth_n"}},
      {"signal_prior", {"checkpoint"}},
      {"noise_prior", {"checkpoint", "shift", "scale"}},
      {"operator", {"measurements", "scale_c"}},
      {"noise", {"amplitude", "mean"}},
      {"solve",
       {"steps", "lr", "beta", "gamma", "lambda", "z_init", "z_init_std",
        "latent_ball_radius", "restarts", "optimize_in_x", "steps_map",
        "steps_mle", "steps_bora", "steps_hand", "steps_lasso_dct",
        "lambda_bora", "lambda_lasso_dct"}},
      {"train",
       {"epochs", "batch_size", "lr", "lr_halving_period", "max_grad_norm", "seed",
        "layers", "hidden", "s_clamp", "workers"}},
      {"theorem",
       {"prior", "dim", "tau", "a", "b", "sigmas", "delta_scales", "trials", "tol"}},
      {"sweep", {"axis", "values"}},
  };
  return schema;
}

inline std::size_t require_positive(long long v, const std::string& field) {
  if (v < 1) throw ConfigError(field + ": must be >= 1");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Parses, validates, and resolves a configuration into an ExperimentSpec.
/// Unknown sections/fields, bad enums, and missing referenced files are
/// reported as ConfigError with the offending field path.
inline ExperimentSpec load_experiment_spec(const ConfigFile& cfg) {
  cfg.validate_known(detail::config_schema());

  ExperimentSpec spec;
  spec.kind = experiment_kind_from_string(cfg.get_string("experiment", "kind", "denoise_sinusoidal"));
  spec.instances = detail::require_positive(
      cfg.get_int("experiment", "instances", 20), "experiment.instances");
  spec.seed = static_cast<std::uint64_t>(cfg.get_int("experiment", "seed", 0));
  spec.out_dir = cfg.get_string("experiment", "out",
                                std::string("runs/") + to_string(spec.kind));
  spec.ood = cfg.get_bool("experiment", "ood", false);
  spec.workers = detail::require_positive(cfg.get_int("experiment", "workers", 1),
                                          "experiment.workers");

  spec.methods.clear();
  for (const auto& name : cfg.get_string_list("experiment", "methods", {"map"})) {
    try {
      spec.methods.push_back(solve_method_from_string(name));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("experiment.methods: " + std::string(e.what()));
    }
  }
  if (spec.methods.empty())
    throw ConfigError("experiment.methods: at least one method required");

  std::string source = cfg.get_string("data", "source", "synth");
  if (source == "synth") {
    spec.synth = true;
    std::string kind_name = cfg.get_string("data", "synth_kind", "blobs8x8");
    try {
      spec.synth_kind = synth_kind_from_string(kind_name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("data.synth_kind: " + std::string(e.what()));
    }
    long long n = cfg.get_int("data", "synth_n", 0);
    if (n < 0) throw ConfigError("data.synth_n: must be >= 0");
    spec.synth_n = static_cast<std::size_t>(n);
  } else if (source == "file") {
    spec.synth = false;
    spec.data_path = cfg.require_string("data", "path");
    if (!std::filesystem::exists(spec.data_path))
      throw ConfigError("data.path: file not found: " + spec.data_path);
  } else {
    throw ConfigError("data.source: expected `synth` or `file`, got `" + source + "`");
  }

  spec.signal_checkpoint = cfg.get_string("signal_prior", "checkpoint", "");
  if (!spec.signal_checkpoint.empty() &&
      !std::filesystem::exists(spec.signal_checkpoint))
    throw ConfigError("signal_prior.checkpoint: file not found: " +
                      spec.signal_checkpoint);
  spec.noise_checkpoint = cfg.get_string("noise_prior", "checkpoint", "");
  if (!spec.noise_checkpoint.empty() &&
      !std::filesystem::exists(spec.noise_checkpoint))
    throw ConfigError("noise_prior.checkpoint: file not found: " +
                      spec.noise_checkpoint);
  spec.noise_prior_shift = cfg.get_double("noise_prior", "shift", 0.0);
  spec.noise_prior_scale = cfg.get_double("noise_prior", "scale", 1.0);
  if (spec.noise_prior_scale <= 0.0)
    throw ConfigError("noise_prior.scale: must be > 0");

  spec.measurements = detail::require_positive(
      cfg.get_int("operator", "measurements", 32), "operator.measurements");
  spec.scale_factor = cfg.get_double("operator", "scale_c", 0.5);

  spec.amplitude = cfg.get_double("noise", "amplitude", 0.1);
  if (spec.amplitude < 0.0) throw ConfigError("noise.amplitude: must be >= 0");
  spec.noise_mean = cfg.get_double("noise", "mean", 0.0);

  // Per-method solve configs: appendix defaults by experiment, overridable.
  detail::MethodDefaults defaults = detail::method_defaults(spec.kind);
  for (SolveMethod m : {SolveMethod::map, SolveMethod::mle, SolveMethod::bora,
                        SolveMethod::hand, SolveMethod::lasso_dct}) {
    SolveConfig sc;
    sc.method = m;
    bool slow_method = m == SolveMethod::mle || m == SolveMethod::bora ||
                       m == SolveMethod::lasso_dct;
    sc.steps = slow_method ? 1000 : defaults.steps;
    sc.lr = cfg.get_double("solve", "lr", 0.02);
    sc.beta = cfg.get_double("solve", "beta", defaults.beta);
    sc.gamma = cfg.get_double("solve", "gamma", defaults.gamma);
    double lambda_default = m == SolveMethod::bora ? defaults.lambda_bora : 0.01;
    sc.lambda = cfg.get_double("solve", "lambda", lambda_default);
    std::string override_key = std::string("lambda_") + to_string(m);
    if (cfg.has("solve", override_key))
      sc.lambda = cfg.get_double("solve", override_key, sc.lambda);
    if (cfg.has("solve", "steps"))
      sc.steps = detail::require_positive(cfg.get_int("solve", "steps", 0), "solve.steps");
    std::string steps_key = std::string("steps_") + to_string(m);
    if (cfg.has("solve", steps_key))
      sc.steps = detail::require_positive(cfg.get_int("solve", steps_key, 0),
                                          "solve." + steps_key);
    std::string z_init = cfg.get_string("solve", "z_init", "zero");
    if (z_init == "zero") sc.z_init = SolveConfig::ZInit::zero;
    else if (z_init == "gaussian") sc.z_init = SolveConfig::ZInit::gaussian;
    else throw ConfigError("solve.z_init: expected `zero` or `gaussian`");
    sc.z_init_std = cfg.get_double("solve", "z_init_std", 0.1);
    sc.latent_ball_radius = cfg.get_double("solve", "latent_ball_radius", 0.0);
    sc.restarts = detail::require_positive(cfg.get_int("solve", "restarts", 1),
                                           "solve.restarts");
    sc.optimize_in_x = cfg.get_bool("solve", "optimize_in_x", false);
    if (sc.beta < 0.0 || sc.gamma < 0.0 || sc.lambda < 0.0)
      throw ConfigError("solve: beta, gamma, lambda must be >= 0");
    spec.solve_configs[m] = sc;
  }

  spec.train.config.epochs = static_cast<std::size_t>(
      std::max<long long>(0, cfg.get_int("train", "epochs", 150)));
  spec.train.config.batch_size = detail::require_positive(
      cfg.get_int("train", "batch_size", 128), "train.batch_size");
  spec.train.config.lr = cfg.get_double("train", "lr", 1e-3);
  spec.train.config.lr_halving_period = detail::require_positive(
      cfg.get_int("train", "lr_halving_period", 60), "train.lr_halving_period");
  spec.train.config.max_grad_norm = cfg.get_double("train", "max_grad_norm", 100.0);
  spec.train.config.seed = static_cast<std::uint64_t>(cfg.get_int("train", "seed", 1));
  spec.train.config.workers = detail::require_positive(
      cfg.get_int("train", "workers", 1), "train.workers");
  spec.train.layers = detail::require_positive(cfg.get_int("train", "layers", 8),
                                               "train.layers");
  spec.train.hidden = detail::require_positive(cfg.get_int("train", "hidden", 64),
                                               "train.hidden");
  spec.train.s_clamp = cfg.get_double("train", "s_clamp", 3.0);

  std::string prior_name = cfg.get_string("theorem", "prior", "gaussian");
  if (prior_name == "gaussian") spec.theorem.prior = AnalyticPrior::Kind::gaussian;
  else if (prior_name == "quartic") spec.theorem.prior = AnalyticPrior::Kind::quartic;
  else throw ConfigError("theorem.prior: expected `gaussian` or `quartic`");
  spec.theorem.dim = detail::require_positive(cfg.get_int("theorem", "dim", 2),
                                              "theorem.dim");
  spec.theorem.tau = cfg.get_double("theorem", "tau", 1.0);
  spec.theorem.a = cfg.get_double("theorem", "a", 1.0);
  spec.theorem.b = cfg.get_double("theorem", "b", 0.1);
  if (cfg.has("theorem", "sigmas")) spec.theorem.sigmas = cfg.get_double_list("theorem", "sigmas");
  if (cfg.has("theorem", "delta_scales"))
    spec.theorem.delta_scales = cfg.get_double_list("theorem", "delta_scales");
  spec.theorem.trials = detail::require_positive(cfg.get_int("theorem", "trials", 100),
                                                 "theorem.trials");
  spec.theorem.tol = cfg.get_double("theorem", "tol", 1e-10);

  if (spec.kind == ExperimentKind::cs_1bit)
    for (SolveMethod m : spec.methods)
      if (m == SolveMethod::lasso_dct)
        throw ConfigError(
            "experiment.methods: lasso_dct cannot run with the sign operator of cs_1bit");

  return spec;
}

/// Renders the fully-resolved spec back to config syntax (--print-config).
inline std::string render_spec(const ExperimentSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << "[experiment]\n";
  os << "kind = " << to_string(spec.kind) << "\n";
  os << "instances = " << spec.instances << "\n";
  os << "methods = ";
  for (std::size_t i = 0; i < spec.methods.size(); ++i)
    os << (i ? "," : "") << to_string(spec.methods[i]);
  os << "\n";
  os << "seed = " << spec.seed << "\n";
  os << "out = " << spec.out_dir << "\n";
  os << "ood = " << (spec.ood ? "true" : "false") << "\n";
  os << "workers = " << spec.workers << "\n\n";
  os << "[data]\n";
  if (spec.synth) {
    os << "source = synth\nsynth_kind = " << to_string(spec.synth_kind)
       << "\nsynth_n = " << spec.synth_n << "\n\n";
  } else {
    os << "source = file\npath = " << spec.data_path << "\n\n";
  }
  if (!spec.signal_checkpoint.empty())
    os << "[signal_prior]\ncheckpoint = " << spec.signal_checkpoint << "\n\n";
  if (!spec.noise_checkpoint.empty())
    os << "[noise_prior]\ncheckpoint = " << spec.noise_checkpoint
       << "\nshift = " << spec.noise_prior_shift
       << "\nscale = " << spec.noise_prior_scale << "\n\n";
  os << "[operator]\nmeasurements = " << spec.measurements
     << "\nscale_c = " << spec.scale_factor << "\n\n";
  os << "[noise]\namplitude = " << spec.amplitude << "\nmean = " << spec.noise_mean
     << "\n\n";
  os << "[solve]\n";
  for (SolveMethod m : spec.methods) {
    const SolveConfig& sc = spec.solve_configs.at(m);
    os << "steps_" << to_string(m) << " = " << sc.steps << "\n";
  }
  const SolveConfig& base = spec.solve_configs.begin()->second;
  os << "lr = " << base.lr << "\nbeta = " << spec.solve_configs.at(SolveMethod::map).beta
     << "\ngamma = " << spec.solve_configs.at(SolveMethod::hand).gamma
     << "\nlambda = " << spec.solve_configs.at(SolveMethod::bora).lambda
     << "\nz_init = " << (base.z_init == SolveConfig::ZInit::zero ? "zero" : "gaussian")
     << "\nz_init_std = " << base.z_init_std
     << "\nlatent_ball_radius = " << base.latent_ball_radius
     << "\nrestarts = " << base.restarts
     << "\noptimize_in_x = " << (base.optimize_in_x ? "true" : "false") << "\n\n";
  os << "[train]\nepochs = " << spec.train.config.epochs
     << "\nbatch_size = " << spec.train.config.batch_size
     << "\nlr = " << spec.train.config.lr
     << "\nlr_halving_period = " << spec.train.config.lr_halving_period
     << "\nmax_grad_norm = " << spec.train.config.max_grad_norm
     << "\nseed = " << spec.train.config.seed
     << "\nworkers = " << spec.train.config.workers
     << "\nlayers = " << spec.train.layers << "\nhidden = " << spec.train.hidden
     << "\ns_clamp = " << spec.train.s_clamp << "\n\n";
  os << "[theorem]\nprior = "
     << (spec.theorem.prior == AnalyticPrior::Kind::gaussian ? "gaussian" : "quartic")
     << "\ndim = " << spec.theorem.dim << "\ntau = " << spec.theorem.tau
     << "\na = " << spec.theorem.a << "\nb = " << spec.theorem.b << "\nsigmas = ";
  for (std::size_t i = 0; i < spec.theorem.sigmas.size(); ++i)
    os << (i ? "," : "") << spec.theorem.sigmas[i];
  os << "\ndelta_scales = ";
  for (std::size_t i = 0; i < spec.theorem.delta_scales.size(); ++i)
    os << (i ? "," : "") << spec.theorem.delta_scales[i];
  os << "\ntrials = " << spec.theorem.trials << "\ntol = " << spec.theorem.tol << "\n";
  return os.str();
}

namespace detail {

// Stream tags for per-instance derivations; fixed so paired sweeps reuse
// identical draws across axis values.
inline constexpr std::uint64_t kPoolTag = 7;
inline constexpr std::uint64_t kOperatorTag = 0x10000;
inline constexpr std::uint64_t kNoiseTag = 0x20000;
inline constexpr std::uint64_t kSolveTag = 0x30000;

inline Dataset experiment_pool(const ExperimentSpec& spec) {
  if (!spec.synth) return load_dataset(spec.data_path);
  std::size_t n = spec.synth_n > 0 ? spec.synth_n : spec.instances;
  RngStream rng = RngStream(spec.seed).derive(kPoolTag);
  return synth_dataset(spec.synth_kind, n, rng);
}

struct ExperimentContext {
  Dataset pool;
  SignalGeometry geom;
  std::shared_ptr<const FlowModel> signal_prior;  // may be null (lasso only)
  std::shared_ptr<const FlowModel> noise_prior;   // flow-noise experiments
};

inline bool needs_signal_prior(const ExperimentSpec& spec) {
  for (SolveMethod m : spec.methods)
    if (m != SolveMethod::lasso_dct) return true;
  return false;
}

inline ExperimentContext load_context(const ExperimentSpec& spec) {
  ExperimentContext ctx;
  ctx.pool = experiment_pool(spec);
  ctx.geom = SignalGeometry{ctx.pool.height, ctx.pool.width, ctx.pool.channels};
  if (needs_signal_prior(spec)) {
    if (spec.signal_checkpoint.empty())
      throw ConfigError("signal_prior.checkpoint: required by the selected methods");
    auto model = std::make_shared<FlowModel>(checkpoint_load(spec.signal_checkpoint));
    if (model->d != ctx.pool.d())
      throw ConfigError("signal_prior.checkpoint: model dimension " +
                        std::to_string(model->d) + " does not match data dimension " +
                        std::to_string(ctx.pool.d()));
    ctx.signal_prior = std::move(model);
  }
  if (spec.kind == ExperimentKind::denoise_flow_noise) {
    if (spec.noise_checkpoint.empty())
      throw ConfigError("noise_prior.checkpoint: required for denoise_flow_noise");
    ctx.noise_prior = std::make_shared<FlowModel>(checkpoint_load(spec.noise_checkpoint));
    if (ctx.noise_prior->d != ctx.pool.d())
      throw ConfigError("noise_prior.checkpoint: model dimension does not match data");
  }
  return ctx;
}

/// Observation-space operator for one instance.
inline ForwardOperator instance_operator(const ExperimentSpec& spec,
                                         const ExperimentContext& ctx,
                                         std::size_t instance) {
  const std::size_t d = ctx.pool.d();
  switch (spec.kind) {
    case ExperimentKind::denoise_flow_noise:
      return ForwardOperator::scale(d, spec.scale_factor);
    case ExperimentKind::denoise_sinusoidal:
    case ExperimentKind::denoise_radial:
      return ForwardOperator::identity(d);
    case ExperimentKind::cs_noisy:
    case ExperimentKind::cs_1bit: {
      RngStream rng = RngStream(spec.seed).derive(kOperatorTag + instance);
      Tensor A = random_measurement_matrix(spec.measurements, d, rng);
      return spec.kind == ExperimentKind::cs_noisy
                 ? ForwardOperator::linear(std::move(A))
                 : ForwardOperator::sign_of_linear(std::move(A));
    }
    case ExperimentKind::theorem:
      break;
  }
  throw ConfigError("experiment.kind: no observation pipeline for this kind");
}

inline NoiseModel experiment_noise(const ExperimentSpec& spec,
                                   const ExperimentContext& ctx,
                                   std::size_t observation_dim) {
  switch (spec.kind) {
    case ExperimentKind::denoise_flow_noise:
      return NoiseModel::flow_noise(ctx.noise_prior, spec.noise_prior_shift,
                                    spec.noise_prior_scale);
    case ExperimentKind::denoise_sinusoidal:
      return NoiseModel::diag_gauss(
          sinusoidal_sigma_image(ctx.pool.height, ctx.pool.width, ctx.pool.channels,
                                 spec.amplitude),
          spec.noise_mean);
    case ExperimentKind::denoise_radial:
      return NoiseModel::diag_gauss(
          radial_sigma_image(ctx.pool.height, ctx.pool.width, ctx.pool.channels,
                             spec.amplitude),
          spec.noise_mean);
    case ExperimentKind::cs_noisy:
    case ExperimentKind::cs_1bit:
      return NoiseModel::diag_gauss(sinusoidal_sigma_vector(observation_dim,
                                                            spec.amplitude),
                                    spec.noise_mean);
    case ExperimentKind::theorem:
      break;
  }
  throw ConfigError("experiment.kind: no noise model for this kind");
}

}  // namespace detail

struct ExperimentReport {
  std::vector<InstanceRecord> records;
  std::vector<SummaryRow> summary;
};

namespace detail {

/// Solves every (instance, method) pair for one spec; axis metadata is
/// attached when part of a sweep. Instances run in parallel; records are
/// assembled in deterministic (instance, method) order.
inline std::vector<InstanceRecord> solve_instances(const ExperimentSpec& spec,
                                                   const std::string& axis_name,
                                                   double axis_value) {
  ExperimentContext ctx = load_context(spec);
  const std::size_t d = ctx.pool.d();
  std::vector<std::vector<InstanceRecord>> per_instance(spec.instances);

  parallel_for(spec.instances, spec.workers, [&](std::size_t i) {
    Tensor truth = ctx.pool.items.row(i % ctx.pool.n());
    ForwardOperator op = instance_operator(spec, ctx, i);
    NoiseModel nm = experiment_noise(spec, ctx, op.out_dim);
    RngStream noise_rng = RngStream(spec.seed).derive(kNoiseTag + i);
    Tensor observation = make_observation(op, nm, truth, noise_rng);

    double obs_psnr = std::numeric_limits<double>::quiet_NaN();
    if (op.kind == ForwardOperator::Kind::identity) {
      obs_psnr = psnr(truth, observation);
    } else if (op.kind == ForwardOperator::Kind::scale && op.factor != 0.0) {
      obs_psnr = psnr(truth, scaled(observation, 1.0 / op.factor));
    }

    std::vector<InstanceRecord> records;
    for (SolveMethod m : spec.methods) {
      SolveConfig sc = spec.solve_configs.at(m);
      sc.seed = RngStream(spec.seed).derive(kSolveTag + i).seed();
      SolveReport rep = solve(ctx.signal_prior.get(), &nm, op, observation, sc,
                              ctx.geom);
      InstanceRecord rec;
      rec.experiment = to_string(spec.kind);
      rec.method = to_string(m);
      rec.instance = i;
      rec.seed = sc.seed;
      rec.axis_name = axis_name;
      rec.axis_value = axis_value;
      rec.config_hash = rep.config_hash;
      rec.truth_hash = to_hex(fnv1a64(truth.data));
      rec.psnr = psnr(truth, rep.reconstruction);
      rec.obs_psnr = obs_psnr;
      rec.loss_first = rep.loss_trace.front();
      rec.loss_final = rep.loss_trace.back();
      rec.ood = spec.ood;
      rec.loss_trace = rep.loss_trace;
      rec.reconstruction = rep.reconstruction.data;
      rec.final_z = rep.final_z.data;
      records.push_back(std::move(rec));
    }
    per_instance[i] = std::move(records);
  });

  std::vector<InstanceRecord> all;
  for (auto& group : per_instance)
    for (auto& rec : group) all.push_back(std::move(rec));
  return all;
}

}  // namespace detail

/// train subcommand: fits a flow to the configured dataset, writes
/// `model.nfck` and `nll_trace.csv` into the output directory.
struct TrainOutcome {
  std::string checkpoint_path;
  std::vector<double> nll_trace;
};

inline TrainOutcome cmd_train(const ExperimentSpec& spec) {
  Dataset data = detail::experiment_pool(spec);
  RngStream init_rng(spec.train.config.seed);
  FlowModel model = make_flow(data.d(), spec.train.layers, spec.train.hidden,
                              init_rng, spec.train.s_clamp);
  std::vector<double> trace = train_flow(model, data, spec.train.config);
  std::filesystem::create_directories(spec.out_dir);
  TrainOutcome outcome;
  outcome.checkpoint_path =
      (std::filesystem::path(spec.out_dir) / "model.nfck").string();
  checkpoint_save(model, outcome.checkpoint_path);
  std::ostringstream csv;
  csv.precision(17);
  csv << "epoch,mean_nll\n";
  for (std::size_t e = 0; e < trace.size(); ++e) csv << e << "," << trace[e] << "\n";
  write_text_file(
      (std::filesystem::path(spec.out_dir) / "nll_trace.csv").string(), csv.str());
  outcome.nll_trace = std::move(trace);
  return outcome;
}

/// synth-data subcommand: writes the configured synthetic dataset.
inline void cmd_synth_data(const ExperimentSpec& spec, const std::string& out_path) {
  if (!spec.synth) throw ConfigError("data.source: synth-data requires source = synth");
  Dataset ds = detail::experiment_pool(spec);
  if (auto dir = std::filesystem::path(out_path).parent_path(); !dir.empty())
    std::filesystem::create_directories(dir);
  save_dataset(ds, out_path);
}

/// solve subcommand: runs all instances and methods, writes
/// `records.jsonl`, `summary.csv`, and the resolved config.
inline ExperimentReport run_solve(const ExperimentSpec& spec) {
  if (spec.kind == ExperimentKind::theorem)
    throw ConfigError("experiment.kind: use verify-theorem for the theorem experiment");
  ExperimentReport report;
  report.records = detail::solve_instances(spec, "", 0.0);
  report.summary = aggregate_records(report.records);
  std::filesystem::create_directories(spec.out_dir);
  auto dir = std::filesystem::path(spec.out_dir);
  write_records((dir / "records.jsonl").string(), report.records);
  write_text_file((dir / "summary.csv").string(), summary_to_csv(report.summary));
  write_text_file((dir / "config.resolved").string(), render_spec(spec));
  return report;
}

enum class SweepAxis { measurements, noise_scale, beta, gamma };

inline SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "measurements") return SweepAxis::measurements;
  if (name == "noise_scale") return SweepAxis::noise_scale;
  if (name == "beta") return SweepAxis::beta;
  if (name == "gamma") return SweepAxis::gamma;
  throw ConfigError("sweep.axis: unknown axis `" + name + "`");
}

inline const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::measurements: return "measurements";
    case SweepAxis::noise_scale: return "noise_scale";
    case SweepAxis::beta: return "beta";
    case SweepAxis::gamma: return "gamma";
  }
  return "?";
}

/// sweep subcommand: one aggregated curve per method over the axis values,
/// with identical per-instance streams reused across values (paired design).
inline ExperimentReport run_sweep(const ExperimentSpec& spec, SweepAxis axis,
                                  const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep.values: empty list");
  if (axis == SweepAxis::measurements && spec.kind != ExperimentKind::cs_noisy &&
      spec.kind != ExperimentKind::cs_1bit)
    throw ConfigError("sweep.axis: measurements sweep requires a cs_* experiment");
  if (spec.kind == ExperimentKind::theorem)
    throw ConfigError("experiment.kind: the theorem experiment cannot be swept");

  ExperimentReport report;
  for (double value : values) {
    ExperimentSpec point = spec;
    switch (axis) {
      case SweepAxis::measurements: {
        if (value < 1.0 || value != std::floor(value))
          throw ConfigError("sweep.values: measurements must be positive integers");
        point.measurements = static_cast<std::size_t>(value);
        break;
      }
      case SweepAxis::noise_scale:
        if (value < 0.0) throw ConfigError("sweep.values: noise_scale must be >= 0");
        point.amplitude = value;
        break;
      case SweepAxis::beta:
        point.solve_configs.at(SolveMethod::map).beta = value;
        break;
      case SweepAxis::gamma:
        point.solve_configs.at(SolveMethod::hand).gamma = value;
        break;
    }
    auto records = detail::solve_instances(point, to_string(axis), value);
    for (auto& r : records) report.records.push_back(std::move(r));
  }
  report.summary = aggregate_records(report.records);
  std::filesystem::create_directories(spec.out_dir);
  auto dir = std::filesystem::path(spec.out_dir);
  write_records((dir / "records.jsonl").string(), report.records);
  write_text_file((dir / "summary.csv").string(), summary_to_csv(report.summary));
  write_text_file((dir / "config.resolved").string(), render_spec(spec));
  return report;
}

/// eval subcommand: recomputes aggregates from stored records (idempotent).
inline std::vector<SummaryRow> cmd_eval(const std::string& report_dir) {
  auto dir = std::filesystem::path(report_dir);
  auto records = read_records((dir / "records.jsonl").string());
  auto summary = aggregate_records(records);
  write_text_file((dir / "summary.csv").string(), summary_to_csv(summary));
  return summary;
}

struct TheoremOutcome {
  VerifySummary summary;
  bool ok = true;
};

/// verify-theorem subcommand: runs the recovery-bound harness on the
/// configured analytic prior and writes the summary table.
inline TheoremOutcome cmd_verify_theorem(const ExperimentSpec& spec) {
  Tensor center = Tensor::zeros({spec.theorem.dim});
  AnalyticPrior prior =
      spec.theorem.prior == AnalyticPrior::Kind::gaussian
          ? AnalyticPrior::gaussian(center, spec.theorem.tau)
          : AnalyticPrior::quartic(center, spec.theorem.a, spec.theorem.b);
  RngStream rng = RngStream(spec.seed).derive(0x7117);
  TheoremOutcome outcome;
  outcome.summary = verify_bound(prior, spec.theorem.trials, rng, spec.theorem.sigmas,
                                 spec.theorem.delta_scales, spec.theorem.tol);
  outcome.ok = outcome.summary.total_violations == 0;
  std::filesystem::create_directories(spec.out_dir);
  write_text_file(
      (std::filesystem::path(spec.out_dir) / "theorem_summary.csv").string(),
      outcome.summary.table());
  return outcome;
}

}  // namespace flowinv
