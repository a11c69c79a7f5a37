// flowinv command-line interface: train flow priors, solve inverse-problem
// experiments, aggregate reports, and verify the denoising recovery bound.
//
// Exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowinv/flowinv.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  long long workers = -1;
  bool print_config = false;
};

flowinv::ExperimentSpec resolve_spec(const CommonArgs& args) {
  flowinv::ConfigFile cfg = args.config_path.empty()
                                ? flowinv::ConfigFile::parse_string("", "<empty>")
                                : flowinv::ConfigFile::parse_file(args.config_path);
  // Flags override file values.
  if (args.seed >= 0) cfg.set("experiment", "seed", std::to_string(args.seed));
  if (args.workers >= 1) cfg.set("experiment", "workers", std::to_string(args.workers));
  if (!args.out_dir.empty()) cfg.set("experiment", "out", args.out_dir);
  return flowinv::load_experiment_spec(cfg);
}

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* opt = cmd->add_option("--config", args.config_path, "experiment config file");
  if (config_required) opt->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", args.seed, "experiment seed (overrides config)");
  cmd->add_option("--workers", args.workers, "instance-level worker threads");
  cmd->add_flag("--print-config", args.print_config,
                "print the fully-resolved config and exit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flow-based priors for inverse problems"};
  app.require_subcommand(1);

  CommonArgs train_args, solve_args, sweep_args, theorem_args, synth_args;
  std::string eval_dir, synth_out, sweep_axis;
  std::vector<double> sweep_values;

  CLI::App* cmd_train = app.add_subcommand("train", "train a flow prior");
  add_common(cmd_train, train_args);

  CLI::App* cmd_solve = app.add_subcommand("solve", "run an inverse-problem experiment");
  add_common(cmd_solve, solve_args);

  CLI::App* cmd_eval =
      app.add_subcommand("eval", "recompute aggregates from stored records");
  cmd_eval->add_option("report_dir", eval_dir, "directory containing records.jsonl")
      ->required();

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "sweep one axis of an experiment");
  add_common(cmd_sweep, sweep_args);
  cmd_sweep->add_option("--axis", sweep_axis,
                        "measurements | noise_scale | beta | gamma");
  cmd_sweep->add_option("--values", sweep_values, "comma-separated axis values")
      ->delimiter(',');

  CLI::App* cmd_theorem =
      app.add_subcommand("verify-theorem", "run the recovery-bound harness");
  add_common(cmd_theorem, theorem_args);

  CLI::App* cmd_synth = app.add_subcommand("synth-data", "write a synthetic dataset");
  add_common(cmd_synth, synth_args);
  cmd_synth->add_option("--data-out", synth_out, "output .imgd path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_train->parsed()) {
      flowinv::ExperimentSpec spec = resolve_spec(train_args);
      if (train_args.print_config) {
        std::cout << flowinv::render_spec(spec);
        return 0;
      }
      auto outcome = flowinv::cmd_train(spec);
      std::cout << "trained " << outcome.checkpoint_path << "\n";
      if (!outcome.nll_trace.empty())
        std::cout << "final mean NLL: " << outcome.nll_trace.back() << " nats\n";
      return 0;
    }
    if (cmd_solve->parsed()) {
      flowinv::ExperimentSpec spec = resolve_spec(solve_args);
      if (solve_args.print_config) {
        std::cout << flowinv::render_spec(spec);
        return 0;
      }
      auto report = flowinv::run_solve(spec);
      std::cout << flowinv::summary_to_csv(report.summary);
      return 0;
    }
    if (cmd_eval->parsed()) {
      auto summary = flowinv::cmd_eval(eval_dir);
      std::cout << flowinv::summary_to_csv(summary);
      return 0;
    }
    if (cmd_sweep->parsed()) {
      flowinv::ExperimentSpec spec = resolve_spec(sweep_args);
      flowinv::ConfigFile file_cfg =
          sweep_args.config_path.empty()
              ? flowinv::ConfigFile::parse_string("", "<empty>")
              : flowinv::ConfigFile::parse_file(sweep_args.config_path);
      std::string axis_name =
          sweep_axis.empty() ? file_cfg.get_string("sweep", "axis", "") : sweep_axis;
      if (axis_name.empty())
        throw flowinv::ConfigError("sweep.axis: required (flag --axis or [sweep] axis)");
      std::vector<double> values = sweep_values.empty()
                                       ? file_cfg.get_double_list("sweep", "values")
                                       : sweep_values;
      if (sweep_args.print_config) {
        std::cout << flowinv::render_spec(spec);
        return 0;
      }
      auto report =
          flowinv::run_sweep(spec, flowinv::sweep_axis_from_string(axis_name), values);
      std::cout << flowinv::summary_to_csv(report.summary);
      return 0;
    }
    if (cmd_theorem->parsed()) {
      flowinv::ExperimentSpec spec = resolve_spec(theorem_args);
      if (theorem_args.print_config) {
        std::cout << flowinv::render_spec(spec);
        return 0;
      }
      auto outcome = flowinv::cmd_verify_theorem(spec);
      std::cout << outcome.summary.table();
      if (!outcome.ok) {
        std::cerr << "bound violated on " << outcome.summary.total_violations
                  << " trial(s)\n";
        return 3;
      }
      return 0;
    }
    if (cmd_synth->parsed()) {
      flowinv::ExperimentSpec spec = resolve_spec(synth_args);
      if (synth_args.print_config) {
        std::cout << flowinv::render_spec(spec);
        return 0;
      }
      flowinv::cmd_synth_data(spec, synth_out);
      std::cout << "wrote " << synth_out << "\n";
      return 0;
    }
  } catch (const flowinv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const flowinv::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const flowinv::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 4;
  } catch (const flowinv::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
