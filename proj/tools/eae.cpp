#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_common(CLI::App* cmd, eae::cli::CommonArgs& common) {
  cmd->add_option("--config", common.config, "Experiment config (JSON)");
  cmd->add_option("--seed", common.seed, "Run seed; overrides the config");
  cmd->add_option("--output", common.output, "Output directory; overrides the config");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace eae::cli;
  CLI::App app{"Ensemble autoencoder experiments: train, sample, diagnose, dynamics, verify"};
  app.require_subcommand(1);

  CommonArgs train_args;
  auto* train = app.add_subcommand("train", "Train an autoencoder from a config");
  add_common(train, train_args);

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "Encode queries with every ensemble member");
  add_common(sample, sample_args.common);
  sample->add_option("--checkpoint", sample_args.checkpoint, "Checkpoint file")->required();
  sample->add_option("--ensemble", sample_args.ensemble, "Encoder ensemble file");
  sample->add_option("--queries", sample_args.queries, "Dataset file with query rows")->required();
  sample->add_option("--rows", sample_args.rows, "Use only the first N query rows");

  DiagnoseArgs diag_args;
  auto* diagnose = app.add_subcommand("diagnose", "Test error, latent activity and class latents");
  add_common(diagnose, diag_args.common);
  diagnose->add_option("--checkpoint", diag_args.checkpoint, "Checkpoint file")->required();
  diagnose->add_option("--ensemble", diag_args.ensemble, "Encoder ensemble file");
  diagnose->add_option("--test", diag_args.test, "Test dataset file")->required();

  DynamicsArgs dyn_args;
  auto* dynamics = app.add_subcommand("dynamics", "Estimate latent dynamics coefficients");
  add_common(dynamics, dyn_args.common);
  dynamics->add_option("--checkpoint", dyn_args.checkpoint, "Checkpoint file");
  dynamics->add_option("--ensemble", dyn_args.ensemble, "Encoder ensemble file");
  dynamics->add_option("--test", dyn_args.test, "Test dataset file")->required();
  dynamics->add_flag("--oracle-latents", dyn_args.oracle_latents,
                     "Use the dataset's ground-truth latents instead of an encoder");

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand("verify", "Run the numerical verification suite");
  add_common(verify, verify_args.common);
  std::string fault;
  verify->add_option("--inject-fault", fault)->check(CLI::IsMember({"chain-sign"}))->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*train) return guarded([&] { return cmd_train(train_args); });
  if (*sample) return guarded([&] { return cmd_sample(sample_args); });
  if (*diagnose) return guarded([&] { return cmd_diagnose(diag_args); });
  if (*dynamics) return guarded([&] { return cmd_dynamics(dyn_args); });
  verify_args.invert_chain_force = fault == "chain-sign";
  return guarded([&] { return cmd_verify(verify_args); });
}
