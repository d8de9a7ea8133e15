#include "commands.hpp"

#include "eae/checkpoint.hpp"
#include "eae/config.hpp"
#include "eae/diagnostics.hpp"
#include "eae/dynamics.hpp"
#include "eae/mlp.hpp"
#include "eae/training.hpp"
#include "eae/verify.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace eae::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Run {
  json resolved;
  fs::path out;
};

Run start_run(const CommonArgs& args, bool config_required) {
  json user = json::object();
  if (args.config) {
    user = load_config_file(*args.config);
  } else if (config_required) {
    throw ConfigError("--config is required for this command");
  }
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  if (args.seed) user["seed"] = *args.seed;
  if (args.output) user["output_dir"] = args.output->string();
  Run run{resolve_config(user), {}};
  run.out = run.resolved.at("output_dir").get<std::string>();
  fs::create_directories(run.out);
  return run;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17);
  return out;
}

void write_timing(const fs::path& dir, const std::string& command, double seconds) {
  write_json(dir / "timing.json", {{"command", command}, {"wall_seconds", seconds}});
}

std::optional<fs::path> data_dir() {
  if (const char* dir = std::getenv("EAE_DATA_DIR"); dir && *dir) return fs::path(dir);
  return std::nullopt;
}

std::string zero_pad(Index value, int width) {
  std::string s = std::to_string(value);
  return std::string(static_cast<std::size_t>(std::max<int>(0, width - static_cast<int>(s.size()))), '0') + s;
}

json vector_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// Encoder output used as "the code" of a checkpoint: the posterior mean for
// a VAE, the deterministic encoding otherwise.
BatchXd point_codes(const Checkpoint& ckpt, const ParamVector& encoder, const BatchXd& y) {
  if (ckpt.model_kind == "vae") return vae_encode(ckpt.vae(), encoder, y).mean;
  return encode(ckpt.autoencoder(), encoder, y);
}

BatchXd decode_to_data(const Checkpoint& ckpt, const BatchXd& z) {
  return to_data_space(forward(ckpt.decoder, ckpt.params.decoder, z), ckpt.loss);
}

std::vector<ParamVector> load_members(const Checkpoint& ckpt,
                                      const std::optional<fs::path>& ensemble_path) {
  if (!ensemble_path) return {ckpt.params.encoder};
  if (ckpt.model_kind == "vae") {
    throw DimensionError("encoder ensembles apply to deterministic encoders, not a VAE checkpoint");
  }
  EnsembleFile ens = load_ensemble(*ensemble_path);
  if (ens.encoder != ckpt.encoder) {
    throw DimensionError("ensemble encoder architecture does not match the checkpoint");
  }
  if (ens.members.empty()) throw DimensionError("ensemble file holds no members");
  return std::move(ens.members);
}

LatentEnsemble latent_ensemble(const Checkpoint& ckpt, const std::vector<ParamVector>& members,
                               const BatchXd& queries) {
  if (queries.cols() != ckpt.encoder.input_width()) {
    throw DimensionError("queries have width " + std::to_string(queries.cols()) +
                         " but the encoder expects " + std::to_string(ckpt.encoder.input_width()));
  }
  if (ckpt.model_kind == "vae") return {point_codes(ckpt, members.front(), queries)};
  return eae_sample_latents(ckpt.autoencoder(), members, queries);
}

void write_baseline_report(const fs::path& path, const BaselineResult& r) {
  auto out = open_csv(path);
  out << "epoch,loss\n" << 0 << ',' << r.initial_loss << '\n';
  for (std::size_t e = 0; e < r.epoch_losses.size(); ++e) {
    out << e + 1 << ',' << r.epoch_losses[e] << '\n';
  }
}

Checkpoint make_checkpoint(std::string kind, const NetworkSpec& enc, const NetworkSpec& dec,
                           Index nz, const json& resolved, AutoencoderParams params,
                           Index outer_iteration) {
  Checkpoint c;
  c.model_kind = std::move(kind);
  c.encoder = enc;
  c.decoder = dec;
  c.latent_dim = nz;
  c.loss = loss_kind_from_string(resolved.at("model").at("loss").get<std::string>());
  c.seed = resolved.at("seed");
  c.outer_iteration = outer_iteration;
  c.params = std::move(params);
  return c;
}

}  // namespace

int report_exception() {
  try {
    throw;
  } catch (const ConfigError& e) {
    std::cerr << "eae: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const SingularityError& e) {
    std::cerr << "eae: numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const NumericError& e) {
    std::cerr << "eae: numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const Error& e) {
    std::cerr << "eae: error: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "eae: error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "eae: internal failure: " << e.what() << '\n';
    return kNumericFailure;
  }
}

int cmd_train(const CommonArgs& args) {
  const Stopwatch clock;
  const Run run = start_run(args, true);
  const json& cfg = run.resolved;
  write_json(run.out / "resolved_config.json", cfg);

  const Dataset data = build_dataset(cfg, data_dir());
  const DatasetSplit parts = split_dataset(data, cfg);
  save_dataset(run.out / "test.blob", parts.test);

  const std::string trainer = cfg.at("trainer").at("kind");
  const bool with_dynamics = cfg.at("dynamics").at("enabled");
  const Index width = data.width();
  json summary = {{"trainer", trainer},
                  {"seed", cfg.at("seed")},
                  {"dataset",
                   {{"kind", cfg.at("dataset").at("kind")},
                    {"train_rows", parts.train.rows()},
                    {"validation_rows", parts.val.rows()},
                    {"test_rows", parts.test.rows()}}}};

  if (trainer == "vae") {
    const VaeModel vae = build_vae(cfg, width);
    const BaselineConfig bc = build_baseline_config(cfg);
    const BaselineResult r = vae_train(vae, parts.train.inputs, bc);
    write_baseline_report(run.out / "train_report.csv", r);
    const Checkpoint ckpt =
        make_checkpoint("vae", vae.encoder, vae.decoder, vae.latent_dim, cfg, r.params, 0);
    save_checkpoint(run.out / "checkpoint.blob", ckpt);
    summary["final_train_loss"] = r.epoch_losses.empty() ? r.initial_loss : r.epoch_losses.back();
    summary["optimizer_steps"] = r.steps;
    if (parts.test.rows() > 0) {
      const BatchXd recon = decode_to_data(ckpt, point_codes(ckpt, ckpt.params.encoder, parts.test.inputs));
      summary["test_mse"] = (recon - parts.test.inputs).squaredNorm() /
                            static_cast<double>(parts.test.inputs.size());
    }
  } else if (trainer == "ae") {
    const AutoencoderModel model = build_autoencoder(cfg, width);
    const BaselineResult r = ae_train(model, parts.train.inputs, build_baseline_config(cfg));
    write_baseline_report(run.out / "train_report.csv", r);
    const Checkpoint ckpt =
        make_checkpoint("ae", model.encoder, model.decoder, model.latent_dim, cfg, r.params, 0);
    save_checkpoint(run.out / "checkpoint.blob", ckpt);
    summary["final_train_loss"] = r.epoch_losses.empty() ? r.initial_loss : r.epoch_losses.back();
    summary["optimizer_steps"] = r.steps;
    if (parts.test.rows() > 0) {
      summary["test_mse"] = test_mse(model, r.params, parts.test.inputs, ckpt.loss);
    }
  } else {
    const AutoencoderModel model = build_autoencoder(cfg, width);
    const TrainConfig tc = build_train_config(cfg);
    std::unique_ptr<EaeObjective> objective;
    if (with_dynamics) {
      if (!parts.train.time_derivatives) {
        throw ConfigError("dynamics training needs a dataset with time derivatives");
      }
      objective = std::make_unique<DynamicsObjective>(model, parts.train.inputs,
                                                      *parts.train.time_derivatives,
                                                      build_basis_library(cfg),
                                                      build_dynamics_weights(cfg));
    } else {
      objective = std::make_unique<ReconstructionObjective>(model, parts.train.inputs, tc.loss);
    }
    const Index every = cfg.at("trainer").at("checkpoint_every");
    EaeHooks hooks;
    if (every > 0) {
      hooks.on_outer_iteration = [&](Index k, const AutoencoderParams& params) {
        if ((k + 1) % every != 0) return;
        save_checkpoint(run.out / "checkpoints" / ("outer_" + zero_pad(k + 1, 6) + ".blob"),
                        make_checkpoint("eae", model.encoder, model.decoder, model.latent_dim,
                                        cfg, params, k + 1));
      };
      fs::create_directories(run.out / "checkpoints");
    }
    EaeResult r;
    try {
      r = eae_train(*objective, initial_params(model, tc.seed), tc, hooks);
    } catch (const TrainingAborted& e) {
      save_checkpoint(run.out / "checkpoint_last_good.blob",
                      make_checkpoint("eae", model.encoder, model.decoder, model.latent_dim, cfg,
                                      e.last_good(), e.outer_iteration()));
      throw;
    }
    r.report.write_csv(run.out / "train_report.csv");
    const Index outer = static_cast<Index>(r.report.iterations.size());
    const Checkpoint ckpt =
        make_checkpoint("eae", model.encoder, model.decoder, model.latent_dim, cfg, r.params, outer);
    save_checkpoint(run.out / "checkpoint.blob", ckpt);

    const Index final_samples = cfg.at("trainer").at("final_samples");
    EnsembleFile ens{model.encoder, {}};
    if (final_samples > 0) {
      ens.members = eae_collect(*objective, r.params.decoder, r.sampler, final_samples, tc).members;
    } else {
      ens.members = r.ensemble.members;
    }
    save_ensemble(run.out / "ensemble.blob", ens);

    summary["outer_iterations"] = outer;
    summary["max_iterations_reached"] = r.report.max_iterations_reached;
    summary["final_train_loss"] = objective->full_loss(r.params);
    summary["final_grad_norm"] = outer > 0 ? r.report.iterations.back().grad_norm : 0.0;
    summary["ensemble_members"] = ens.members.size();
    if (parts.test.rows() > 0) {
      summary["test_mse"] = test_mse(model, r.params, parts.test.inputs, tc.loss);
    }
  }
  write_json(run.out / "summary.json", summary);
  write_timing(run.out, "train", clock.seconds());
  std::cout << "trained " << trainer << " model; outputs in " << run.out.string() << '\n';
  return kOk;
}

int cmd_sample(const SampleArgs& args) {
  const Stopwatch clock;
  const Run run = start_run(args.common, false);
  write_json(run.out / "resolved_config.json", run.resolved);
  const Checkpoint ckpt = load_checkpoint(args.checkpoint);
  const std::vector<ParamVector> members = load_members(ckpt, args.ensemble);
  Dataset queries = load_dataset(args.queries);
  if (args.rows) {
    if (*args.rows < 1) throw ConfigError("--rows must be >= 1");
    std::vector<Index> keep(static_cast<std::size_t>(std::min<Index>(*args.rows, queries.rows())));
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = static_cast<Index>(i);
    queries = queries.subset(keep);
  }
  const LatentEnsemble latents = latent_ensemble(ckpt, members, queries.inputs);

  auto out = open_csv(run.out / "latents.csv");
  out << "member_index,query_index";
  for (Index k = 0; k < ckpt.latent_dim; ++k) out << ",z_" << k + 1;
  out << '\n';
  for (std::size_t m = 0; m < latents.size(); ++m) {
    for (Index q = 0; q < latents[m].rows(); ++q) {
      out << m << ',' << q;
      for (Index k = 0; k < latents[m].cols(); ++k) out << ',' << latents[m](q, k);
      out << '\n';
    }
  }
  write_timing(run.out, "sample", clock.seconds());
  std::cout << "wrote " << latents.size() * static_cast<std::size_t>(queries.rows())
            << " latent rows to " << (run.out / "latents.csv").string() << '\n';
  return kOk;
}

int cmd_diagnose(const DiagnoseArgs& args) {
  const Stopwatch clock;
  const Run run = start_run(args.common, false);
  write_json(run.out / "resolved_config.json", run.resolved);
  const Checkpoint ckpt = load_checkpoint(args.checkpoint);
  const std::vector<ParamVector> members = load_members(ckpt, args.ensemble);
  const Dataset test = load_dataset(args.test);
  const LatentEnsemble latents = latent_ensemble(ckpt, members, test.inputs);
  const double threshold = run.resolved.at("diagnostics").at("activity_threshold");

  double mse = 0.0;
  if (ckpt.model_kind == "vae") {
    const BatchXd recon = decode_to_data(ckpt, latents.front());
    mse = (recon - test.inputs).squaredNorm() / static_cast<double>(test.inputs.size());
  } else {
    mse = test_mse(ckpt.autoencoder(), ckpt.params, test.inputs, ckpt.loss);
  }
  const ActivityReport activity = latent_activity(flatten_latents(latents), threshold);
  activity.write_csv(run.out / "activity.csv");

  json report = {{"model_kind", ckpt.model_kind},
                 {"members", latents.size()},
                 {"queries", test.rows()},
                 {"test_mse", mse},
                 {"activity",
                  {{"threshold", threshold},
                   {"active_count", activity.active_count},
                   {"total", activity.total()},
                   {"variance", vector_json(activity.variance)}}}};

  if (test.labels) {
    const ClassConditionalLatents ccl = class_conditional_latents(latents, *test.labels);
    ccl.write(run.out / "class_latents");
    json overlaps = json::array();
    for (std::size_t d = 0; d < ccl.dims.size(); ++d) overlaps.push_back(ccl.mean_pairwise_overlap(d));
    report["class_overlap"] = overlaps;
    report["classes"] = ccl.classes;

    const Index steps = run.resolved.at("diagnostics").at("interpolation_steps");
    if (steps < 2) throw ConfigError("diagnostics.interpolation_steps must be >= 2");
    auto out = open_csv(run.out / "interpolation.csv");
    out << "class_from,class_to,alpha";
    for (Index k = 0; k < ckpt.latent_dim; ++k) out << ",z_" << k + 1;
    for (Index j = 0; j < test.width(); ++j) out << ",x_" << j + 1;
    out << '\n';
    for (std::size_t c = 0; c + 1 < ccl.classes.size(); ++c) {
      const int a = ccl.classes[c];
      const int b = ccl.classes[c + 1];
      const VectorXd za = ensemble_mean_code(latents, *test.labels, a);
      const VectorXd zb = ensemble_mean_code(latents, *test.labels, b);
      BatchXd codes(steps, ckpt.latent_dim);
      std::vector<double> alphas(static_cast<std::size_t>(steps));
      for (Index s = 0; s < steps; ++s) {
        // α runs from 0 (class b) to 1 (class a) in equal steps.
        const double alpha = static_cast<double>(s) / static_cast<double>(steps - 1);
        alphas[static_cast<std::size_t>(s)] = alpha;
        codes.row(s) = interpolate_codes(za, zb, alpha).transpose();
      }
      const BatchXd images = decode_to_data(ckpt, codes);
      for (Index s = 0; s < steps; ++s) {
        out << a << ',' << b << ',' << alphas[static_cast<std::size_t>(s)];
        for (Index k = 0; k < codes.cols(); ++k) out << ',' << codes(s, k);
        for (Index j = 0; j < images.cols(); ++j) out << ',' << images(s, j);
        out << '\n';
      }
    }
  }
  write_json(run.out / "diagnostics.json", report);
  write_timing(run.out, "diagnose", clock.seconds());
  std::cout << "test_mse " << mse << ", active units " << activity.active_count << '/'
            << activity.total() << '\n';
  return kOk;
}

int cmd_dynamics(const DynamicsArgs& args) {
  const Stopwatch clock;
  const Run run = start_run(args.common, false);
  write_json(run.out / "resolved_config.json", run.resolved);
  const json& dyn = run.resolved.at("dynamics");
  const Dataset test = load_dataset(args.test);

  std::vector<CoefficientMatrix> samples;
  VectorXd z0;
  Index nz = 0;
  Index start_row = 0;
  if (test.times) test.times->minCoeff(&start_row);

  if (args.oracle_latents) {
    if (!test.latents || !test.latent_derivatives) {
      throw ConfigError("--oracle-latents needs a dataset with ground-truth latents");
    }
    nz = test.latents->cols();
    const BasisLibrary lib = BasisLibrary::polynomial_sine(nz, dyn.at("max_degree").get<int>(),
                                                           dyn.at("sines").get<bool>());
    // Two independent halves of the test set stand in for ensemble members.
    const Index half = test.rows() / 2;
    const Index bounds[3] = {0, half, test.rows()};
    for (int h = 0; h < 2; ++h) {
      const Index n = bounds[h + 1] - bounds[h];
      samples.push_back(estimate_xi(lib, test.latents->middleRows(bounds[h], n),
                                    test.latent_derivatives->middleRows(bounds[h], n)));
    }
    z0 = test.latents->row(start_row).transpose();
  } else {
    if (!args.checkpoint) throw ConfigError("dynamics needs --checkpoint unless --oracle-latents is set");
    if (!test.time_derivatives) throw ConfigError("test set has no time derivatives");
    const Checkpoint ckpt = load_checkpoint(*args.checkpoint);
    if (ckpt.model_kind == "vae") throw ConfigError("dynamics needs a deterministic encoder");
    const AutoencoderModel model = ckpt.autoencoder();
    const std::vector<ParamVector> members = load_members(ckpt, args.ensemble);
    if (test.width() != ckpt.encoder.input_width()) {
      throw DimensionError("test set width does not match the encoder input");
    }
    nz = ckpt.latent_dim;
    const BasisLibrary lib = BasisLibrary::polynomial_sine(nz, dyn.at("max_degree").get<int>(),
                                                           dyn.at("sines").get<bool>());
    z0 = VectorXd::Zero(nz);
    const BatchXd first = test.inputs.row(start_row);
    for (const auto& member : members) {
      const LatentTrajectory traj =
          encode_with_derivative(model, member, test.inputs, *test.time_derivatives);
      samples.push_back(estimate_xi(lib, traj.z, traj.z_dot));
      z0 += encode(model, member, first).row(0).transpose();
    }
    z0 /= static_cast<double>(members.size());
  }

  const BasisLibrary lib = BasisLibrary::polynomial_sine(nz, dyn.at("max_degree").get<int>(),
                                                         dyn.at("sines").get<bool>());
  const CoefficientStats stats = coefficient_stats(samples);
  write_coefficient_table(run.out / "coefficients.csv", lib, stats);
  write_correlation_csv(run.out / "correlations.csv",
                        coefficient_correlation(samples, lib, stats.significant));

  const Eigen::MatrixXd jac = linearize_at_origin(lib, stats.mean, stats.significant);
  const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(jac, false).eigenvalues();
  std::vector<std::complex<double>> sorted(eig.data(), eig.data() + eig.size());
  std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) {
    return a.imag() != b.imag() ? a.imag() < b.imag() : a.real() < b.real();
  });
  {
    auto out = open_csv(run.out / "eigenvalues.csv");
    out << "real,imag\n";
    for (const auto& e : sorted) out << e.real() << ',' << e.imag() << '\n';
  }
  json eigen_json = json::array();
  for (const auto& e : sorted) eigen_json.push_back({{"real", e.real()}, {"imag", e.imag()}});

  double spread = 0.0;
  for (const auto& s : samples) spread = std::max(spread, (s - stats.mean).cwiseAbs().maxCoeff());
  json report = {{"mode", args.oracle_latents ? "oracle" : "encoder"},
                 {"members", samples.size()},
                 {"library_terms", lib.names()},
                 {"significant_count", stats.significant.count()},
                 {"max_member_deviation", spread},
                 {"initial_row", start_row},
                 {"initial_condition", vector_json(z0)},
                 {"eigenvalues", eigen_json}};
  write_json(run.out / "dynamics.json", report);

  const double dt = dyn.at("integration_dt");
  const Index steps = dyn.at("integration_steps");
  const CoefficientMatrix field = stats.mean.cwiseProduct(stats.significant.cast<double>());
  const BatchXd traj = integrate_latent_ode(lib, field, z0, dt, steps);
  const double t0 = test.times ? (*test.times)(start_row) : 0.0;
  auto out = open_csv(run.out / "trajectory.csv");
  out << "step,t";
  for (Index k = 0; k < nz; ++k) out << ",z_" << k + 1;
  out << '\n';
  for (Index s = 0; s < traj.rows(); ++s) {
    out << s << ',' << t0 + dt * static_cast<double>(s);
    for (Index k = 0; k < nz; ++k) out << ',' << traj(s, k);
    out << '\n';
  }
  write_timing(run.out, "dynamics", clock.seconds());
  std::cout << "estimated dynamics from " << samples.size() << " coefficient samples\n";
  return kOk;
}

int cmd_verify(const VerifyArgs& args) {
  const Stopwatch clock;
  const Run run = start_run(args.common, false);
  write_json(run.out / "resolved_config.json", run.resolved);
  VerifyOptions opts;
  opts.seed = run.resolved.at("seed");
  opts.invert_chain_force = args.invert_chain_force;
  const std::vector<CheckResult> results = run_verification_suite(opts);
  const json summary = summary_json(results);
  write_json(run.out / "verify_summary.json", summary);
  write_timing(run.out, "verify", clock.seconds());
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  if (!ok) {
    std::cerr << "eae: verification failed:";
    for (const auto& r : results) {
      if (!r.passed) std::cerr << ' ' << r.name;
    }
    std::cerr << '\n';
    return kVerifyFailed;
  }
  return kOk;
}

}  // namespace eae::cli
