#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mse2c/checkpoint.hpp"
#include "mse2c/dataset.hpp"
#include "mse2c/errors.hpp"
#include "mse2c/eval.hpp"
#include "mse2c/run_config.hpp"

namespace {

using namespace mse2c;

int cmd_gen_data(const RunConfig& cfg, const std::string& out, int n, int k, int dump_frames) {
  const Dataset ds = generate_dataset(n, k, cfg.planar, cfg.data_seed, out);
  std::printf("dataset: n=%d k=%d width=%d action_dim=%d seed=%llu\n", ds.n, ds.k, ds.width,
              ds.action_dim, static_cast<unsigned long long>(ds.seed));
  std::printf("wrote %s.json and %s.bin\n", out.c_str(), out.c_str());
  for (int i = 0; i < dump_frames && i < ds.n; ++i) {
    const std::string path = out + ".sample" + std::to_string(i) + ".pgm";
    write_pgm(ds.samples[i].frames[0], ds.width, path);
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_path, const std::string& out_dir) {
  const Dataset ds = load_dataset(data_path);
  std::filesystem::create_directories(out_dir);
  const std::string ckpt = out_dir + "/checkpoint";
  const std::string metrics = out_dir + "/metrics.ndjson";
  const TrainResult result = train(cfg.train, ds, ckpt, metrics);
  if (!result.log.epochs.empty()) {
    const auto& last = result.log.epochs.back().losses;
    std::printf("epoch %d: composite_phi_psi=%.6f composite_theta=%.6f\n",
                result.log.epochs.back().epoch, last.composite_phi_psi, last.composite_theta);
  }
  std::printf("wrote %s.json, %s.bin, %s\n", ckpt.c_str(), ckpt.c_str(), metrics.c_str());
  if (result.log.diverged) {
    std::fprintf(stderr, "training diverged: %s\n", result.log.divergence_message.c_str());
    return 2;
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt_path, const std::string& data_path,
             const std::string& out_path) {
  const ModelParams<double> model = load_checkpoint(ckpt_path);
  const Dataset ds = load_dataset(data_path);
  const MetricReport report = evaluate(model, ds, cfg.train.k);
  std::printf("state loss: %.4f +- %.4f\n", report.state_loss_mean, report.state_loss_std);
  std::printf("next state loss: %.4f +- %.4f\n", report.next_state_loss_mean,
              report.next_state_loss_std);
  write_metric_report(report, out_path);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_latent_map(const RunConfig& cfg, const std::string& ckpt_path, const std::string& out_path,
                   bool no_pgm) {
  const ModelParams<double> model = load_checkpoint(ckpt_path);
  latent_map(model, cfg.planar, out_path, !no_pgm);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally-linear latent state-space models on the Planar benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON configuration file (defaults are built in)");
  app.add_option("--set", overrides, "Override a config key, e.g. --set train.k=3");

  auto* gen = app.add_subcommand("gen-data", "Generate a trajectory dataset");
  std::string gen_out;
  int gen_n = -1, gen_k = -1, gen_dump = 0;
  gen->add_option("--out", gen_out, "Output path stem")->required();
  gen->add_option("--n", gen_n, "Number of samples (default from config)");
  gen->add_option("--k", gen_k, "Steps per sample (default from config)");
  gen->add_option("--dump-frames", gen_dump, "Also write the first N initial frames as PGM");

  auto* tr = app.add_subcommand("train", "Fit a model on a dataset");
  std::string tr_data, tr_out;
  int tr_epochs = -1;
  tr->add_option("--data", tr_data, "Dataset path stem")->required();
  tr->add_option("--out", tr_out, "Output directory")->required();
  tr->add_option("--epochs", tr_epochs, "Override train.epochs");

  auto* ev = app.add_subcommand("eval", "Compute state and next-state losses");
  std::string ev_ckpt, ev_data, ev_out = "metrics.json";
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint path stem")->required();
  ev->add_option("--data", ev_data, "Dataset path stem")->required();
  ev->add_option("--out", ev_out, "Metric report path");

  auto* lm = app.add_subcommand("latent-map", "Export encoder means over all grid states");
  std::string lm_ckpt, lm_out;
  bool lm_no_pgm = false;
  lm->add_option("--ckpt", lm_ckpt, "Checkpoint path stem")->required();
  lm->add_option("--out", lm_out, "Output CSV path")->required();
  lm->add_flag("--no-pgm", lm_no_pgm, "Skip the per-coordinate PGM heat images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = load_run_config(config_path, overrides);
    if (gen->parsed()) {
      const int n = gen_n > 0 ? gen_n : cfg.data_n;
      const int k = gen_k > 0 ? gen_k : cfg.data_k;
      if (gen_n == 0 || gen_k == 0) throw ValidationError("gen-data: n and k must be >= 1");
      return cmd_gen_data(cfg, gen_out, n, k, gen_dump);
    }
    if (tr->parsed()) {
      if (tr_epochs >= 0) cfg.train.epochs = tr_epochs;
      return cmd_train(cfg, tr_data, tr_out);
    }
    if (ev->parsed()) return cmd_eval(cfg, ev_ckpt, ev_data, ev_out);
    if (lm->parsed()) return cmd_latent_map(cfg, lm_ckpt, lm_out, lm_no_pgm);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
