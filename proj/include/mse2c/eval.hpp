#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mse2c/dataset.hpp"
#include "mse2c/models.hpp"

namespace mse2c {

struct MetricReport {
  double state_loss_mean = 0, state_loss_std = 0;
  double next_state_loss_mean = 0, next_state_loss_std = 0;
  int n_eval_samples = 0;
  std::string variant;
  int k = 0;
};

// Negative reconstruction log-likelihood of the current frame decoded from
// the encoder mean. Evaluation is sampling-free throughout.
std::pair<double, double> state_loss(const ModelParams<double>& model, const Dataset& ds);

// Encode the current frame, advance the latent mean one step with the first
// action, decode, score against the next frame.
std::pair<double, double> next_state_loss(const ModelParams<double>& model, const Dataset& ds);

MetricReport evaluate(const ModelParams<double>& model, const Dataset& ds, int k_label);

std::string metric_report_json(const MetricReport& report);
void write_metric_report(const MetricReport& report, const std::string& path);

// CSV of encoder means over every valid grid state: header x,y,z1,...,zd,
// rows in enumeration order. Optionally one PGM heat image per latent
// coordinate next to the CSV.
void latent_map(const ModelParams<double>& model, const PlanarConfig& cfg,
                const std::string& csv_path, bool write_heat_pgms = true);

}  // namespace mse2c
