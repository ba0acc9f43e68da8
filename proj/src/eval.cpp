#include "mse2c/eval.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mse2c/distributions.hpp"
#include "mse2c/errors.hpp"

namespace mse2c {

namespace {

constexpr int kChunk = 512;

void check_dataset(const ModelParams<double>& model, const Dataset& ds, const char* who) {
  if (ds.width != model.config.image_width)
    throw ValidationError(std::string(who) + ": dataset width " + std::to_string(ds.width) +
                          " does not match model width " +
                          std::to_string(model.config.image_width));
  if (ds.action_dim != model.config.action_dim)
    throw ValidationError(std::string(who) + ": action dimension mismatch");
  if (ds.samples.empty()) throw ValidationError(std::string(who) + ": empty dataset");
}

std::pair<double, double> mean_and_std(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double mean = 0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

// shortest round-trip decimal form
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::pair<double, double> state_loss(const ModelParams<double>& model, const Dataset& ds) {
  check_dataset(model, ds, "state_loss");
  const int pixels = model.config.pixels();
  const int d = model.config.latent_dim;
  std::vector<double> losses;
  losses.reserve(ds.samples.size());
  for (std::size_t start = 0; start < ds.samples.size(); start += kChunk) {
    const int c = static_cast<int>(std::min<std::size_t>(kChunk, ds.samples.size() - start));
    MatX<double> x0(pixels, c);
    for (int i = 0; i < c; ++i) x0.col(i) = ds.samples[start + i].frames[0].cast<double>();
    const MatX<double> mu = model.enc.net.forward(x0).topRows(d);
    const MatX<double> probs = model.dec.net.forward(mu);
    for (int i = 0; i < c; ++i)
      losses.push_back(-bernoulli_log_prob<double>(probs.col(i), x0.col(i)));
  }
  return mean_and_std(losses);
}

std::pair<double, double> next_state_loss(const ModelParams<double>& model, const Dataset& ds) {
  check_dataset(model, ds, "next_state_loss");
  if (ds.k < 1) throw ValidationError("next_state_loss: dataset needs at least one step");
  const int pixels = model.config.pixels();
  const int d = model.config.latent_dim;
  const int m = model.config.action_dim;
  std::vector<double> losses;
  losses.reserve(ds.samples.size());
  for (std::size_t start = 0; start < ds.samples.size(); start += kChunk) {
    const int c = static_cast<int>(std::min<std::size_t>(kChunk, ds.samples.size() - start));
    MatX<double> x0(pixels, c), x1(pixels, c), a0(m, c);
    for (int i = 0; i < c; ++i) {
      const auto& sample = ds.samples[start + i];
      x0.col(i) = sample.frames[0].cast<double>();
      x1.col(i) = sample.frames[1].cast<double>();
      a0.col(i) = sample.actions[0];
    }
    const MatX<double> mu0 = model.enc.net.forward(x0).topRows(d);
    MatX<double> next_mean(d, c);
    switch (model.config.variant) {
      case DynamicsVariant::LocalLinear: {
        const MatX<double> dyn_out = model.dyn.net.forward(mu0);
        for (int i = 0; i < c; ++i) {
          const auto lin = detail::unpack_linearization(VecX<double>(dyn_out.col(i)), d, m);
          next_mean.col(i) = lin.a * mu0.col(i) + lin.b * a0.col(i) + lin.o;
        }
        break;
      }
      case DynamicsVariant::GlobalLinear: {
        const auto lin = detail::unpack_linearization(model.dyn.global_raw, d, m);
        for (int i = 0; i < c; ++i)
          next_mean.col(i) = lin.a * mu0.col(i) + lin.b * a0.col(i) + lin.o;
        break;
      }
      case DynamicsVariant::NonLinear: {
        MatX<double> in(d + m, c);
        in << mu0, a0;
        next_mean = model.dyn.net.forward(in).topRows(d);
        break;
      }
    }
    const MatX<double> probs = model.dec.net.forward(next_mean);
    for (int i = 0; i < c; ++i)
      losses.push_back(-bernoulli_log_prob<double>(probs.col(i), x1.col(i)));
  }
  return mean_and_std(losses);
}

MetricReport evaluate(const ModelParams<double>& model, const Dataset& ds, int k_label) {
  MetricReport report;
  std::tie(report.state_loss_mean, report.state_loss_std) = state_loss(model, ds);
  std::tie(report.next_state_loss_mean, report.next_state_loss_std) = next_state_loss(model, ds);
  report.n_eval_samples = static_cast<int>(ds.samples.size());
  report.variant = to_string(model.config.variant);
  report.k = k_label;
  return report;
}

std::string metric_report_json(const MetricReport& report) {
  nlohmann::json j = {{"state_loss_mean", report.state_loss_mean},
                      {"state_loss_std", report.state_loss_std},
                      {"next_state_loss_mean", report.next_state_loss_mean},
                      {"next_state_loss_std", report.next_state_loss_std},
                      {"n_eval_samples", report.n_eval_samples},
                      {"model", {{"variant", report.variant}, {"k", report.k}}}};
  return j.dump(2) + "\n";
}

void write_metric_report(const MetricReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_metric_report: cannot open " + path);
  out << metric_report_json(report);
  if (!out) throw IoError("write_metric_report: write failed for " + path);
}

void latent_map(const ModelParams<double>& model, const PlanarConfig& cfg,
                const std::string& csv_path, bool write_heat_pgms) {
  if (cfg.image_width != model.config.image_width)
    throw ValidationError("latent_map: planar width does not match model width");
  const auto states = enumerate_states(cfg);
  const int d = model.config.latent_dim;
  const int pixels = model.config.pixels();

  // per-state encoding: each row is exactly encode(render(state)).mean
  MatX<double> codes(d, static_cast<Eigen::Index>(states.size()));
  MatX<double> x(pixels, 1);
  for (std::size_t i = 0; i < states.size(); ++i) {
    x.col(0) = render(states[i], cfg).cast<double>();
    codes.col(static_cast<Eigen::Index>(i)) = model.enc.net.forward(x).topRows(d);
  }

  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw IoError("latent_map: cannot open " + csv_path);
  out << "x,y";
  for (int j = 0; j < d; ++j) out << ",z" << (j + 1);
  out << "\n";
  for (std::size_t i = 0; i < states.size(); ++i) {
    out << static_cast<int>(states[i].x) << "," << static_cast<int>(states[i].y);
    for (int j = 0; j < d; ++j) out << "," << format_double(codes(j, static_cast<Eigen::Index>(i)));
    out << "\n";
  }
  if (!out) throw IoError("latent_map: write failed for " + csv_path);

  if (!write_heat_pgms) return;
  for (int j = 0; j < d; ++j) {
    const double lo = codes.row(j).minCoeff();
    const double hi = codes.row(j).maxCoeff();
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<std::uint8_t> img(static_cast<std::size_t>(pixels), 0);
    for (std::size_t i = 0; i < states.size(); ++i) {
      const int px = static_cast<int>(states[i].y) * cfg.image_width + static_cast<int>(states[i].x);
      const double t = (codes(j, static_cast<Eigen::Index>(i)) - lo) / span;
      img[static_cast<std::size_t>(px)] = static_cast<std::uint8_t>(std::floor(t * 255.0 + 0.5));
    }
    const std::string path = csv_path + ".z" + std::to_string(j + 1) + ".pgm";
    std::ofstream pgm(path, std::ios::binary);
    if (!pgm) throw IoError("latent_map: cannot open " + path);
    pgm << "P5\n" << cfg.image_width << " " << cfg.image_width << "\n255\n";
    pgm.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    if (!pgm) throw IoError("latent_map: write failed for " + path);
  }
}

}  // namespace mse2c
