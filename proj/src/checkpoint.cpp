#include "mse2c/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "mse2c/errors.hpp"

namespace mse2c {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

void write_group(std::string& buf, const VecX<double>& params) {
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const float v = static_cast<float>(params[i]);
    char bytes[4];
    std::memcpy(bytes, &v, 4);
    buf.append(bytes, 4);
  }
}

void read_group(const std::vector<char>& blob, std::size_t& offset, VecX<double>& params) {
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    float v;
    std::memcpy(&v, blob.data() + offset, 4);
    offset += 4;
    params[i] = static_cast<double>(v);
  }
}

}  // namespace

void save_checkpoint(const ModelParams<double>& model, const std::string& path_stem) {
  const auto& cfg = model.config;
  json manifest = {{"format_version", kFormatVersion},
                   {"variant", to_string(cfg.variant)},
                   {"image_width", cfg.image_width},
                   {"latent_dim", cfg.latent_dim},
                   {"action_dim", cfg.action_dim},
                   {"hidden_encoder", cfg.hidden_encoder},
                   {"hidden_dynamics", cfg.hidden_dynamics},
                   {"hidden_decoder", cfg.hidden_decoder},
                   {"sigma_w2", cfg.sigma_w2},
                   {"param_counts",
                    {{"phi", model.phi().size()},
                     {"psi", model.psi().size()},
                     {"theta", model.theta().size()}}}};

  const std::string manifest_path = path_stem + ".json";
  {
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + manifest_path);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("save_checkpoint: write failed for " + manifest_path);
  }

  const std::string blob_path = path_stem + ".bin";
  std::ofstream out(blob_path, std::ios::binary);
  if (!out) throw IoError("save_checkpoint: cannot open " + blob_path);
  std::string buf;
  buf.reserve(4 * (model.phi().size() + model.psi().size() + model.theta().size()));
  write_group(buf, model.phi());
  write_group(buf, model.psi());
  write_group(buf, model.theta());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("save_checkpoint: write failed for " + blob_path);
}

ModelParams<double> load_checkpoint(const std::string& path_stem) {
  const std::string manifest_path = path_stem + ".json";
  std::ifstream min(manifest_path, std::ios::binary);
  if (!min) throw IoError("load_checkpoint: cannot open " + manifest_path);
  json manifest;
  try {
    min >> manifest;
  } catch (const json::exception& e) {
    throw IoError("load_checkpoint: bad manifest " + manifest_path + ": " + e.what());
  }

  ModelConfig cfg;
  Eigen::Index phi_count, psi_count, theta_count;
  try {
    if (manifest.at("format_version").get<int>() != kFormatVersion)
      throw IoError("load_checkpoint: unsupported format version in " + manifest_path);
    cfg.variant = dynamics_variant_from_string(manifest.at("variant").get<std::string>());
    cfg.image_width = manifest.at("image_width").get<int>();
    cfg.latent_dim = manifest.at("latent_dim").get<int>();
    cfg.action_dim = manifest.at("action_dim").get<int>();
    cfg.hidden_encoder = manifest.at("hidden_encoder").get<std::vector<int>>();
    cfg.hidden_dynamics = manifest.at("hidden_dynamics").get<std::vector<int>>();
    cfg.hidden_decoder = manifest.at("hidden_decoder").get<std::vector<int>>();
    cfg.sigma_w2 = manifest.at("sigma_w2").get<double>();
    const auto& counts = manifest.at("param_counts");
    phi_count = counts.at("phi").get<Eigen::Index>();
    psi_count = counts.at("psi").get<Eigen::Index>();
    theta_count = counts.at("theta").get<Eigen::Index>();
  } catch (const json::exception& e) {
    throw IoError("load_checkpoint: bad manifest " + manifest_path + ": " + e.what());
  }

  ModelParams<double> model = init_model<double>(cfg, 0);
  if (model.phi().size() != phi_count || model.psi().size() != psi_count ||
      model.theta().size() != theta_count)
    throw ValidationError("load_checkpoint: shape mismatch between manifest and architecture in " +
                          manifest_path);

  const std::string blob_path = path_stem + ".bin";
  std::ifstream in(blob_path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + blob_path);
  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected = 4 * static_cast<std::size_t>(phi_count + psi_count + theta_count);
  if (blob.size() != expected)
    throw ValidationError("load_checkpoint: shape mismatch, blob " + blob_path + " holds " +
                          std::to_string(blob.size()) + " bytes, expected " +
                          std::to_string(expected));

  std::size_t offset = 0;
  read_group(blob, offset, model.phi());
  read_group(blob, offset, model.psi());
  read_group(blob, offset, model.theta());
  return model;
}

}  // namespace mse2c
