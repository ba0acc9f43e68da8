#include "mse2c/run_config.hpp"

#include <fstream>

#include "mse2c/errors.hpp"

namespace mse2c {

namespace {

using nlohmann::json;

json planar_to_json(const PlanarConfig& cfg) {
  json obstacles = json::array();
  for (const auto& ob : cfg.obstacles) obstacles.push_back({ob.x, ob.y, ob.radius});
  return {{"image_width", cfg.image_width},
          {"agent_radius", cfg.agent_radius},
          {"action_max", cfg.action_max},
          {"seed", cfg.seed},
          {"obstacles", obstacles}};
}

template <typename T>
void maybe_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json default_run_config_json() { return run_config_to_json(RunConfig{}); }

json run_config_to_json(const RunConfig& cfg) {
  return {{"planar", planar_to_json(cfg.planar)},
          {"data", {{"n", cfg.data_n}, {"k", cfg.data_k}, {"seed", cfg.data_seed}}},
          {"train",
           {{"k", cfg.train.k},
            {"latent_dim", cfg.train.latent_dim},
            {"epochs", cfg.train.epochs},
            {"learning_rate", cfg.train.learning_rate},
            {"lambda1", cfg.train.lambda1},
            {"lambda2", cfg.train.lambda2},
            {"epsilon", cfg.train.epsilon},
            {"batch_size", cfg.train.batch_size},
            {"optimizer", to_string(cfg.train.optimizer)},
            {"seed", cfg.train.seed},
            {"sigma_w2", cfg.train.sigma_w2},
            {"variant", to_string(cfg.train.variant)},
            {"hidden_encoder", cfg.train.hidden_encoder},
            {"hidden_dynamics", cfg.train.hidden_dynamics},
            {"hidden_decoder", cfg.train.hidden_decoder},
            {"grad_clip", cfg.train.grad_clip},
            {"checkpoint_every", cfg.train.checkpoint_every}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  cfg.planar = default_planar_config();
  if (j.contains("planar")) {
    const auto& p = j.at("planar");
    maybe_get(p, "image_width", cfg.planar.image_width);
    maybe_get(p, "agent_radius", cfg.planar.agent_radius);
    maybe_get(p, "action_max", cfg.planar.action_max);
    maybe_get(p, "seed", cfg.planar.seed);
    if (p.contains("obstacles")) {
      cfg.planar.obstacles.clear();
      for (const auto& ob : p.at("obstacles"))
        cfg.planar.obstacles.push_back(
            {ob.at(0).get<double>(), ob.at(1).get<double>(), ob.at(2).get<double>()});
    }
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    maybe_get(d, "n", cfg.data_n);
    maybe_get(d, "k", cfg.data_k);
    maybe_get(d, "seed", cfg.data_seed);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    maybe_get(t, "k", cfg.train.k);
    maybe_get(t, "latent_dim", cfg.train.latent_dim);
    maybe_get(t, "epochs", cfg.train.epochs);
    maybe_get(t, "learning_rate", cfg.train.learning_rate);
    maybe_get(t, "lambda1", cfg.train.lambda1);
    maybe_get(t, "lambda2", cfg.train.lambda2);
    maybe_get(t, "epsilon", cfg.train.epsilon);
    maybe_get(t, "batch_size", cfg.train.batch_size);
    if (t.contains("optimizer"))
      cfg.train.optimizer = optimizer_from_string(t.at("optimizer").get<std::string>());
    maybe_get(t, "seed", cfg.train.seed);
    maybe_get(t, "sigma_w2", cfg.train.sigma_w2);
    if (t.contains("variant"))
      cfg.train.variant = dynamics_variant_from_string(t.at("variant").get<std::string>());
    maybe_get(t, "hidden_encoder", cfg.train.hidden_encoder);
    maybe_get(t, "hidden_dynamics", cfg.train.hidden_dynamics);
    maybe_get(t, "hidden_decoder", cfg.train.hidden_decoder);
    maybe_get(t, "grad_clip", cfg.train.grad_clip);
    maybe_get(t, "checkpoint_every", cfg.train.checkpoint_every);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j;
  if (path.empty()) {
    j = default_run_config_json();
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("config: cannot open " + path);
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ValidationError("config: bad JSON in " + path + ": " + e.what());
    }
  }

  for (const auto& entry : overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError("config override must look like key.path=value: " + entry);
    const std::string key = entry.substr(0, eq);
    const std::string value = entry.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // plain string
    }
    json* node = &j;
    std::size_t begin = 0;
    while (true) {
      const auto dot = key.find('.', begin);
      const std::string part = key.substr(begin, dot - begin);
      if (part.empty()) throw ValidationError("config override has an empty key part: " + entry);
      if (dot == std::string::npos) {
        (*node)[part] = parsed;
        break;
      }
      node = &(*node)[part];
      begin = dot + 1;
    }
  }

  RunConfig cfg;
  try {
    cfg = run_config_from_json(j);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  validate(cfg.planar);
  validate(cfg.train);
  if (cfg.data_n < 1) throw ValidationError("config: data.n must be >= 1");
  if (cfg.data_k < 1) throw ValidationError("config: data.k must be >= 1");
  return cfg;
}

}  // namespace mse2c
