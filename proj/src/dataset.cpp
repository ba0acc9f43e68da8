#include "mse2c/dataset.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

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

PlanarConfig planar_from_json(const json& j) {
  PlanarConfig cfg;
  cfg.image_width = j.at("image_width").get<int>();
  cfg.agent_radius = j.at("agent_radius").get<double>();
  cfg.action_max = j.at("action_max").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.obstacles.clear();
  for (const auto& ob : j.at("obstacles")) {
    cfg.obstacles.push_back({ob.at(0).get<double>(), ob.at(1).get<double>(), ob.at(2).get<double>()});
  }
  return cfg;
}

void append_f32_le(std::string& out, float v) {
  static_assert(sizeof(float) == 4);
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  out.append(bytes, 4);
}

float read_f32_le(const char* p) {
  float v;
  std::memcpy(&v, p, 4);
  return v;
}

}  // namespace

SampledTrajectory generate_sample(const PlanarConfig& cfg, int k, std::uint64_t seed, int index) {
  Rng rng(derive_stream(seed, static_cast<std::uint64_t>(index)));
  return sample_trajectory(rng, k, cfg);
}

Dataset generate_dataset(int n, int k, const PlanarConfig& cfg, std::uint64_t seed,
                         const std::string& path_stem) {
  if (n < 1) throw ValidationError("generate_dataset: n must be >= 1");
  validate(cfg);
  Dataset ds;
  ds.n = n;
  ds.k = k;
  ds.width = cfg.image_width;
  ds.action_dim = 2;
  ds.seed = seed;
  ds.planar = cfg;
  ds.samples.reserve(n);
  for (int i = 0; i < n; ++i) ds.samples.push_back(generate_sample(cfg, k, seed, i).sample);
  if (!path_stem.empty()) save_dataset(ds, path_stem);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path_stem) {
  json manifest = {{"n", ds.n},
                   {"k", ds.k},
                   {"width", ds.width},
                   {"action_dim", ds.action_dim},
                   {"seed", ds.seed},
                   {"planar", planar_to_json(ds.planar)}};
  const std::string manifest_path = path_stem + ".json";
  {
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) throw IoError("save_dataset: cannot open " + manifest_path);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("save_dataset: write failed for " + manifest_path);
  }

  const std::string blob_path = path_stem + ".bin";
  std::ofstream out(blob_path, std::ios::binary);
  if (!out) throw IoError("save_dataset: cannot open " + blob_path);
  std::string buf;
  const std::size_t pixels = static_cast<std::size_t>(ds.width) * ds.width;
  buf.reserve((pixels * (ds.k + 1) + 4u * ds.action_dim * ds.k));
  for (const auto& sample : ds.samples) {
    buf.clear();
    for (const auto& frame : sample.frames)
      buf.append(reinterpret_cast<const char*>(frame.data()), frame.size());
    for (const auto& action : sample.actions) {
      append_f32_le(buf, static_cast<float>(action.x()));
      append_f32_le(buf, static_cast<float>(action.y()));
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("save_dataset: write failed for " + blob_path);
}

Dataset load_dataset(const std::string& path_stem) {
  const std::string manifest_path = path_stem + ".json";
  std::ifstream min(manifest_path, std::ios::binary);
  if (!min) throw IoError("load_dataset: cannot open " + manifest_path);
  json manifest;
  try {
    min >> manifest;
  } catch (const json::exception& e) {
    throw IoError("load_dataset: bad manifest " + manifest_path + ": " + e.what());
  }

  Dataset ds;
  try {
    ds.n = manifest.at("n").get<int>();
    ds.k = manifest.at("k").get<int>();
    ds.width = manifest.at("width").get<int>();
    ds.action_dim = manifest.at("action_dim").get<int>();
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.planar = planar_from_json(manifest.at("planar"));
  } catch (const json::exception& e) {
    throw IoError("load_dataset: bad manifest " + manifest_path + ": " + e.what());
  }
  if (ds.action_dim != 2) throw IoError("load_dataset: unsupported action_dim in " + manifest_path);

  const std::string blob_path = path_stem + ".bin";
  std::ifstream in(blob_path, std::ios::binary);
  if (!in) throw IoError("load_dataset: cannot open " + blob_path);
  const std::size_t pixels = static_cast<std::size_t>(ds.width) * ds.width;
  const std::size_t frame_bytes = pixels * (ds.k + 1);
  const std::size_t action_bytes = 4u * ds.action_dim * ds.k;
  std::vector<char> buf(frame_bytes + action_bytes);
  ds.samples.reserve(ds.n);
  for (int i = 0; i < ds.n; ++i) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!in) throw IoError("load_dataset: truncated blob " + blob_path);
    TrajectorySample sample;
    for (int f = 0; f <= ds.k; ++f) {
      Image frame(pixels);
      std::memcpy(frame.data(), buf.data() + f * pixels, pixels);
      sample.frames.push_back(std::move(frame));
    }
    const char* actions = buf.data() + frame_bytes;
    for (int a = 0; a < ds.k; ++a) {
      sample.actions.emplace_back(read_f32_le(actions + 8 * a), read_f32_le(actions + 8 * a + 4));
    }
    ds.samples.push_back(std::move(sample));
  }
  if (in.peek() != EOF) throw IoError("load_dataset: trailing bytes in " + blob_path);
  return ds;
}

void write_pgm(const Image& frame, int width, const std::string& path) {
  if (frame.size() != static_cast<Eigen::Index>(width) * width)
    throw ValidationError("write_pgm: frame size does not match width");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_pgm: cannot open " + path);
  out << "P5\n" << width << " " << width << "\n255\n";
  for (Eigen::Index i = 0; i < frame.size(); ++i) {
    const char byte = frame[i] ? static_cast<char>(255) : 0;
    out.write(&byte, 1);
  }
  if (!out) throw IoError("write_pgm: write failed for " + path);
}

}  // namespace mse2c
