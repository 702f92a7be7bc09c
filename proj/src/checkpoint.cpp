#include "armgrad/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace armgrad::sbn {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "armgrad-checkpoint";

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json mlp_to_json(const Mlp& m) {
  json layers = json::array();
  for (const auto& layer : m.layers) {
    layers.push_back({{"rows", layer.weights.rows()},
                      {"cols", layer.weights.cols()},
                      {"weights", std::vector<double>(layer.weights.data(),
                                                      layer.weights.data() + layer.weights.size())},
                      {"bias", vector_to_json(layer.bias)}});
  }
  return {{"leaky_slope", m.leaky_slope}, {"layers", layers}};
}

Mlp mlp_from_json(const json& j) {
  Mlp m;
  m.leaky_slope = j.at("leaky_slope").get<double>();
  for (const auto& layer : j.at("layers")) {
    const auto rows = layer.at("rows").get<Eigen::Index>();
    const auto cols = layer.at("cols").get<Eigen::Index>();
    const auto weights = layer.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(weights.size()) != rows * cols) {
      throw DataError("checkpoint: weight tensor size does not match its shape");
    }
    AffineLayer a{Eigen::Map<const Matrix>(weights.data(), rows, cols), vector_from_json(layer.at("bias"))};
    if (a.bias.size() != rows) throw DataError("checkpoint: bias size does not match its layer");
    m.layers.push_back(std::move(a));
  }
  return m;
}

json mlps_to_json(const std::vector<Mlp>& ms) {
  json out = json::array();
  for (const auto& m : ms) out.push_back(mlp_to_json(m));
  return out;
}

std::vector<Mlp> mlps_from_json(const json& j) {
  std::vector<Mlp> out;
  for (const auto& m : j) out.push_back(mlp_from_json(m));
  return out;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  json model;
  if (const auto* vae = std::get_if<LayerStack>(&ckpt.model)) {
    model = {{"kind", "vae"},
             {"encoder", mlps_to_json(vae->encoder)},
             {"decoder", mlps_to_json(vae->decoder)},
             {"prior_logits", vector_to_json(vae->prior_logits)}};
  } else {
    const auto& cond = std::get<ConditionalStack>(ckpt.model);
    model = {{"kind", "conditional"},
             {"latent", mlps_to_json(cond.latent)},
             {"output", mlp_to_json(cond.output)}};
  }
  const auto& opt = ckpt.optimizer;
  json doc = {
      {"format", kFormat},
      {"version", kCheckpointVersion},
      {"model", model},
      {"optimizer",
       {{"step", opt.step},
        {"learning_rate", opt.learning_rate},
        {"beta1", opt.beta1},
        {"beta2", opt.beta2},
        {"epsilon", opt.epsilon},
        {"ascent", opt.ascent},
        {"first_moment", opt.first_moment},
        {"second_moment", opt.second_moment}}},
      {"rng", {{"seed", ckpt.rng_seed}, {"stream_id", ckpt.rng_stream_id}, {"cursor", ckpt.rng_cursor}}},
  };
  return doc.dump(1);
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormat) throw DataError("not an armgrad checkpoint");
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    const auto& model = doc.at("model");
    const auto kind = model.at("kind").get<std::string>();
    if (kind == "vae") {
      LayerStack s;
      s.encoder = mlps_from_json(model.at("encoder"));
      s.decoder = mlps_from_json(model.at("decoder"));
      s.prior_logits = vector_from_json(model.at("prior_logits"));
      s.validate();
      ckpt.model = std::move(s);
    } else if (kind == "conditional") {
      ConditionalStack s;
      s.latent = mlps_from_json(model.at("latent"));
      s.output = mlp_from_json(model.at("output"));
      s.validate();
      ckpt.model = std::move(s);
    } else {
      throw DataError("unknown checkpoint model kind '" + kind + "'");
    }
    const auto& opt = doc.at("optimizer");
    ckpt.optimizer.step = opt.at("step").get<std::uint64_t>();
    ckpt.optimizer.learning_rate = opt.at("learning_rate").get<double>();
    ckpt.optimizer.beta1 = opt.at("beta1").get<double>();
    ckpt.optimizer.beta2 = opt.at("beta2").get<double>();
    ckpt.optimizer.epsilon = opt.at("epsilon").get<double>();
    ckpt.optimizer.ascent = opt.at("ascent").get<bool>();
    ckpt.optimizer.first_moment = opt.at("first_moment").get<std::vector<std::vector<double>>>();
    ckpt.optimizer.second_moment = opt.at("second_moment").get<std::vector<std::vector<double>>>();
    const auto& rng = doc.at("rng");
    ckpt.rng_seed = rng.at("seed").get<std::uint64_t>();
    ckpt.rng_stream_id = rng.at("stream_id").get<std::uint64_t>();
    ckpt.rng_cursor = rng.at("cursor").get<std::uint64_t>();
    return ckpt;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const DimensionError& e) {
    throw DataError(std::string("inconsistent checkpoint shapes: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << checkpoint_to_string(ckpt) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_string(buffer.str());
}

}  // namespace armgrad::sbn
