#include "titrate/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include "titrate/errors.hpp"

namespace titrate {

using nlohmann::json;

json checkpoint_to_json(const Checkpoint& ckpt) {
  const PolicyWeights& w = ckpt.weights;
  auto to_vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["layer_dims"] = {kObsDim, kHidden, kActions};
  doc["layers"] = json::array({
      {{"name", "hidden"},
       {"rows", kHidden},
       {"cols", kObsDim},
       {"weights", to_vec(w.hidden_weights())},
       {"bias", to_vec(w.hidden_bias())}},
      {{"name", "output"},
       {"rows", kActions},
       {"cols", kHidden},
       {"weights", to_vec(w.output_weights())},
       {"bias", to_vec(w.output_bias())}},
  });
  doc["metadata"] = {{"batches", ckpt.metadata.batches},
                     {"final_mean_reward",
                      ckpt.metadata.final_mean_reward ? json(*ckpt.metadata.final_mean_reward) : json(nullptr)},
                     {"seed", ckpt.metadata.seed}};
  return doc;
}

namespace {

void copy_exact(const json& arr, std::span<double> out, const std::string& what) {
  if (!arr.is_array() || arr.size() != out.size())
    throw ValidationError("checkpoint " + what + " must hold exactly " + std::to_string(out.size()) + " values");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!arr[i].is_number()) throw ValidationError("checkpoint " + what + " contains a non-number");
    out[i] = arr[i].get<double>();
    if (!std::isfinite(out[i])) throw ValidationError("checkpoint " + what + " contains a non-finite value");
  }
}

}  // namespace

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw ValidationError("unsupported checkpoint format_version");
    if (doc.at("layer_dims") != json({kObsDim, kHidden, kActions}))
      throw ValidationError("checkpoint layer_dims must be [4, 128, 2]");
    const json& layers = doc.at("layers");
    if (!layers.is_array() || layers.size() != 2) throw ValidationError("checkpoint must have exactly 2 layers");

    std::size_t count = 0;
    for (const auto& layer : layers) count += layer.at("weights").size() + layer.at("bias").size();
    if (count != kParamCount)
      throw ValidationError("checkpoint holds " + std::to_string(count) + " parameters, expected 898");

    Checkpoint ckpt;
    const json& hidden = layers[0];
    const json& output = layers[1];
    if (hidden.at("rows").get<std::size_t>() != kHidden || hidden.at("cols").get<std::size_t>() != kObsDim ||
        output.at("rows").get<std::size_t>() != kActions || output.at("cols").get<std::size_t>() != kHidden)
      throw ValidationError("checkpoint layer shapes must be 128x4 and 2x128");
    copy_exact(hidden.at("weights"), ckpt.weights.hidden_weights(), "hidden weights");
    copy_exact(hidden.at("bias"), ckpt.weights.hidden_bias(), "hidden bias");
    copy_exact(output.at("weights"), ckpt.weights.output_weights(), "output weights");
    copy_exact(output.at("bias"), ckpt.weights.output_bias(), "output bias");

    if (doc.contains("metadata")) {
      const json& m = doc.at("metadata");
      ckpt.metadata.batches = m.value("batches", 0);
      if (m.contains("final_mean_reward") && !m.at("final_mean_reward").is_null())
        ckpt.metadata.final_mean_reward = m.at("final_mean_reward").get<double>();
      ckpt.metadata.seed = m.value("seed", std::uint64_t{0});
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace titrate
