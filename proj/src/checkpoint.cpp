#include "icrl/checkpoint.hpp"

#include <fstream>

namespace icrl {

using nlohmann::json;

json mlp_to_json(const nn::MlpParams& params) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "mlp";
  j["layer_dims"] = params.layer_dims;
  j["hidden_activation"] = "tanh";
  j["output_activation"] = nn::to_string(params.output_activation);
  json weights = json::array();
  for (const auto& w : params.weights) weights.push_back(w.data);  // row-major
  j["weights"] = weights;
  j["biases"] = params.biases;
  return j;
}

nn::MlpParams mlp_from_json(const json& j) {
  check_container(j, "mlp");
  nn::MlpParams p;
  p.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  p.output_activation = nn::activation_from_string(j.at("output_activation").get<std::string>());
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  if (weights.size() + 1 != p.layer_dims.size() || biases.size() != weights.size()) {
    throw ConfigError("mlp container: layer count mismatch");
  }
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    nn::Matrix w(p.layer_dims[l + 1], p.layer_dims[l]);
    auto data = weights[l].get<std::vector<double>>();
    if (data.size() != w.data.size()) throw ConfigError("mlp container: weight size mismatch");
    w.data = std::move(data);
    p.weights.push_back(std::move(w));
    auto b = biases[l].get<std::vector<double>>();
    if (static_cast<int>(b.size()) != p.layer_dims[l + 1]) {
      throw ConfigError("mlp container: bias size mismatch");
    }
    p.biases.push_back(std::move(b));
  }
  if (!p.finite()) throw NumericalError("mlp container: non-finite parameters");
  return p;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void check_container(const json& j, const std::string& kind) {
  if (!j.contains("format_version") || !j.at("format_version").is_number_integer()) {
    throw ConfigError("container missing format_version");
  }
  if (j.at("format_version").get<int>() > kFormatVersion) {
    throw ConfigError("container format_version newer than supported");
  }
  if (j.value("kind", "") != kind) {
    throw ConfigError("expected container kind '" + kind + "', got '" + j.value("kind", "") +
                      "'");
  }
}

}  // namespace icrl
