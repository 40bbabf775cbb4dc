#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "icrl/nn.hpp"

namespace icrl {

// All serialized containers carry this version; readers reject newer ones.
constexpr int kFormatVersion = 1;

nlohmann::json mlp_to_json(const nn::MlpParams& params);
nn::MlpParams mlp_from_json(const nlohmann::json& j);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

// Throws ConfigError unless j carries the expected kind and a readable version.
void check_container(const nlohmann::json& j, const std::string& kind);

}  // namespace icrl
