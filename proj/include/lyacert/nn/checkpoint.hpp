#pragma once

#include "lyacert/nn/dense_net.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace lyacert::nn {

/// Named networks plus free-form run metadata ({algo, env, seed, step, config}).
struct Checkpoint {
  std::map<std::string, DenseNet> nets;
  nlohmann::json meta = nlohmann::json::object();

  bool has(const std::string& name) const { return nets.count(name) != 0; }
  const DenseNet& at(const std::string& name) const;
};

nlohmann::json to_json(const DenseNet& net);
DenseNet dense_net_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws std::runtime_error on a missing or malformed file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lyacert::nn
