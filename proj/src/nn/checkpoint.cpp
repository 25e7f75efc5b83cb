#include "lyacert/nn/checkpoint.hpp"

#include <fstream>

namespace lyacert::nn {

using nlohmann::json;

const DenseNet& Checkpoint::at(const std::string& name) const {
  auto it = nets.find(name);
  if (it == nets.end()) throw std::runtime_error("checkpoint has no network '" + name + "'");
  return it->second;
}

// Weight matrices are stored row-major, one flat array per layer.
json to_json(const DenseNet& net) {
  json weights = json::array();
  json biases = json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const Matrix& w = net.weights()[l];
    json flat = json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    weights.push_back(std::move(flat));
    biases.push_back(std::vector<double>(net.biases()[l].data(),
                                         net.biases()[l].data() + net.biases()[l].size()));
  }
  return json{{"layer_sizes", net.layer_sizes()},
              {"weights", std::move(weights)},
              {"biases", std::move(biases)},
              {"activations",
               {std::string(to_string(net.hidden_activation())),
                std::string(to_string(net.output_activation()))}}};
}

DenseNet dense_net_from_json(const json& doc) {
  const auto sizes = doc.at("layer_sizes").get<std::vector<int>>();
  const auto activations = doc.at("activations").get<std::vector<std::string>>();
  if (activations.size() != 2) throw std::runtime_error("checkpoint: expected two activations");
  DenseNet net(sizes, activation_from_string(activations[0]),
               activation_from_string(activations[1]));
  const json& weights = doc.at("weights");
  const json& biases = doc.at("biases");
  if (weights.size() != net.num_layers() || biases.size() != net.num_layers())
    throw std::runtime_error("checkpoint: layer count does not match layer_sizes");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix& w = net.weights()[l];
    const auto flat = weights[l].get<std::vector<double>>();
    const auto b = biases[l].get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(w.size()) ||
        b.size() != static_cast<std::size_t>(net.biases()[l].size()))
      throw std::runtime_error("checkpoint: parameter array has the wrong length");
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = flat[static_cast<std::size_t>(r * w.cols() + c)];
    net.biases()[l] = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
  }
  return net;
}

json to_json(const Checkpoint& checkpoint) {
  json nets = json::object();
  for (const auto& [name, net] : checkpoint.nets) nets[name] = to_json(net);
  return json{{"nets", std::move(nets)}, {"meta", checkpoint.meta}};
}

Checkpoint checkpoint_from_json(const json& doc) {
  Checkpoint checkpoint;
  for (const auto& [name, net] : doc.at("nets").items())
    checkpoint.nets.emplace(name, dense_net_from_json(net));
  if (doc.contains("meta")) checkpoint.meta = doc.at("meta");
  return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << to_json(checkpoint).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt checkpoint " + path.string() + ": " + e.what());
  } catch (const ContractViolation& e) {
    throw std::runtime_error("corrupt checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace lyacert::nn
