#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ikh/net.hpp"

namespace testutil {

namespace fs = std::filesystem;

inline fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ikh_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Random architecture: 1-3 hidden layers, random widths and activations.
template <typename T>
ikh::net::BasicMlp<T> random_net(std::mt19937_64& rng, std::size_t in = 0, std::size_t out = 0) {
  std::uniform_int_distribution<std::size_t> width(1, 12), depth(1, 3);
  std::uniform_int_distribution<int> act(0, 2);
  std::vector<std::size_t> dims{in ? in : width(rng)};
  const auto hidden = depth(rng);
  for (std::size_t i = 0; i < hidden; ++i) dims.push_back(width(rng));
  dims.push_back(out ? out : width(rng));
  auto net = ikh::net::BasicMlp<T>::xavier(dims, ikh::net::Activation::ReLU, ikh::net::Activation::Identity, rng);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& layer : net.layers()) {
    layer.activation = static_cast<ikh::net::Activation>(act(rng));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = static_cast<T>(n(rng));
  }
  return net;
}

}  // namespace testutil
