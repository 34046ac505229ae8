#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "hopnav/controller.hpp"

namespace hopnav::test {

// Trained default hop model, cached next to the test binaries so the costly
// training runs once per build tree.
inline const HopModel& trained_model() {
  static const HopModel model = [] {
    const std::string path = HOPNAV_MODEL_CACHE;
    if (std::filesystem::exists(path)) return HopModel::load(path);
    SlipParams params;
    const auto data = generate_training_data(params, 20000, 7);
    HopModel m = train(TrainConfig{}, data);
    m.save(path);
    return m;
  }();
  return model;
}

// Steady 4 m/s gait, cached as plain text beside the model.
inline const SteadyGait& steady_gait() {
  static const SteadyGait gait = [] {
    const std::string path = std::string(HOPNAV_MODEL_CACHE) + ".gait.txt";
    SteadyGait g;
    if (std::ifstream in(path); in >> g.velocity.x() >> g.velocity.y() >> g.velocity.z() >> g.pitch >> g.hop_length)
      return g;
    g = find_steady_gait(SlipParams{}, 4.0, 1.0);
    std::ofstream out(path);
    out.precision(17);
    out << g.velocity.x() << ' ' << g.velocity.y() << ' ' << g.velocity.z() << ' ' << g.pitch << ' ' << g.hop_length
        << '\n';
    return g;
  }();
  return gait;
}

}  // namespace hopnav::test
