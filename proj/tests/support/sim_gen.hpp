#pragma once

#include <random>

#include "twinarch/simulation.hpp"

namespace twinarch::testgen {

inline ModelSpec traffic_spec(std::string id = "road") {
  ModelSpec s;
  s.model_id = std::move(id);
  s.kind = "traffic-flow";
  s.inputs = {"vehicleFlow"};
  s.outputs = {"density", "speed", "throughput"};
  return s;
}

inline SimScenario random_traffic_scenario(std::mt19937_64& rng, const std::string& model_id) {
  SimScenario sc;
  sc.model_id = model_id;
  sc.horizon = 1 + static_cast<int>(rng() % 40);
  sc.step_size = 10;
  sc.seed = rng();
  sc.initial_state["density"] = std::uniform_real_distribution<double>(0, 1)(rng);
  for (int k = 0; k < sc.horizon; k += 1 + static_cast<int>(rng() % 5)) {
    sc.input_series[k]["vehicleFlow"] = std::uniform_real_distribution<double>(0, 400)(rng);
  }
  if (rng() % 2) sc.overrides["green_extension"] = std::uniform_real_distribution<double>(0, 60)(rng);
  if (rng() % 2) sc.overrides["jitter"] = std::uniform_real_distribution<double>(0, 0.5)(rng);
  if (rng() % 3 == 0) sc.overrides["capacity_scale"] = std::uniform_real_distribution<double>(1, 200)(rng);
  return sc;
}

}  // namespace twinarch::testgen
