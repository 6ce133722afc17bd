#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "orchkit/agents.hpp"
#include "orchkit/core.hpp"

namespace testing {

inline orchkit::agents::AgentProfile synthetic(std::size_t index, std::string name, double accuracy,
                                               double failure_rate = 0.0, double cost = 1.0) {
  orchkit::agents::AgentProfile p;
  p.id = {index, std::move(name)};
  p.model_label = "synthetic-" + p.id.name;
  p.transport = orchkit::agents::TransportKind::kSynthetic;
  p.per_call_cost = cost;
  p.synthetic.default_accuracy = accuracy;
  p.synthetic.base_latency_ms = 100.0 + 50.0 * static_cast<double>(index);
  p.synthetic.jitter_ms = 40.0;
  p.synthetic.failure_rate = failure_rate;
  p.synthetic.rng_seed = 1000 + index;
  return p;
}

inline std::vector<orchkit::agents::AgentProfile> odx(double o = 1.0, double d = 1.0, double x = 1.0) {
  return {synthetic(0, "O", o), synthetic(1, "D", d), synthetic(2, "X", x)};
}

inline orchkit::Question mcq4(std::string id = "q1", char gold = 'B') {
  return orchkit::make_question(std::move(id), orchkit::TaskKind::kMcq4, "anatomy", "Which bone is longest?",
                                {"radius", "femur", "tibia", "ulna"}, orchkit::Answer::letter(gold));
}

inline orchkit::Question numeric(std::string id = "n1", std::string gold = "72") {
  return orchkit::make_question(std::move(id), orchkit::TaskKind::kOpenNumeric, "B1",
                                "Sam has 8 boxes of 9 pens. How many pens?", {}, orchkit::Answer::number(gold));
}

// Scratch directory under the build tree, wiped on construction.
inline std::filesystem::path scratch(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() / ("orchkit_test_" + std::to_string(::getpid())) /
             (name + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const std::filesystem::path& p, const std::string& contents) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << contents;
}

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(ORCHKIT_TEST_DATA) / name; }

}  // namespace testing
