#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "orchkit/agents.hpp"
#include "orchkit/bench.hpp"
#include "orchkit/orchestrator.hpp"
#include "orchkit/router.hpp"

namespace orchkit::cli {

inline constexpr int kConfigVersion = 1;

struct RunConfig {
  bench::Benchmark benchmark = bench::Benchmark::kMmlu;
  std::filesystem::path dataset;
  std::filesystem::path manifest;
  MethodKind method = MethodKind::orch();
  std::uint64_t seed = 42;
  orchestrator::PipelineConfig pipeline;
  std::size_t top_k = 0;  // EMA analyst count; 0 = whole roster
  router::RouterWeights weights;
  router::QualityAttribution attribution = router::QualityAttribution::kRun;
  std::filesystem::path cache_path;
  agents::CacheMode cache_mode = agents::CacheMode::kOff;
  std::filesystem::path ledger;
};

/// Parses and validates a config document. Unknown keys are rejected at
/// every level. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Normalized form of the settings that shape results; file locations are
/// left out so that relocated runs keep the same digest.
nlohmann::json config_fingerprint(const RunConfig& cfg);
std::string config_digest(const RunConfig& cfg);

std::vector<AgentId> roster_ids(const RunConfig& cfg);

}  // namespace orchkit::cli
