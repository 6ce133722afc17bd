#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "orchkit/core.hpp"
#include "orchkit/stats.hpp"

namespace orchkit::ledger {

struct Summary {
  std::string method;
  std::string benchmark;
  std::size_t n = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  double mean_latency_ms = 0.0;
  double total_cost_units = 0.0;
  double mean_calls = 0.0;
  std::string config_digest;
  std::string manifest_digest;
  std::string dataset_digest;
  stats::RosterCosts roster_costs;
  std::optional<double> paper_estimate_cost;
};

struct Ledger {
  std::vector<RunRecord> records;
  std::vector<TaskKind> kinds;                       // parallel to records
  std::vector<std::optional<nlohmann::json>> router_snapshots;  // parallel to records
  std::optional<Summary> summary;
};

nlohmann::json answer_to_json(const std::optional<Answer>& a);
std::optional<Answer> answer_from_json(const nlohmann::json& j, TaskKind kind);

nlohmann::json record_to_json(const RunRecord& r, TaskKind kind,
                              const std::optional<nlohmann::json>& router_snapshot = std::nullopt);
RunRecord record_from_json(const nlohmann::json& j, TaskKind* kind_out = nullptr);

nlohmann::json summary_to_json(const Summary& s);
Summary summary_from_json(const nlohmann::json& j);

// Aggregates over item records; digests and costs are filled by the caller.
Summary summarize(const std::vector<RunRecord>& records, const stats::RosterCosts& costs);

Ledger parse_ledger(std::string_view contents, std::string_view source_name = "<memory>");
Ledger read_ledger(const std::filesystem::path& path);

/// Line-at-a-time JSONL writer; each line is flushed as it is written.
class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);

  void item(const RunRecord& r, TaskKind kind, const std::optional<nlohmann::json>& router_snapshot);
  void summary(const Summary& s);

 private:
  void line(const nlohmann::json& j);

  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace orchkit::ledger
