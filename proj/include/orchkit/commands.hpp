#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "orchkit/core.hpp"
#include "orchkit/ledger.hpp"

namespace orchkit::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitInput = 2, kExitPairing = 3, kExitTransport = 4 };

int exit_code_for(ErrorCode code);

struct SampleArgs {
  std::string benchmark = "mmlu";
  std::uint64_t seed = 42;
  std::filesystem::path dataset;
  std::filesystem::path out;
  std::string profile = "default";  // mmlu_pro: default | mmlu_pro_300
  std::size_t per_subject = 30;
  std::size_t bucket_size = 30;
};

struct RunArgs {
  std::filesystem::path config;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> ledger;
  std::optional<std::string> method;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> cache;
  std::optional<std::string> cache_mode;
  std::optional<std::size_t> top_k;
  bool resume = false;
};

struct CompareArgs {
  std::filesystem::path a;
  std::filesystem::path b;
  bool corrected = false;
};

struct ReportArgs {
  std::vector<std::filesystem::path> ledgers;
  std::string baseline;  // config name or method label; empty = first ledger
  std::string group_by = "none";
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> markdown;
  std::optional<std::filesystem::path> json;
};

struct SimulateArgs {
  std::filesystem::path config;
  std::size_t n = 1000;
  std::size_t k = 1;
  std::optional<std::uint64_t> seed;
  std::size_t window = 200;
  std::size_t tail = 200;
  std::optional<std::filesystem::path> ledger;
  std::optional<std::filesystem::path> out;
};

int cmd_sample(const SampleArgs& args, std::ostream& out, std::ostream& err);
int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err);
int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);

struct ReportRow {
  std::string config;  // ledger file stem
  std::string method;
  std::string group;
  std::size_t n = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  double mean_latency_ms = 0.0;
  std::optional<double> paper_estimate_cost;  // per question
  double measured_cost = 0.0;                 // mean per question
  std::optional<double> delta_accuracy;       // vs baseline, same group

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ReportTable {
  std::string baseline;
  std::string group_by;
  std::vector<ReportRow> rows;

  friend bool operator==(const ReportTable&, const ReportTable&) = default;
};

struct NamedLedger {
  std::string name;
  ledger::Ledger ledger;
};

ReportTable build_report(const std::vector<NamedLedger>& ledgers, const std::string& baseline,
                         const std::string& group_by);
nlohmann::json report_to_json(const ReportTable& t);
ReportTable report_from_json(const nlohmann::json& j);
std::string report_csv(const ReportTable& t);
std::string report_markdown(const ReportTable& t);

/// Full command line (argv[0] excluded) -> exit code.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace orchkit::cli
