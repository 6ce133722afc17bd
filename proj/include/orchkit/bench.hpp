#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "orchkit/core.hpp"
#include "orchkit/rng.hpp"

namespace orchkit::bench {

enum class Benchmark { kMmlu, kMmluPro, kGsm8k };

std::string_view benchmark_name(Benchmark b);  // "mmlu" | "mmlu_pro" | "gsm8k"
Benchmark parse_benchmark(std::string_view name);

/// One validated dataset line. MMLU-Pro records may carry fewer than ten
/// options; only ten-option records are eligible for sampling.
struct DatasetRecord {
  std::size_t source_index = 0;  // 0-based record ordinal in the file
  std::string item_id;
  std::string subject;
  std::string stem;
  std::vector<std::string> options;
  std::string gold;
};

struct Dataset {
  Benchmark benchmark = Benchmark::kMmlu;
  std::vector<DatasetRecord> records;
  std::string digest;  // SHA-256 of the file bytes

  const DatasetRecord& by_item_id(const std::string& item_id) const;
};

Dataset load_dataset(const std::filesystem::path& path, Benchmark benchmark);
Dataset parse_dataset(std::string_view contents, Benchmark benchmark, std::string_view source_name = "<memory>");

// Question view of a record; throws kValidation for ineligible MMLU-Pro records.
Question to_question(const DatasetRecord& record, Benchmark benchmark);

struct ManifestItem {
  std::string item_id;
  std::size_t source_index = 0;
  std::string subject_or_bucket;

  friend bool operator==(const ManifestItem&, const ManifestItem&) = default;
};

struct Manifest {
  Benchmark benchmark = Benchmark::kMmlu;
  std::uint64_t seed = 42;
  nlohmann::json protocol_params = nlohmann::json::object();
  std::string dataset_digest;
  std::vector<ManifestItem> items;  // evaluation order
  std::string created_digest;
};

inline constexpr std::string_view kManifestVersion = "1";

nlohmann::json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);  // verifies the digest
std::string manifest_digest(const Manifest& m);
void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

/// Questions in manifest order; GSM8K questions take their bucket as subject.
std::vector<Question> resolve_manifest(const Manifest& m, const Dataset& dataset);

const std::vector<std::string>& default_mmlu_subjects();

Manifest sample_mmlu(const Dataset& dataset, std::uint64_t seed,
                     const std::vector<std::string>& subjects = default_mmlu_subjects(),
                     std::size_t n_per_subject = 30);

struct MmluProProfile {
  std::size_t n_categories = 3;
  std::size_t n_per_category = 20;
};

inline constexpr MmluProProfile kMmluProDefault{3, 20};
inline constexpr MmluProProfile kMmluPro300{10, 30};

Manifest sample_mmlu_pro(const Dataset& dataset, std::uint64_t seed, MmluProProfile profile = kMmluProDefault);

Manifest sample_gsm8k(const Dataset& dataset, std::uint64_t seed, std::size_t bucket_size = 30);

std::size_t whitespace_token_count(std::string_view text);

bool score_item(const Question& q, const Verdict& verdict);

}  // namespace orchkit::bench
