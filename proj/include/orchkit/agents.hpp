#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "orchkit/core.hpp"
#include "orchkit/protocol.hpp"

namespace orchkit::agents {

inline constexpr std::int64_t kDefaultDeadlineMs = 60'000;

struct DecodingParams {
  double temperature = 0.0;
  std::size_t max_reply_chars = protocol::kDefaultReplyCharLimit;
  std::uint64_t sample_tag = 0;
};

enum class CompletionStatus { kOk, kTimeout, kTransportError };

std::string_view completion_status_name(CompletionStatus status);
AnalysisStatus to_analysis_status(CompletionStatus status);

struct ProviderMeta {
  std::string model_version;
  std::optional<TokenUsage> usage;
};

struct CompletionOutcome {
  CompletionStatus status = CompletionStatus::kTransportError;
  std::optional<std::string> text;
  double latency_ms = 0.0;
  double cost_units = 0.0;
  std::optional<ProviderMeta> provider_meta;
  std::string error;  // empty when OK
  bool cache_hit = false;
  int attempts = 0;   // provider round trips, retries included
};

enum class TransportKind { kLive, kSynthetic, kCacheOnly };

std::string_view transport_name(TransportKind kind);
TransportKind parse_transport(std::string_view name);

struct LiveEndpoint {
  std::string url;      // full chat-completion URL, e.g. https://api.example.com/v1/chat/completions
  std::string key_env;  // environment variable holding the bearer token
  int max_retries = 2;
  double backoff_initial_ms = 500.0;
};

struct SyntheticAgentSpec {
  std::map<std::string, double> accuracy_by_subject;
  double default_accuracy = 0.5;  // subjects missing from the map
  double base_latency_ms = 0.0;
  double jitter_ms = 0.0;
  double failure_rate = 0.0;
  std::uint64_t rng_seed = 0;

  double accuracy_for(const std::string& subject) const;
};

void validate_synthetic_spec(const SyntheticAgentSpec& spec);

struct AgentProfile {
  AgentId id;
  std::string model_label;
  TransportKind transport = TransportKind::kSynthetic;
  LiveEndpoint live;
  SyntheticAgentSpec synthetic;
  double per_call_cost = 0.0;
};

void validate_profile(const AgentProfile& profile);

/// Offline stand-in for a provider. A pure function of its inputs: the same
/// (spec, item, role, sample_tag) always yields the same reply, latency and
/// failure decision. Cost is left at 0; `Invoker` bills the profile rate.
CompletionOutcome synthetic_complete(const SyntheticAgentSpec& spec, const Question& q,
                                     const protocol::PromptBundle& prompt, const DecodingParams& params);

/// SHA-256 over (model_label, prompt text, temperature, sample_tag, role).
std::string cache_key(const AgentProfile& profile, const protocol::PromptBundle& prompt,
                      const DecodingParams& params);

enum class CacheMode { kReadWrite, kReadOnly, kOff };

std::string_view cache_mode_name(CacheMode mode);
CacheMode parse_cache_mode(std::string_view name);

struct CacheEntry {
  std::string key;
  std::string model_label;
  std::string role_hint;
  std::string text;
  std::optional<TokenUsage> token_usage;
  std::string created_at;
};

/// Prompt/response cache persisted as append-only JSONL. Reads may run
/// concurrently; appends are serialized.
class ResponseCache {
 public:
  ResponseCache(std::filesystem::path path, CacheMode mode);

  std::optional<CacheEntry> lookup(const std::string& key) const;
  // No-op unless the mode is READ_WRITE. Later entries for a key win on reload.
  void store(CacheEntry entry);

  CacheMode mode() const noexcept { return mode_; }
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  CacheMode mode_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, CacheEntry> entries_;
};

/// Sleep hook used between retries; tests substitute a recorder.
using SleepFn = std::function<void(double ms)>;

/// One HTTP chat-completion exchange with bounded retry. Exposed for tests;
/// callers normally go through Invoker.
CompletionOutcome live_complete(const AgentProfile& profile, const protocol::PromptBundle& prompt,
                                const DecodingParams& params, std::int64_t deadline_ms, const SleepFn& sleep,
                                std::atomic<std::uint64_t>* network_calls = nullptr);

struct AgentRequest {
  const AgentProfile* profile = nullptr;
  protocol::PromptBundle prompt;
  DecodingParams params;
};

class Invoker {
 public:
  explicit Invoker(ResponseCache* cache = nullptr, SleepFn sleep = {});

  /// Never throws; failures are reported through the outcome status.
  CompletionOutcome invoke(const AgentProfile& profile, const Question& q, const protocol::PromptBundle& prompt,
                           const DecodingParams& params, std::int64_t deadline_ms) const;

  /// Concurrent invocations; results come back in request order.
  std::vector<CompletionOutcome> fan_out(const Question& q, const std::vector<AgentRequest>& requests,
                                         std::int64_t deadline_ms) const;

  std::uint64_t network_calls() const noexcept { return network_calls_.load(); }

 private:
  ResponseCache* cache_;
  SleepFn sleep_;
  mutable std::atomic<std::uint64_t> network_calls_{0};
};

}  // namespace orchkit::agents
