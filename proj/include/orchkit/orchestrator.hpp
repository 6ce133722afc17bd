#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orchkit/agents.hpp"
#include "orchkit/core.hpp"
#include "orchkit/protocol.hpp"
#include "orchkit/router.hpp"

namespace orchkit::orchestrator {

enum class SelectMode { kFixed, kEma };

struct RoleSelect {
  SelectMode mode = SelectMode::kFixed;
  std::string agent;  // kFixed; empty means the first roster agent
};

struct PipelineConfig {
  std::vector<agents::AgentProfile> roster;
  RoleSelect dispatcher_select;
  RoleSelect merger_select;
  std::size_t n_facets = 0;          // 0: one facet per analyst, at most 3
  std::string fallback_agent;        // empty: cheapest agent, lowest index on ties
  int sc_k = 1;
  int shuffle_m = 0;
  double sc_temperature = 0.7;
  std::int64_t deadline_ms = agents::kDefaultDeadlineMs;
  std::vector<std::string> vote_tie_priority;  // empty: roster order
  std::size_t max_reply_chars = protocol::kDefaultReplyCharLimit;
  std::uint64_t seed = 42;           // root of the multi-shuffle streams
};

void validate_pipeline(const PipelineConfig& cfg);

/// Majority over parsed answers; among answers tied for the top count, the one
/// given by the highest-priority agent wins. `priority_rank[i]` is agent i's
/// rank (0 = highest). Absent answers take no part. nullopt when nothing parsed.
std::optional<Answer> majority_with_priority(const std::vector<std::optional<Answer>>& answers,
                                             const std::vector<std::size_t>& priority_rank);

/// Strict majority over parsed samples, else sample 0, else the first parsed one.
std::optional<Answer> aggregate_samples(const std::vector<std::optional<Answer>>& samples);

struct MergeOutcome {
  std::optional<Answer> answer;
  MergeTrace trace;
  int calls = 0;
  double latency_ms = 0.0;
  double cost_units = 0.0;
};

class Orchestrator {
 public:
  Orchestrator(PipelineConfig cfg, const agents::Invoker& invoker);

  const PipelineConfig& config() const noexcept { return cfg_; }
  const agents::AgentProfile& profile(const std::string& name) const;

  Verdict run_single(const std::string& agent, const Question& q) const;
  Verdict run_vote(const Question& q) const;

  /// Dispatch, parallel per-facet analysis, merge. Roles come from
  /// `router_view` when given, otherwise from the FIXED selections.
  Verdict run_orch(const Question& q, const std::optional<router::RoleAssignment>& router_view = std::nullopt) const;
  Verdict run_orch_subset(const Question& q, const std::vector<std::string>& subset) const;

  /// (shuffle_m + 1) option orders x sc_k decoding draws, one merge call each.
  MergeOutcome merge_with_consistency(const Question& q, const std::vector<AgentAnalysis>& analyses,
                                      const agents::AgentProfile& merger, int sc_k, int shuffle_m) const;

  /// Dispatches on the method. EMA methods require `router_view`.
  Verdict run(const MethodKind& method, const Question& q,
              const std::optional<router::RoleAssignment>& router_view = std::nullopt) const;

 private:
  struct Roles {
    const agents::AgentProfile* dispatcher;
    const agents::AgentProfile* merger;
    std::vector<const agents::AgentProfile*> analysts;
  };

  Verdict run_pipeline(const Question& q, const Roles& roles, std::size_t n_facets, int sc_k, int shuffle_m,
                       MethodKind method) const;
  AgentAnalysis to_analysis(const Question& q, const agents::AgentProfile& agent, std::string subquestion,
                            const agents::CompletionOutcome& outcome, protocol::ParseMode mode,
                            bool truncate) const;
  agents::DecodingParams deterministic_params() const;
  const agents::AgentProfile& fallback_profile() const;

  PipelineConfig cfg_;
  const agents::Invoker& invoker_;
};

}  // namespace orchkit::orchestrator
