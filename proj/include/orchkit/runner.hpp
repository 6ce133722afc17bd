#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "orchkit/agents.hpp"
#include "orchkit/config.hpp"
#include "orchkit/ledger.hpp"
#include "orchkit/router.hpp"

namespace orchkit::runner {

struct ItemResult {
  RunRecord record;
  TaskKind kind = TaskKind::kMcq4;
  std::optional<nlohmann::json> router_snapshot;
  std::optional<router::RoleAssignment> routed;  // EMA only
};

using ItemSink = std::function<void(const ItemResult&)>;

struct RunOutcome {
  std::vector<ItemResult> items;
  ledger::Summary summary;  // digests left empty
  std::vector<router::EmaState> final_states;
};

stats::RosterCosts roster_costs(const cli::RunConfig& cfg);

bool is_ema(const MethodKind& method);

/// Evaluates the questions in order. EMA methods route, run, score and feed
/// back one item at a time. `resume` records (a prefix of a previous run) are
/// replayed through the router and passed to the sink but not re-evaluated.
RunOutcome run_questions(const cli::RunConfig& cfg, const std::vector<Question>& questions,
                         const agents::Invoker& invoker, const ItemSink& sink = {},
                         const ledger::Ledger* resume = nullptr);

/// True when the run produced no answer at all and every agent call that was
/// recorded failed in transport (timeout or transport error).
bool transport_exhausted(const std::vector<RunRecord>& records);

/// Placeholder MCQ4 items for offline routing simulations.
std::vector<Question> simulation_items(std::size_t n, std::uint64_t seed);

}  // namespace orchkit::runner
