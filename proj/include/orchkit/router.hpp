#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "orchkit/core.hpp"

namespace orchkit::router {

inline constexpr double kQualityPrior = 0.5;
inline constexpr double kStabilityPrior = 1.0;

struct EmaState {
  AgentId agent;
  double ema_quality = kQualityPrior;
  double ema_latency = 0.0;
  double ema_cost = 0.0;
  double ema_stability = kStabilityPrior;
  std::size_t observations = 0;
  bool initialized_latency = false;
  bool initialized_cost = false;

  friend bool operator==(const EmaState&, const EmaState&) = default;
};

EmaState fresh_state(AgentId agent);

struct RouterWeights {
  double alpha = 0.2;
  double w_quality = 1.0;
  double w_latency = 0.1;
  double w_cost = 0.1;
  double w_stability = 0.5;
  double latency_ref = 2000.0;  // ms
  double cost_ref = 1.0;
};

void validate_weights(const RouterWeights& w);

struct RoutingObservation {
  AgentId agent;
  int quality = 0;  // 1 correct, 0 incorrect
  double latency_ms = 0.0;
  double cost_units = 0.0;
  int stable = 1;   // 0 after a timeout, transport error or malformed reply
};

/// One smoothing step, s <- alpha*obs + (1-alpha)*s, per tracked signal.
/// Latency and cost adopt their first observation verbatim.
EmaState ema_update(const EmaState& state, const RoutingObservation& obs, const RouterWeights& w);

/// Quality minus normalized latency/cost penalties minus an instability
/// penalty. Uninitialized latency/cost count as exactly one reference unit.
double score(const EmaState& state, const RouterWeights& w);

struct RoleAssignment {
  AgentId merger;
  AgentId dispatcher;
  std::vector<AgentId> analysts;  // roster order
};

// Merger = best score, dispatcher = runner-up; ties go to the lower index.
RoleAssignment assign_roles(const std::vector<EmaState>& states, const RouterWeights& w);

// The k best agents, returned in roster (index) order.
std::vector<AgentId> select_top_k(const std::vector<EmaState>& states, std::size_t k, const RouterWeights& w);

enum class QualityAttribution { kRun, kPerAgent };

/// Per-agent EMA bookkeeping for one evaluation run. Feedback must arrive in
/// item order, before the next item is routed.
class Router {
 public:
  Router(std::vector<AgentId> roster, RouterWeights weights,
         QualityAttribution attribution = QualityAttribution::kRun);

  /// Roles among the top-k agents. k = 1 makes the single selected agent
  /// dispatcher, sole analyst and merger.
  RoleAssignment route(std::size_t k) const;

  void feedback(const RunRecord& record);
  void observe(const RoutingObservation& obs);

  const std::vector<EmaState>& states() const noexcept { return states_; }
  const RouterWeights& weights() const noexcept { return weights_; }
  nlohmann::json snapshot() const;

 private:
  std::vector<EmaState> states_;
  RouterWeights weights_;
  QualityAttribution attribution_;
};

}  // namespace orchkit::router
