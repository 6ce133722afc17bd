#include "orchkit/router.hpp"

#include <algorithm>
#include <numeric>

namespace orchkit::router {

EmaState fresh_state(AgentId agent) {
  EmaState s;
  s.agent = std::move(agent);
  return s;
}

void validate_weights(const RouterWeights& w) {
  if (!(w.alpha > 0.0 && w.alpha <= 1.0)) throw Error(ErrorCode::kConfig, "alpha must be in (0, 1]");
  for (double v : {w.w_quality, w.w_latency, w.w_cost, w.w_stability}) {
    if (!(v >= 0.0)) throw Error(ErrorCode::kConfig, "router weights must be >= 0");
  }
  if (!(w.latency_ref > 0.0) || !(w.cost_ref > 0.0)) {
    throw Error(ErrorCode::kConfig, "latency_ref and cost_ref must be > 0");
  }
}

EmaState ema_update(const EmaState& state, const RoutingObservation& obs, const RouterWeights& w) {
  if (!(obs.agent == state.agent)) {
    throw Error(ErrorCode::kValidation,
                "observation for agent " + obs.agent.name + " applied to state of " + state.agent.name);
  }
  const double a = w.alpha;
  auto smooth = [a](double prev, double x) { return a * x + (1.0 - a) * prev; };

  EmaState next = state;
  next.ema_quality = smooth(state.ema_quality, obs.quality);
  next.ema_stability = smooth(state.ema_stability, obs.stable);
  next.ema_latency = state.initialized_latency ? smooth(state.ema_latency, obs.latency_ms) : obs.latency_ms;
  next.ema_cost = state.initialized_cost ? smooth(state.ema_cost, obs.cost_units) : obs.cost_units;
  next.initialized_latency = true;
  next.initialized_cost = true;
  ++next.observations;
  return next;
}

double score(const EmaState& state, const RouterWeights& w) {
  const double latency_units = state.initialized_latency ? state.ema_latency / w.latency_ref : 1.0;
  const double cost_units = state.initialized_cost ? state.ema_cost / w.cost_ref : 1.0;
  return w.w_quality * state.ema_quality - w.w_latency * latency_units - w.w_cost * cost_units -
         w.w_stability * (1.0 - state.ema_stability);
}

namespace {

// Positions into `states`, best first.
std::vector<std::size_t> ranking(const std::vector<EmaState>& states, const RouterWeights& w) {
  std::vector<double> scores;
  scores.reserve(states.size());
  for (const auto& s : states) scores.push_back(score(s, w));
  std::vector<std::size_t> order(states.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return states[a].agent.index < states[b].agent.index;
  });
  return order;
}

std::vector<AgentId> in_roster_order(std::vector<AgentId> ids) {
  std::sort(ids.begin(), ids.end(), [](const AgentId& a, const AgentId& b) { return a.index < b.index; });
  return ids;
}

}  // namespace

RoleAssignment assign_roles(const std::vector<EmaState>& states, const RouterWeights& w) {
  if (states.size() < 2) throw Error(ErrorCode::kConfig, "role assignment needs at least two agents");
  const auto order = ranking(states, w);
  RoleAssignment roles;
  roles.merger = states[order[0]].agent;
  roles.dispatcher = states[order[1]].agent;
  for (const auto& s : states) roles.analysts.push_back(s.agent);
  roles.analysts = in_roster_order(std::move(roles.analysts));
  return roles;
}

std::vector<AgentId> select_top_k(const std::vector<EmaState>& states, std::size_t k, const RouterWeights& w) {
  if (k < 1 || k > states.size()) {
    throw Error(ErrorCode::kConfig, "k=" + std::to_string(k) + " outside [1, " + std::to_string(states.size()) + "]");
  }
  const auto order = ranking(states, w);
  std::vector<AgentId> picked;
  for (std::size_t i = 0; i < k; ++i) picked.push_back(states[order[i]].agent);
  return in_roster_order(std::move(picked));
}

Router::Router(std::vector<AgentId> roster, RouterWeights weights, QualityAttribution attribution)
    : weights_(weights), attribution_(attribution) {
  validate_roster_ids(roster);
  validate_weights(weights_);
  roster = in_roster_order(std::move(roster));
  for (auto& id : roster) states_.push_back(fresh_state(std::move(id)));
}

RoleAssignment Router::route(std::size_t k) const {
  const auto picked = select_top_k(states_, k, weights_);
  if (picked.size() == 1) return {picked[0], picked[0], picked};
  std::vector<EmaState> subset;
  for (const auto& s : states_) {
    if (std::find(picked.begin(), picked.end(), s.agent) != picked.end()) subset.push_back(s);
  }
  return assign_roles(subset, weights_);
}

void Router::observe(const RoutingObservation& obs) {
  for (auto& s : states_) {
    if (s.agent == obs.agent) {
      s = ema_update(s, obs, weights_);
      return;
    }
  }
  throw Error(ErrorCode::kValidation, "observation for unknown agent " + obs.agent.name);
}

void Router::feedback(const RunRecord& record) {
  // Participants are the agents holding an analysis slot for this item.
  for (const auto& state : states_) {
    for (const auto& a : record.verdict.analyses) {
      if (!(a.agent == state.agent)) continue;
      RoutingObservation obs;
      obs.agent = a.agent;
      obs.latency_ms = a.latency_ms;
      obs.cost_units = a.cost_units;
      obs.stable = a.status == AnalysisStatus::kOk ? 1 : 0;
      if (attribution_ == QualityAttribution::kPerAgent) {
        obs.quality = a.provisional && *a.provisional == record.gold ? 1 : 0;
      } else {
        obs.quality = record.correct ? 1 : 0;
      }
      observe(obs);
      break;
    }
  }
}

nlohmann::json Router::snapshot() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : states_) {
    out.push_back({{"agent", s.agent.name},
                   {"ema_quality", s.ema_quality},
                   {"ema_latency", s.ema_latency},
                   {"ema_cost", s.ema_cost},
                   {"ema_stability", s.ema_stability},
                   {"observations", s.observations},
                   {"score", score(s, weights_)}});
  }
  return out;
}

}  // namespace orchkit::router
