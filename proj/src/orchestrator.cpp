#include "orchkit/orchestrator.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "orchkit/digest.hpp"
#include "orchkit/rng.hpp"

namespace orchkit::orchestrator {

using agents::AgentProfile;
using agents::CompletionOutcome;
using agents::CompletionStatus;
using agents::DecodingParams;
using protocol::ParseMode;

namespace {

bool in_roster(const PipelineConfig& cfg, const std::string& name) {
  return std::any_of(cfg.roster.begin(), cfg.roster.end(),
                     [&](const AgentProfile& p) { return p.id.name == name; });
}

double max_latency(const std::vector<CompletionOutcome>& outcomes) {
  double m = 0.0;
  for (const auto& o : outcomes) m = std::max(m, o.latency_ms);
  return m;
}

}  // namespace

void validate_pipeline(const PipelineConfig& cfg) {
  if (cfg.roster.empty()) throw Error(ErrorCode::kConfig, "roster is empty");
  std::vector<AgentId> ids;
  for (const auto& p : cfg.roster) {
    agents::validate_profile(p);
    ids.push_back(p.id);
  }
  try {
    validate_roster_ids(ids);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  for (const auto* sel : {&cfg.dispatcher_select, &cfg.merger_select}) {
    if (sel->mode == SelectMode::kFixed && !sel->agent.empty() && !in_roster(cfg, sel->agent)) {
      throw Error(ErrorCode::kConfig, "role agent '" + sel->agent + "' is not in the roster");
    }
  }
  if (!cfg.fallback_agent.empty() && !in_roster(cfg, cfg.fallback_agent)) {
    throw Error(ErrorCode::kConfig, "fallback agent '" + cfg.fallback_agent + "' is not in the roster");
  }
  for (const auto& name : cfg.vote_tie_priority) {
    if (!in_roster(cfg, name)) throw Error(ErrorCode::kConfig, "tie priority names unknown agent '" + name + "'");
  }
  if (cfg.n_facets > 3) throw Error(ErrorCode::kConfig, "n_facets must be at most 3");
  if (cfg.sc_k < 1) throw Error(ErrorCode::kConfig, "sc_K must be >= 1");
  if (cfg.shuffle_m < 0) throw Error(ErrorCode::kConfig, "shuffle_m must be >= 0");
  if (!(cfg.sc_temperature > 0.0)) throw Error(ErrorCode::kConfig, "sc_temperature must be > 0");
  if (cfg.deadline_ms <= 0) throw Error(ErrorCode::kConfig, "deadline_ms must be > 0");
  if (cfg.max_reply_chars < protocol::kMinReplyCharLimit) {
    throw Error(ErrorCode::kConfig, "max_reply_chars must be >= 256");
  }
}

std::optional<Answer> majority_with_priority(const std::vector<std::optional<Answer>>& answers,
                                             const std::vector<std::size_t>& priority_rank) {
  if (answers.size() != priority_rank.size()) {
    throw Error(ErrorCode::kPrecondition, "one priority rank per answer required");
  }
  std::map<std::string, int> counts;
  int top = 0;
  for (const auto& a : answers) {
    if (a) top = std::max(top, ++counts[a->value()]);
  }
  if (top == 0) return std::nullopt;

  std::optional<Answer> best;
  std::size_t best_rank = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (answers[i] && counts[answers[i]->value()] == top && priority_rank[i] < best_rank) {
      best = answers[i];
      best_rank = priority_rank[i];
    }
  }
  return best;
}

std::optional<Answer> aggregate_samples(const std::vector<std::optional<Answer>>& samples) {
  std::vector<Answer> parsed;
  for (const auto& s : samples) {
    if (s) parsed.push_back(*s);
  }
  for (const auto& candidate : parsed) {
    const auto count = std::count(parsed.begin(), parsed.end(), candidate);
    if (2 * static_cast<std::size_t>(count) > parsed.size()) return candidate;
  }
  if (!samples.empty() && samples.front()) return samples.front();
  if (!parsed.empty()) return parsed.front();
  return std::nullopt;
}

Orchestrator::Orchestrator(PipelineConfig cfg, const agents::Invoker& invoker)
    : cfg_(std::move(cfg)), invoker_(invoker) {
  validate_pipeline(cfg_);
}

const AgentProfile& Orchestrator::profile(const std::string& name) const {
  for (const auto& p : cfg_.roster) {
    if (p.id.name == name) return p;
  }
  throw Error(ErrorCode::kConfig, "unknown agent '" + name + "'");
}

DecodingParams Orchestrator::deterministic_params() const {
  DecodingParams params;
  params.temperature = 0.0;
  params.max_reply_chars = cfg_.max_reply_chars;
  return params;
}

const AgentProfile& Orchestrator::fallback_profile() const {
  if (!cfg_.fallback_agent.empty()) return profile(cfg_.fallback_agent);
  const AgentProfile* best = &cfg_.roster.front();
  for (const auto& p : cfg_.roster) {
    if (p.per_call_cost < best->per_call_cost ||
        (p.per_call_cost == best->per_call_cost && p.id.index < best->id.index)) {
      best = &p;
    }
  }
  return *best;
}

AgentAnalysis Orchestrator::to_analysis(const Question& q, const AgentProfile& agent, std::string subquestion,
                                        const CompletionOutcome& outcome, ParseMode mode, bool truncate) const {
  AgentAnalysis a;
  a.agent = agent.id;
  a.subquestion = std::move(subquestion);
  a.latency_ms = outcome.latency_ms;
  a.cost_units = outcome.cost_units;
  if (outcome.provider_meta) a.token_usage = outcome.provider_meta->usage;
  a.status = agents::to_analysis_status(outcome.status);
  if (outcome.status != CompletionStatus::kOk) return a;

  a.analysis_text = truncate ? protocol::truncate_reply(*outcome.text, cfg_.max_reply_chars) : *outcome.text;
  a.provisional = protocol::parse_answer(q, a.analysis_text, mode);
  if (!a.provisional) a.status = AnalysisStatus::kMalformed;
  return a;
}

Verdict Orchestrator::run_single(const std::string& agent, const Question& q) const {
  const AgentProfile& p = profile(agent);
  const auto prompt = protocol::build_direct_prompt(q);
  const auto outcome = invoker_.invoke(p, q, prompt, deterministic_params(), cfg_.deadline_ms);

  Verdict v;
  v.method = MethodKind::single(agent);
  v.analyses.push_back(to_analysis(q, p, "", outcome, ParseMode::kMerger, false));
  v.final_answer = v.analyses.back().provisional;
  v.calls_made = 1;
  v.total_latency_ms = outcome.latency_ms;
  v.total_cost_units = outcome.cost_units;
  if (!v.final_answer) v.failure = std::string(status_name(v.analyses.back().status));
  return v;
}

Verdict Orchestrator::run_vote(const Question& q) const {
  if (cfg_.roster.size() < 2) throw Error(ErrorCode::kPrecondition, "VOTE needs at least two agents");
  const auto prompt = protocol::build_direct_prompt(q);
  std::vector<agents::AgentRequest> requests;
  for (const auto& p : cfg_.roster) requests.push_back({&p, prompt, deterministic_params()});
  const auto outcomes = invoker_.fan_out(q, requests, cfg_.deadline_ms);

  Verdict v;
  v.method = MethodKind::vote();
  std::vector<std::optional<Answer>> answers;
  std::vector<std::size_t> ranks;
  for (std::size_t i = 0; i < cfg_.roster.size(); ++i) {
    const auto& p = cfg_.roster[i];
    v.analyses.push_back(to_analysis(q, p, "", outcomes[i], ParseMode::kMerger, false));
    answers.push_back(v.analyses.back().provisional);
    v.total_cost_units += outcomes[i].cost_units;

    const auto& prio = cfg_.vote_tie_priority;
    auto it = std::find(prio.begin(), prio.end(), p.id.name);
    ranks.push_back(it != prio.end() ? static_cast<std::size_t>(it - prio.begin()) : prio.size() + p.id.index);
  }
  v.final_answer = majority_with_priority(answers, ranks);
  v.calls_made = static_cast<int>(requests.size());
  v.total_latency_ms = max_latency(outcomes);
  if (!v.final_answer) v.failure = std::string(error_code_name(ErrorCode::kAllAgentsFailed));
  return v;
}

MergeOutcome Orchestrator::merge_with_consistency(const Question& q, const std::vector<AgentAnalysis>& analyses,
                                                  const AgentProfile& merger, int sc_k, int shuffle_m) const {
  if (sc_k < 1 || shuffle_m < 0) throw Error(ErrorCode::kPrecondition, "need sc_K >= 1 and shuffle_m >= 0");
  MergeOutcome out;
  out.trace.merger = merger.id.name;

  // Option orders: identity first, then permutations from the item's stream.
  // Numeric items have no options to reorder, so only the identity order runs.
  const std::size_t n_options = q.options.size();
  std::vector<protocol::Permutation> orders{protocol::identity_permutation(n_options)};
  if (q.kind != TaskKind::kOpenNumeric) {
    bench::DeterministicRng rng(bench::derive_seed(cfg_.seed, "shuffle/" + q.item_id));
    for (int i = 0; i < shuffle_m; ++i) {
      auto perm = protocol::identity_permutation(n_options);
      bench::shuffle(rng, perm);
      orders.push_back(std::move(perm));
    }
  }
  out.trace.permutations = orders;

  std::vector<agents::AgentRequest> requests;
  for (std::size_t o = 0; o < orders.size(); ++o) {
    auto prompt = o == 0 ? protocol::build_merge_prompt(q, analyses)
                         : protocol::build_merge_prompt(q, analyses, orders[o]);
    for (int d = 0; d < sc_k; ++d) {
      DecodingParams params = deterministic_params();
      params.sample_tag = static_cast<std::uint64_t>(d);
      params.temperature = d == 0 ? 0.0 : cfg_.sc_temperature;
      requests.push_back({&merger, prompt, params});
    }
  }
  out.trace.merge_prompt_digest = sha256_hex(requests.front().prompt.text);

  const auto outcomes = invoker_.fan_out(q, requests, cfg_.deadline_ms);
  std::vector<std::optional<Answer>> samples;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    out.cost_units += o.cost_units;
    if (o.status != CompletionStatus::kOk) {
      samples.emplace_back();
      continue;
    }
    // Merger replies are parsed whole, without truncation.
    auto parsed = protocol::parse_answer(q, *o.text, ParseMode::kMerger);
    const auto& perm = orders[i / static_cast<std::size_t>(sc_k)];
    if (parsed && parsed->is_letter()) parsed = Answer::letter(protocol::unpermute_letter(parsed->as_letter(), perm));
    samples.push_back(parsed);
  }
  if (outcomes.front().status == CompletionStatus::kOk) {
    out.trace.merge_text_digest = sha256_hex(*outcomes.front().text);
  }
  out.calls = static_cast<int>(outcomes.size());
  out.latency_ms = max_latency(outcomes);
  out.trace.samples_taken = out.calls;
  out.trace.sample_answers = samples;
  out.answer = aggregate_samples(samples);
  return out;
}

Verdict Orchestrator::run_pipeline(const Question& q, const Roles& roles, std::size_t n_facets, int sc_k,
                                   int shuffle_m, MethodKind method) const {
  Verdict v;
  v.method = std::move(method);
  MergeTrace trace;
  trace.dispatcher = roles.dispatcher->id.name;

  // Stage 1: decomposition.
  const auto dispatch_prompt = protocol::build_decomposition_prompt(q, n_facets);
  const auto dispatched =
      invoker_.invoke(*roles.dispatcher, q, dispatch_prompt, deterministic_params(), cfg_.deadline_ms);
  v.calls_made += 1;
  v.total_latency_ms += dispatched.latency_ms;
  v.total_cost_units += dispatched.cost_units;
  const auto facets =
      dispatched.status == CompletionStatus::kOk
          ? protocol::parse_subquestions(q, protocol::truncate_reply(*dispatched.text, cfg_.max_reply_chars), n_facets)
          : protocol::fallback_subquestions(q, n_facets);
  trace.subquestion_origin = std::string(protocol::origin_name(facets.origin));

  // Stage 2: one facet per analyst, in parallel.
  std::vector<agents::AgentRequest> requests;
  for (std::size_t i = 0; i < roles.analysts.size(); ++i) {
    requests.push_back({roles.analysts[i],
                        protocol::build_analysis_prompt(q, facets.items[i % facets.items.size()]),
                        deterministic_params()});
  }
  const auto outcomes = invoker_.fan_out(q, requests, cfg_.deadline_ms);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    v.analyses.push_back(to_analysis(q, *roles.analysts[i], facets.items[i % facets.items.size()], outcomes[i],
                                     ParseMode::kAnalyst, true));
    v.total_cost_units += outcomes[i].cost_units;
  }
  v.calls_made += static_cast<int>(outcomes.size());
  v.total_latency_ms += max_latency(outcomes);

  const bool any_ok = std::any_of(v.analyses.begin(), v.analyses.end(),
                                  [](const AgentAnalysis& a) { return a.status == AnalysisStatus::kOk; });
  if (!any_ok) {
    trace.merger = roles.merger->id.name;
    v.merge_trace = std::move(trace);
    v.failure = std::string(error_code_name(ErrorCode::kNoEvidence));
    return v;
  }

  // Stage 3: merge, then one deterministic retry on the fallback agent if needed.
  auto merged = merge_with_consistency(q, v.analyses, *roles.merger, sc_k, shuffle_m);
  v.calls_made += merged.calls;
  v.total_latency_ms += merged.latency_ms;
  v.total_cost_units += merged.cost_units;
  v.final_answer = merged.answer;
  merged.trace.dispatcher = trace.dispatcher;
  merged.trace.subquestion_origin = trace.subquestion_origin;

  const AgentProfile& fallback = fallback_profile();
  if (!v.final_answer && fallback.id.name != roles.merger->id.name) {
    auto retry = merge_with_consistency(q, v.analyses, fallback, 1, 0);
    v.calls_made += retry.calls;
    v.total_latency_ms += retry.latency_ms;
    v.total_cost_units += retry.cost_units;
    v.final_answer = retry.answer;
    merged.trace.used_fallback_merger = true;
  }
  if (!v.final_answer) v.failure = "MERGE_FAILED";
  v.merge_trace = std::move(merged.trace);
  return v;
}

Verdict Orchestrator::run_orch(const Question& q, const std::optional<router::RoleAssignment>& router_view) const {
  Roles roles{};
  if (router_view) {
    roles.dispatcher = &profile(router_view->dispatcher.name);
    roles.merger = &profile(router_view->merger.name);
    for (const auto& id : router_view->analysts) roles.analysts.push_back(&profile(id.name));
    if (roles.analysts.empty()) throw Error(ErrorCode::kPrecondition, "router view has no analysts");
  } else {
    if (cfg_.roster.size() < 2) throw Error(ErrorCode::kPrecondition, "ORCH needs at least two agents");
    if (cfg_.dispatcher_select.mode == SelectMode::kEma || cfg_.merger_select.mode == SelectMode::kEma) {
      throw Error(ErrorCode::kConfig, "EMA role selection requires a router view");
    }
    auto fixed = [&](const RoleSelect& sel) {
      return sel.agent.empty() ? &cfg_.roster.front() : &profile(sel.agent);
    };
    roles.dispatcher = fixed(cfg_.dispatcher_select);
    roles.merger = fixed(cfg_.merger_select);
    for (const auto& p : cfg_.roster) roles.analysts.push_back(&p);
  }
  const std::size_t n_facets = cfg_.n_facets ? cfg_.n_facets : std::min<std::size_t>(roles.analysts.size(), 3);
  return run_pipeline(q, roles, n_facets, cfg_.sc_k, cfg_.shuffle_m, MethodKind::orch());
}

Verdict Orchestrator::run_orch_subset(const Question& q, const std::vector<std::string>& subset) const {
  if (subset.size() < 2 || subset.size() > cfg_.roster.size()) {
    throw Error(ErrorCode::kPrecondition, "subset size must be in [2, roster size]");
  }
  if (std::set<std::string>(subset.begin(), subset.end()).size() != subset.size()) {
    throw Error(ErrorCode::kPrecondition, "subset names must be distinct");
  }
  if (subset.size() > 3) throw Error(ErrorCode::kPrecondition, "at most 3 analysts have facets");
  Roles roles{};
  for (const auto& p : cfg_.roster) {
    if (std::find(subset.begin(), subset.end(), p.id.name) != subset.end()) roles.analysts.push_back(&p);
  }
  if (roles.analysts.size() != subset.size()) throw Error(ErrorCode::kConfig, "subset names unknown agent");

  auto within = [&](const RoleSelect& sel) {
    for (const auto* p : roles.analysts) {
      if (p->id.name == sel.agent) return p;
    }
    return roles.analysts.front();
  };
  roles.dispatcher = within(cfg_.dispatcher_select);
  roles.merger = within(cfg_.merger_select);
  std::vector<std::string> ordered;
  for (const auto* p : roles.analysts) ordered.push_back(p->id.name);
  return run_pipeline(q, roles, roles.analysts.size(), cfg_.sc_k, cfg_.shuffle_m,
                      MethodKind::orch_subset(std::move(ordered)));
}

Verdict Orchestrator::run(const MethodKind& method, const Question& q,
                          const std::optional<router::RoleAssignment>& router_view) const {
  switch (method.type) {
    case MethodType::kSingle: return run_single(method.agent, q);
    case MethodType::kVote: return run_vote(q);
    case MethodType::kOrch: return run_orch(q);
    case MethodType::kOrchSubset: {
      auto v = run_orch_subset(q, method.subset);
      v.method = method;
      return v;
    }
    case MethodType::kOrchEma:
    case MethodType::kOrchEmaSc: {
      if (!router_view) throw Error(ErrorCode::kConfig, method_label(method) + " requires a router view");
      Roles roles{&profile(router_view->dispatcher.name), &profile(router_view->merger.name), {}};
      for (const auto& id : router_view->analysts) roles.analysts.push_back(&profile(id.name));
      const bool sc = method.type == MethodType::kOrchEmaSc;
      const std::size_t n_facets =
          cfg_.n_facets ? cfg_.n_facets : std::min<std::size_t>(roles.analysts.size(), 3);
      return run_pipeline(q, roles, n_facets, sc ? method.sc_k : cfg_.sc_k, sc ? method.shuffle_m : cfg_.shuffle_m,
                          method);
    }
  }
  throw Error(ErrorCode::kConfig, "unsupported method");
}

}  // namespace orchkit::orchestrator
