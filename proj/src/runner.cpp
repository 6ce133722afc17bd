#include "orchkit/runner.hpp"

#include <set>

#include "orchkit/bench.hpp"
#include "orchkit/orchestrator.hpp"
#include "orchkit/rng.hpp"

namespace orchkit::runner {

stats::RosterCosts roster_costs(const cli::RunConfig& cfg) {
  stats::RosterCosts costs;
  for (const auto& p : cfg.pipeline.roster) costs.emplace_back(p.id.name, p.per_call_cost);
  return costs;
}

bool is_ema(const MethodKind& method) {
  return method.type == MethodType::kOrchEma || method.type == MethodType::kOrchEmaSc;
}

RunOutcome run_questions(const cli::RunConfig& cfg, const std::vector<Question>& questions,
                         const agents::Invoker& invoker, const ItemSink& sink, const ledger::Ledger* resume) {
  const orchestrator::Orchestrator orch(cfg.pipeline, invoker);
  const bool ema = is_ema(cfg.method);
  const std::size_t k = cfg.top_k == 0 ? cfg.pipeline.roster.size() : cfg.top_k;
  router::Router rt(cli::roster_ids(cfg), cfg.weights, cfg.attribution);

  RunOutcome out;
  std::vector<RunRecord> records;
  std::set<std::string> done;

  if (resume) {
    for (std::size_t i = 0; i < resume->records.size(); ++i) {
      const auto& r = resume->records[i];
      if (!(r.method == cfg.method)) {
        throw Error(ErrorCode::kValidation, "resumed ledger was produced by " + method_label(r.method));
      }
      ItemResult item{r, resume->kinds[i], resume->router_snapshots[i], std::nullopt};
      if (ema) rt.feedback(r);
      done.insert(r.item_id);
      records.push_back(r);
      if (sink) sink(item);
      out.items.push_back(std::move(item));
    }
  }

  for (std::size_t pos = 0; pos < questions.size(); ++pos) {
    const Question& q = questions[pos];
    if (done.count(q.item_id)) continue;
    ItemResult item;
    item.kind = q.kind;
    std::optional<router::RoleAssignment> view;
    if (ema) view = rt.route(k);
    Verdict v = orch.run(cfg.method, q, view);
    RunRecord& r = item.record;
    r.item_id = q.item_id;
    r.subject = q.subject;
    r.method = cfg.method;
    r.correct = bench::score_item(q, v);
    r.gold = q.gold;
    r.wall_position = pos;
    r.verdict = std::move(v);
    if (ema) {
      rt.feedback(r);
      item.router_snapshot = rt.snapshot();
      item.routed = view;
    }
    records.push_back(r);
    if (sink) sink(item);
    out.items.push_back(std::move(item));
  }

  out.summary = ledger::summarize(records, roster_costs(cfg));
  out.summary.method = method_label(cfg.method);
  out.summary.benchmark = std::string(bench::benchmark_name(cfg.benchmark));
  out.final_states = rt.states();
  return out;
}

bool transport_exhausted(const std::vector<RunRecord>& records) {
  if (records.empty()) return false;
  bool any_call = false;
  for (const auto& r : records) {
    if (r.verdict.final_answer) return false;
    for (const auto& a : r.verdict.analyses) {
      if (a.status != AnalysisStatus::kTimeout && a.status != AnalysisStatus::kTransportError) return false;
      any_call = true;
    }
  }
  return any_call;
}

std::vector<Question> simulation_items(std::size_t n, std::uint64_t seed) {
  bench::DeterministicRng rng(bench::derive_seed(seed, "simulate/gold"));
  std::vector<Question> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "sim-%06zu", i + 1);
    const char gold = static_cast<char>('A' + rng.next_u64() % 4);
    items.push_back(make_question(id, TaskKind::kMcq4, "simulation", "Simulated item " + std::string(id) + ".",
                                  {"first", "second", "third", "fourth"}, Answer::letter(gold)));
  }
  return items;
}

}  // namespace orchkit::runner
