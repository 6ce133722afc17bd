// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "../unit/oracles.hpp"
#include "orchkit/bench.hpp"
#include "orchkit/commands.hpp"
#include "orchkit/config.hpp"
#include "orchkit/orchestrator.hpp"
#include "orchkit/rng.hpp"
#include "orchkit/router.hpp"
#include "orchkit/runner.hpp"
#include "orchkit/stats.hpp"

using namespace orchkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

fs::path data(const std::string& name) { return fs::path(ORCHKIT_TEST_DATA) / name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("orchkit_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }
bool near_rel(double a, double b, double rel) { return std::abs(a / b - 1.0) <= rel; }

// Roster fixture with every failure switched off.
cli::RunConfig reliable_config() {
  auto j = json::parse(slurp(data("synthetic_roster.json")));
  for (auto& p : j["roster"]) p["synthetic"]["failure_rate"] = 0.0;
  return cli::parse_run_config(j, data(""));
}

void mcnemar_reported(Check& c) {
  using stats::mcnemar;
  auto r = mcnemar(69, 16, false);
  c.expect(near(r.chi2, 33.047, 1e-3), "69/16 chi2 " + fmt("%.5f", r.chi2));
  c.expect(near_rel(r.p, 8.99e-9, 0.02), "69/16 p " + fmt("%.4g", r.p));
  r = mcnemar(151, 1, false);
  c.expect(near(r.chi2, 148.03, 0.01), "151/1 chi2 " + fmt("%.4f", r.chi2));
  r = mcnemar(66, 24, false);
  c.expect(near(r.chi2, 19.60, 0.01), "66/24 chi2 " + fmt("%.4f", r.chi2));
  c.expect(near_rel(r.p, 9.55e-6, 0.02), "66/24 p " + fmt("%.4g", r.p));
  r = mcnemar(44, 18, true);
  c.expect(near(r.chi2, 10.08, 0.01), "44/18 corrected chi2 " + fmt("%.4f", r.chi2));
  c.expect(near(r.p, 0.0015, 1e-4), "44/18 corrected p " + fmt("%.4g", r.p));
  r = mcnemar(75, 18, false);
  c.expect(near(r.chi2, 34.94, 0.01), "75/18 chi2 " + fmt("%.4f", r.chi2));
  r = mcnemar(15, 13, false);
  c.expect(near(r.chi2, 0.14, 0.01), "15/13 chi2 " + fmt("%.4f", r.chi2));
  c.expect(near(r.p, 0.71, 0.01), "15/13 p " + fmt("%.4g", r.p));
}

void mcnemar_sweep(Check& c) {
  for (std::size_t b = 0; b <= 6; ++b) {
    for (std::size_t k = 0; k <= 6; ++k) {
      const auto u = stats::mcnemar(b, k, false);
      const auto v = stats::mcnemar(b, k, true);
      const std::string at = std::to_string(b) + "/" + std::to_string(k);
      c.expect(near(u.chi2, oracle::chi2_plain(b, k), 1e-12), at + " chi2");
      c.expect(near(v.chi2, oracle::chi2_corrected(b, k), 1e-12), at + " corrected chi2");
      c.expect(near(u.p, oracle::chi2_tail(u.chi2), 1e-9), at + " p");
      c.expect(near(v.p, oracle::chi2_tail(v.chi2), 1e-9), at + " corrected p");
    }
  }
}

void cost_forms(Check& c) {
  const stats::RosterCosts unit = {{"O", 1}, {"D", 1}, {"X", 1}};
  c.expect(stats::closed_form_cost(MethodKind::vote(), unit) == 3.0, "VOTE estimate");
  c.expect(stats::closed_form_cost(MethodKind::orch(), unit) == 9.0, "ORCH estimate");
  c.expect(stats::closed_form_cost(MethodKind::orch_subset({"O", "D"}), unit) == 5.0, "ORCH_K(O,D) estimate");
  c.expect(stats::closed_form_cost(MethodKind::orch_ema_sc(2, 1), unit) == 18.0, "ORCH_EMA_SC(2,1) estimate");

  const auto ds = bench::load_dataset(data("mmlu.jsonl"), bench::Benchmark::kMmlu);
  const auto questions = bench::resolve_manifest(bench::sample_mmlu(ds, 42), ds);
  const std::vector<std::pair<MethodKind, double>> expected = {{MethodKind::single("O"), 1.0},
                                                               {MethodKind::vote(), 3.0},
                                                               {MethodKind::orch(), 5.0},
                                                               {MethodKind::orch_subset({"O", "D"}), 4.0},
                                                               {MethodKind::orch_ema_sc(2, 1), 8.0}};
  const agents::Invoker invoker;
  for (const auto& [method, calls] : expected) {
    auto cfg = reliable_config();
    cfg.method = method;
    const auto out = runner::run_questions(cfg, questions, invoker);
    c.expect(out.summary.mean_calls == calls,
             method_label(method) + " mean calls " + fmt("%.4f", out.summary.mean_calls));
    const auto s = stats::latency_cost_summary([&] {
      std::vector<RunRecord> rs;
      for (const auto& it : out.items) rs.push_back(it.record);
      return rs;
    }(), runner::roster_costs(cfg));
    if (method.type != MethodType::kSingle) {
      c.expect(s.paper_estimate.has_value(), method_label(method) + " has no estimate column");
    }
  }
}

int cli_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  return cli::main_entry(args, out, err);
}

void determinism(Check& c) {
  const auto dir = workdir() / "determinism";
  fs::create_directories(dir);
  const auto config = dir / "run.json";
  {
    auto j = json::parse(slurp(data("synthetic_roster.json")));
    j["dataset"] = data("mmlu.jsonl").string();
    std::ofstream(config) << j.dump(2);
  }
  for (const char* m : {"m1.json", "m2.json"}) {
    c.expect(cli_run({"sample", "--dataset", data("mmlu.jsonl").string(), "--out", (dir / m).string()}) == 0,
             std::string("sample ") + m);
  }
  c.expect(slurp(dir / "m1.json") == slurp(dir / "m2.json"), "manifests differ");

  // reports carry the ledger file name, so each run gets its own directory
  for (const char* method : {"ORCH", "ORCH_EMA", "VOTE"}) {
    for (const char* run : {"a", "b"}) {
      const auto sub = dir / run;
      fs::create_directories(sub);
      const std::string stem = method;
      c.expect(cli_run({"run", "--config", config.string(), "--manifest", (dir / "m1.json").string(), "--ledger",
                        (sub / (stem + ".jsonl")).string(), "--method", method}) == 0,
               "run " + stem + " " + run);
      c.expect(cli_run({"report", (sub / (stem + ".jsonl")).string(), "--json", (sub / (stem + ".json")).string(),
                        "--md", (sub / (stem + ".md")).string()}) == 0,
               "report " + stem + " " + run);
    }
    for (const char* ext : {".jsonl", ".json", ".md"}) {
      const std::string f = std::string(method) + ext;
      c.expect(slurp(dir / "a" / f) == slurp(dir / "b" / f), f + " differs between runs");
      c.expect(!slurp(dir / "a" / f).empty(), f + " is empty");
    }
  }
}

void sampling(Check& c) {
  const auto mmlu = bench::load_dataset(data("mmlu.jsonl"), bench::Benchmark::kMmlu);
  const auto m = bench::sample_mmlu(mmlu, 42);
  std::map<std::string, int> per;
  for (const auto& it : m.items) per[it.subject_or_bucket]++;
  c.expect(m.items.size() == 300, "mmlu size");
  c.expect(per.size() == 10, "mmlu subjects");
  for (const auto& [s, n] : per) c.expect(n == 30, "mmlu " + s);

  const auto gsm = bench::load_dataset(data("gsm8k.jsonl"), bench::Benchmark::kGsm8k);
  for (std::size_t bsize : {30u, 5u}) {
    const auto g = bench::sample_gsm8k(gsm, 42, bsize);
    c.expect(g.items.size() == 10 * bsize, "gsm8k size");
    std::size_t prev_max = 0;
    for (std::size_t b = 0; b < 10; ++b) {
      std::size_t lo = SIZE_MAX, hi = 0;
      for (std::size_t i = b * bsize; i < (b + 1) * bsize; ++i) {
        c.expect(g.items[i].subject_or_bucket == "B" + std::to_string(b + 1), "bucket label");
        const auto n = bench::whitespace_token_count(gsm.records[g.items[i].source_index].stem);
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
      c.expect(lo >= prev_max, "bucket boundary B" + std::to_string(b + 1));
      prev_max = hi;
    }
  }

  const auto pro = bench::load_dataset(data("mmlu_pro.jsonl"), bench::Benchmark::kMmluPro);
  const auto p60 = bench::sample_mmlu_pro(pro, 42);
  c.expect(p60.items.size() == 60, "mmlu_pro default size");
  c.expect(p60.protocol_params["categories"] == json{"law", "math", "physics"}, "mmlu_pro categories");
  const auto p300 = bench::sample_mmlu_pro(pro, 42, bench::kMmluPro300);
  c.expect(p300.items.size() == 300, "mmlu_pro_300 size");
  for (const auto* mm : {&p60, &p300}) {
    for (const auto& it : mm->items) c.expect(pro.records[it.source_index].options.size() == 10, "ten options");
  }
}

// Answers are planted in a response cache; a miss is an absent answer.
void vote_oracle(Check& c) {
  const auto dir = workdir() / "vote";
  fs::create_directories(dir);
  orchestrator::PipelineConfig pc;
  for (std::size_t i = 0; i < 3; ++i) {
    agents::AgentProfile p;
    p.id = {i, std::string(1, "ODX"[i])};
    p.model_label = "planted-" + p.id.name;
    p.transport = agents::TransportKind::kCacheOnly;
    p.per_call_cost = 1;
    pc.roster.push_back(p);
  }
  pc.vote_tie_priority = {"O", "D", "X"};

  agents::ResponseCache cache(dir / "cache.jsonl", agents::CacheMode::kReadWrite);
  const agents::Invoker invoker(&cache);
  const orchestrator::Orchestrator orch(pc, invoker);
  agents::DecodingParams params;
  params.temperature = 0.0;
  params.max_reply_chars = pc.max_reply_chars;

  const std::vector<std::optional<char>> values = {std::nullopt, 'A', 'B', 'C', 'D'};
  int cases = 0;
  for (const auto& o : values) {
    for (const auto& d : values) {
      for (const auto& x : values) {
        const std::string id = "vote-" + std::to_string(cases);
        const auto q = make_question(id, TaskKind::kMcq4, "planted", "Planted question " + id + "?",
                                     {"w", "x", "y", "z"}, Answer::letter('A'));
        const auto prompt = protocol::build_direct_prompt(q);
        const std::vector<std::optional<char>> triple = {o, d, x};
        for (std::size_t i = 0; i < 3; ++i) {
          if (!triple[i]) continue;
          cache.store({agents::cache_key(pc.roster[i], prompt, params), pc.roster[i].model_label, "direct",
                       std::string("Final answer: ") + *triple[i], std::nullopt, ""});
        }
        const auto v = orch.run_vote(q);
        const auto expect = oracle::plurality_first(triple);
        const std::optional<char> got =
            v.final_answer ? std::optional<char>(v.final_answer->as_letter()) : std::nullopt;
        c.expect(got == expect, id + " mismatch");
        c.expect(v.calls_made == 3, id + " calls");
        ++cases;
      }
    }
  }
  c.expect(cases == 125, "case count");
}

void ema_properties(Check& c) {
  using namespace router;
  const AgentId a{0, "O"};
  bench::DeterministicRng rng(2024);

  RouterWeights w1;
  w1.alpha = 1.0;
  for (int t = 0; t < 1000; ++t) {
    const RoutingObservation obs{a, rng.next_unit() < 0.5, 5000 * rng.next_unit(), 3 * rng.next_unit(),
                                 rng.next_unit() < 0.5};
    auto s = fresh_state(a);
    s.ema_quality = rng.next_unit();
    s.ema_latency = 100;
    s.initialized_latency = true;
    const auto n = ema_update(s, obs, w1);
    c.expect(n.ema_quality == obs.quality && n.ema_latency == obs.latency_ms && n.ema_cost == obs.cost_units &&
                 n.ema_stability == obs.stable,
             "alpha=1 identity");
  }

  for (int stream = 0; stream < 10000; ++stream) {
    RouterWeights w;
    w.alpha = 0.01 + 0.99 * rng.next_unit();
    auto s = fresh_state(a);
    double qlo = kQualityPrior, qhi = kQualityPrior, llo = 0, lhi = 0;
    const int len = 1 + static_cast<int>((rng.next_u64() % 30));
    for (int i = 0; i < len; ++i) {
      const RoutingObservation obs{a, rng.next_unit() < 0.5, 4000 * rng.next_unit(), 2 * rng.next_unit(), 1};
      qlo = std::min<double>(qlo, obs.quality);
      qhi = std::max<double>(qhi, obs.quality);
      llo = i == 0 ? obs.latency_ms : std::min(llo, obs.latency_ms);
      lhi = i == 0 ? obs.latency_ms : std::max(lhi, obs.latency_ms);
      s = ema_update(s, obs, w);
      if (s.ema_quality < qlo - 1e-12 || s.ema_quality > qhi + 1e-12 || s.ema_latency < llo - 1e-9 ||
          s.ema_latency > lhi + 1e-9) {
        c.expect(false, "hull violated in stream " + std::to_string(stream));
        i = len;
      }
    }
  }

  RouterWeights w;
  w.alpha = 0.2;
  auto s = fresh_state(a);
  for (int i = 0; i < 100; ++i) s = ema_update(s, {a, 1, 750, 2, 1}, w);
  c.expect(std::abs(s.ema_quality - 1.0) < 1e-6, "quality convergence " + fmt("%.3g", s.ema_quality));
  c.expect(std::abs(s.ema_latency - 750) < 1e-6, "latency convergence");

  const std::vector<AgentId> ids = {{0, "O"}, {1, "D"}, {2, "X"}};
  Router r1(ids, w), r2(ids, w);
  std::vector<RoutingObservation> stream;
  for (int i = 0; i < 500; ++i) {
    stream.push_back({ids[rng.next_u64() % 3], rng.next_unit() < 0.7, 3000 * rng.next_unit(), 1,
                      rng.next_unit() < 0.95});
  }
  for (const auto& obs : stream) r1.observe(obs);
  for (const auto& obs : stream) r2.observe(obs);
  c.expect(r1.states() == r2.states(), "replay states differ");
  c.expect(r1.route(1).merger == r2.route(1).merger, "replay routing differs");
}

void router_convergence(Check& c) {
  const auto dir = workdir() / "simulate";
  fs::create_directories(dir);
  auto j = json::parse(slurp(data("synthetic_roster.json")));
  j["dataset"] = data("mmlu.jsonl").string();
  std::ofstream(dir / "run.json") << j.dump(2);
  const auto t0 = std::chrono::steady_clock::now();
  const int code = cli_run({"simulate", "--config", (dir / "run.json").string(), "-n", "1000", "-k", "1", "--tail",
                            "200", "--out", (dir / "sim.json").string()});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(code == 0, "simulate exit " + std::to_string(code));
  if (code != 0) return;
  const auto report = json::parse(slurp(dir / "sim.json"));
  c.expect(report["best_agent"] == "O", "best agent");
  const double f = report["best_agent_tail_frequency"];
  c.expect(f >= 0.8, "tail frequency " + fmt("%.3f", f));
  c.expect(secs < 10.0, "took " + fmt("%.2f", secs) + " s");
}

void shuffle_soundness(Check& c) {
  agents::SyntheticAgentSpec merger;
  merger.default_accuracy = 1.0;
  for (char gold : {'A', 'B', 'C', 'D'}) {
    const auto q = make_question(std::string("perm-") + gold, TaskKind::kMcq4, "anatomy", "Which bone is longest?",
                                 {"radius", "femur", "tibia", "ulna"}, Answer::letter(gold));
    // analyses mostly point at the gold label
    std::vector<AgentAnalysis> analyses;
    for (std::size_t i = 0; i < 3; ++i) {
      AgentAnalysis a;
      a.agent = {i, std::string(1, "ODX"[i])};
      a.status = AnalysisStatus::kOk;
      const char pick = i == 2 ? static_cast<char>('A' + (gold - 'A' + 1) % 4) : gold;
      a.provisional = Answer::letter(pick);
      a.analysis_text = "Reasoning.\nProvisional answer: " + std::string(1, pick);
      analyses.push_back(a);
    }
    const auto base = agents::synthetic_complete(merger, q, protocol::build_merge_prompt(q, analyses), {});
    const auto decided = protocol::parse_answer(q, *base.text, protocol::ParseMode::kMerger);
    c.expect(decided && decided->as_letter() == gold, "identity order decision");

    protocol::Permutation perm = {0, 1, 2, 3};
    int n = 0;
    do {
      const auto reply = agents::synthetic_complete(merger, q, protocol::build_merge_prompt(q, analyses, perm), {});
      const auto parsed = reply.text ? protocol::parse_answer(q, *reply.text, protocol::ParseMode::kMerger)
                                     : std::nullopt;
      const bool ok = parsed && decided && protocol::unpermute_letter(parsed->as_letter(), perm) == decided->as_letter();
      c.expect(ok, std::string("gold ") + gold + " permutation " + std::to_string(n));
      ++n;
    } while (std::next_permutation(perm.begin(), perm.end()));
    c.expect(n == 24, "permutation count");
  }
}

void accuracy_arithmetic(Check& c) {
  auto ledger_of = [](std::size_t correct) {
    std::vector<RunRecord> rs;
    for (std::size_t i = 0; i < 300; ++i) {
      RunRecord r;
      r.item_id = "q" + std::to_string(i);
      r.subject = "anatomy";
      r.correct = i < correct;
      rs.push_back(r);
    }
    return rs;
  };
  const auto orch = stats::accuracy(ledger_of(244), stats::GroupBy::kNone).front();
  const auto other = stats::accuracy(ledger_of(230), stats::GroupBy::kNone).front();
  c.expect(fmt("%.3f", orch.accuracy) == "0.813", "244/300 -> " + fmt("%.3f", orch.accuracy));
  c.expect(fmt("%.3f", other.accuracy) == "0.767", "230/300 -> " + fmt("%.3f", other.accuracy));
  c.expect(orch.n_correct - other.n_correct == 14, "difference");
  c.expect(std::lround((orch.accuracy - other.accuracy) * 300) == 14, "difference via accuracy");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria = {
      {"mcnemar reported values", mcnemar_reported},
      {"mcnemar oracle sweep", mcnemar_sweep},
      {"cost closed forms and call counts", cost_forms},
      {"run determinism", determinism},
      {"sampling arithmetic", sampling},
      {"vote oracle", vote_oracle},
      {"ema properties", ema_properties},
      {"router convergence", router_convergence},
      {"multi-shuffle soundness", shuffle_soundness},
      {"accuracy arithmetic", accuracy_arithmetic},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("threw: ") + e.what());
    }
    std::printf("%s %2zu %s", c.failures.empty() ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str());
    if (!c.failures.empty()) {
      ++failed;
      std::printf(" (%s%s)", c.failures.front().c_str(),
                  c.failures.size() > 1 ? (", +" + std::to_string(c.failures.size() - 1) + " more").c_str() : "");
    }
    std::printf("\n");
  }
  fs::remove_all(workdir());
  return failed ? 1 : 0;
}
