#include "orchkit/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>

#include <CLI11.hpp>

#include "orchkit/bench.hpp"
#include "orchkit/config.hpp"
#include "orchkit/runner.hpp"
#include "orchkit/stats.hpp"

namespace orchkit::cli {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  return code == ErrorCode::kManifestMismatch ? kExitPairing : kExitInput;
}

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  f << contents;
  if (!f) throw Error(ErrorCode::kIo, "write failed on " + path.string());
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace

int cmd_sample(const SampleArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (args.dataset.empty() || args.out.empty()) {
      err << "sample: --dataset and --out are required\n";
      return static_cast<int>(kExitUsage);
    }
    const auto benchmark = bench::parse_benchmark(args.benchmark);
    const auto dataset = bench::load_dataset(args.dataset, benchmark);
    bench::Manifest m;
    switch (benchmark) {
      case bench::Benchmark::kMmlu:
        m = bench::sample_mmlu(dataset, args.seed, bench::default_mmlu_subjects(), args.per_subject);
        break;
      case bench::Benchmark::kMmluPro:
        if (args.profile == "default") {
          m = bench::sample_mmlu_pro(dataset, args.seed, bench::kMmluProDefault);
        } else if (args.profile == "mmlu_pro_300") {
          m = bench::sample_mmlu_pro(dataset, args.seed, bench::kMmluPro300);
        } else {
          throw Error(ErrorCode::kConfig, "unknown mmlu_pro profile '" + args.profile + "'");
        }
        break;
      case bench::Benchmark::kGsm8k: m = bench::sample_gsm8k(dataset, args.seed, args.bucket_size); break;
    }
    bench::write_manifest(m, args.out);
    out << "items=" << m.items.size() << " digest=" << m.created_digest << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = load_run_config(args.config);
    if (args.manifest) cfg.manifest = *args.manifest;
    if (args.dataset) cfg.dataset = *args.dataset;
    if (args.ledger) cfg.ledger = *args.ledger;
    if (args.method) cfg.method = parse_method(*args.method);
    if (args.seed) cfg.seed = cfg.pipeline.seed = *args.seed;
    if (args.cache) cfg.cache_path = *args.cache;
    if (args.cache_mode) cfg.cache_mode = agents::parse_cache_mode(*args.cache_mode);
    if (args.top_k) cfg.top_k = *args.top_k;
    if (const char* env = std::getenv("ORCHKIT_CACHE"); env && *env) cfg.cache_path = env;
    if (cfg.top_k > cfg.pipeline.roster.size()) throw Error(ErrorCode::kConfig, "top_k exceeds roster size");
    if (cfg.dataset.empty() || cfg.manifest.empty() || cfg.ledger.empty()) {
      throw Error(ErrorCode::kConfig, "dataset, manifest and ledger paths are required");
    }
    if (cfg.cache_mode != agents::CacheMode::kOff && cfg.cache_path.empty()) {
      throw Error(ErrorCode::kConfig, "cache mode " + std::string(agents::cache_mode_name(cfg.cache_mode)) +
                                          " needs a cache path");
    }

    const auto dataset = bench::load_dataset(cfg.dataset, cfg.benchmark);
    const auto manifest = bench::read_manifest(cfg.manifest);
    if (manifest.benchmark != cfg.benchmark) {
      throw Error(ErrorCode::kValidation, "manifest is for " + std::string(bench::benchmark_name(manifest.benchmark)));
    }
    if (manifest.dataset_digest != dataset.digest) {
      throw Error(ErrorCode::kValidation, "manifest was sampled from a different dataset than " + cfg.dataset.string());
    }
    const auto questions = bench::resolve_manifest(manifest, dataset);

    std::optional<ledger::Ledger> resumed;
    if (args.resume && std::filesystem::exists(cfg.ledger)) resumed = ledger::read_ledger(cfg.ledger);

    agents::ResponseCache cache(cfg.cache_path, cfg.cache_mode);
    const agents::Invoker invoker(&cache);
    ledger::Writer writer(cfg.ledger);
    auto outcome = runner::run_questions(
        cfg, questions, invoker, [&](const runner::ItemResult& item) {
          writer.item(item.record, item.kind, item.router_snapshot);
        },
        resumed ? &*resumed : nullptr);

    auto& s = outcome.summary;
    s.config_digest = config_digest(cfg);
    s.manifest_digest = manifest.created_digest;
    s.dataset_digest = dataset.digest;
    writer.summary(s);

    out << "method=" << s.method << " items=" << s.n << " correct=" << s.n_correct
        << " accuracy=" << fmt("%.3f", s.accuracy) << " mean_calls=" << fmt("%.3f", s.mean_calls)
        << " total_cost=" << fmt("%.4f", s.total_cost_units) << '\n';

    std::vector<RunRecord> records;
    for (const auto& item : outcome.items) records.push_back(item.record);
    if (runner::transport_exhausted(records)) {
      err << "error: every agent call failed in transport; ledger written to " << cfg.ledger.string() << '\n';
      return static_cast<int>(kExitTransport);
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto a = ledger::read_ledger(args.a);
    const auto b = ledger::read_ledger(args.b);
    if (a.summary && b.summary && a.summary->manifest_digest != b.summary->manifest_digest) {
      throw Error(ErrorCode::kManifestMismatch, "ledgers were run on different manifests");
    }
    const auto counts = stats::contingency(a.records, b.records);
    const auto plain = stats::mcnemar(counts.b, counts.c, false);
    const auto corr = stats::mcnemar(counts.b, counts.c, true);
    out << "b=" << counts.b << " c=" << counts.c << " both=" << counts.n_both << " neither=" << counts.n_neither
        << '\n';
    out << "uncorrected chi2=" << fmt("%.4f", plain.chi2) << " p=" << stats::format_p(plain.p) << '\n';
    out << "corrected chi2=" << fmt("%.4f", corr.chi2) << " p=" << stats::format_p(corr.p) << '\n';
    out << "primary=" << (args.corrected ? "corrected" : "uncorrected") << '\n';
    return static_cast<int>(kExitOk);
  });
}

ReportTable build_report(const std::vector<NamedLedger>& ledgers, const std::string& baseline,
                         const std::string& group_by) {
  if (ledgers.empty()) throw Error(ErrorCode::kEmptyLedger, "no ledgers given");
  const auto gb = stats::parse_group_by(group_by);

  ReportTable t;
  t.group_by = group_by;
  std::size_t base = 0;
  if (!baseline.empty()) {
    base = ledgers.size();
    for (std::size_t i = 0; i < ledgers.size() && base == ledgers.size(); ++i) {
      if (ledgers[i].name == baseline) base = i;
    }
    for (std::size_t i = 0; i < ledgers.size() && base == ledgers.size(); ++i) {
      if (ledgers[i].ledger.summary && ledgers[i].ledger.summary->method == baseline) base = i;
    }
    if (base == ledgers.size()) throw Error(ErrorCode::kValidation, "unknown baseline '" + baseline + "'");
  }
  t.baseline = ledgers[base].name;

  std::vector<std::vector<ReportRow>> per_ledger;
  for (const auto& nl : ledgers) {
    const auto& records = nl.ledger.records;
    if (records.empty()) throw Error(ErrorCode::kEmptyLedger, nl.name + " has no item records");
    stats::RosterCosts costs;
    if (nl.ledger.summary) costs = nl.ledger.summary->roster_costs;
    std::vector<ReportRow> rows;
    for (const auto& acc : stats::accuracy(records, gb)) {
      std::vector<RunRecord> members;
      for (const auto& r : records) {
        if (gb == stats::GroupBy::kNone || r.subject == acc.group) members.push_back(r);
      }
      const auto lc = stats::latency_cost_summary(members, costs);
      ReportRow row;
      row.config = nl.name;
      row.method = method_label(records.front().method);
      row.group = acc.group;
      row.n = acc.n;
      row.n_correct = acc.n_correct;
      row.accuracy = acc.accuracy;
      row.mean_latency_ms = lc.mean_latency_ms;
      if (!costs.empty()) row.paper_estimate_cost = lc.paper_estimate;
      row.measured_cost = lc.mean_cost_units;
      rows.push_back(std::move(row));
    }
    per_ledger.push_back(std::move(rows));
  }

  std::map<std::string, double> base_acc;
  for (const auto& row : per_ledger[base]) base_acc[row.group] = row.accuracy;
  for (auto& rows : per_ledger) {
    for (auto& row : rows) {
      if (auto it = base_acc.find(row.group); it != base_acc.end()) row.delta_accuracy = row.accuracy - it->second;
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

json report_to_json(const ReportTable& t) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"config", r.config},
                    {"method", r.method},
                    {"group", r.group},
                    {"n", r.n},
                    {"n_correct", r.n_correct},
                    {"accuracy", r.accuracy},
                    {"mean_latency_ms", r.mean_latency_ms},
                    {"paper_estimate_cost", opt(r.paper_estimate_cost)},
                    {"measured_cost", r.measured_cost},
                    {"delta_accuracy", opt(r.delta_accuracy)}});
  }
  return {{"baseline", t.baseline}, {"group_by", t.group_by}, {"rows", rows}};
}

ReportTable report_from_json(const json& j) {
  auto opt = [](const json& v) { return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()); };
  ReportTable t;
  t.baseline = j.at("baseline").get<std::string>();
  t.group_by = j.at("group_by").get<std::string>();
  for (const auto& r : j.at("rows")) {
    ReportRow row;
    row.config = r.at("config").get<std::string>();
    row.method = r.at("method").get<std::string>();
    row.group = r.at("group").get<std::string>();
    row.n = r.at("n").get<std::size_t>();
    row.n_correct = r.at("n_correct").get<std::size_t>();
    row.accuracy = r.at("accuracy").get<double>();
    row.mean_latency_ms = r.at("mean_latency_ms").get<double>();
    row.paper_estimate_cost = opt(r.at("paper_estimate_cost"));
    row.measured_cost = r.at("measured_cost").get<double>();
    row.delta_accuracy = opt(r.at("delta_accuracy"));
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

std::vector<std::string> row_cells(const ReportRow& r) {
  return {r.config,
          r.method,
          r.group,
          std::to_string(r.n),
          std::to_string(r.n_correct),
          fmt("%.3f", r.accuracy),
          fmt("%.1f", r.mean_latency_ms),
          r.paper_estimate_cost ? fmt("%.3f", *r.paper_estimate_cost) : "",
          fmt("%.3f", r.measured_cost),
          r.delta_accuracy ? fmt("%+.3f", *r.delta_accuracy) : ""};
}

const std::vector<std::string> kHeader = {"config",     "method",          "group", "n", "n_correct", "accuracy",
                                          "mean_latency_ms", "paper_estimate_cost", "measured_cost",
                                          "delta_accuracy"};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string report_csv(const ReportTable& t) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_escape(cells[i]);
    out += '\n';
  };
  emit(kHeader);
  for (const auto& r : t.rows) emit(row_cells(r));
  return out;
}

std::string report_markdown(const ReportTable& t) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& cells) {
    out += "|";
    for (const auto& c : cells) out += " " + c + " |";
    out += '\n';
  };
  emit(kHeader);
  out += "|";
  for (std::size_t i = 0; i < kHeader.size(); ++i) out += i < 3 ? "---|" : "---:|";
  out += '\n';
  for (const auto& r : t.rows) emit(row_cells(r));
  out += "\nbaseline: " + t.baseline + "\n";
  return out;
}

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<NamedLedger> ledgers;
    for (const auto& p : args.ledgers) ledgers.push_back({p.stem().string(), ledger::read_ledger(p)});
    const auto table = build_report(ledgers, args.baseline, args.group_by);
    if (args.csv) write_file(*args.csv, report_csv(table));
    if (args.markdown) write_file(*args.markdown, report_markdown(table));
    if (args.json) write_file(*args.json, report_to_json(table).dump(2) + "\n");
    if (!args.csv && !args.markdown && !args.json) out << report_markdown(table);
    return static_cast<int>(kExitOk);
  });
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = load_run_config(args.config);
    for (const auto& p : cfg.pipeline.roster) {
      if (p.transport != agents::TransportKind::kSynthetic) {
        throw Error(ErrorCode::kConfig, "simulate needs a synthetic roster; " + p.id.name + " is " +
                                            std::string(agents::transport_name(p.transport)));
      }
    }
    if (args.n == 0) throw Error(ErrorCode::kEmptyLedger, "simulation with N=0 items");
    if (args.k == 0 || args.k > cfg.pipeline.roster.size()) throw Error(ErrorCode::kConfig, "k out of range");
    if (args.window == 0) throw Error(ErrorCode::kConfig, "window must be positive");
    if (args.seed) cfg.seed = cfg.pipeline.seed = *args.seed;
    cfg.method = MethodKind::orch_ema();
    cfg.top_k = args.k;

    const auto items = runner::simulation_items(args.n, cfg.seed);
    const agents::Invoker invoker;
    std::optional<ledger::Writer> writer;
    if (args.ledger) writer.emplace(*args.ledger);
    auto outcome = runner::run_questions(cfg, items, invoker, [&](const runner::ItemResult& item) {
      if (writer) writer->item(item.record, item.kind, item.router_snapshot);
    });
    if (writer) {
      outcome.summary.config_digest = config_digest(cfg);
      writer->summary(outcome.summary);
    }

    const auto& roster = cfg.pipeline.roster;
    std::size_t best = 0;
    for (std::size_t i = 1; i < roster.size(); ++i) {
      if (roster[i].synthetic.accuracy_for("simulation") > roster[best].synthetic.accuracy_for("simulation")) best = i;
    }
    auto selected = [&](std::size_t item, std::size_t agent) {
      for (const auto& a : outcome.items[item].routed->analysts) {
        if (a.index == agent) return true;
      }
      return false;
    };

    json windows = json::array();
    for (std::size_t start = 0; start < args.n; start += args.window) {
      const std::size_t end = std::min(args.n, start + args.window);
      json freq = json::object();
      for (std::size_t a = 0; a < roster.size(); ++a) {
        std::size_t hits = 0;
        for (std::size_t i = start; i < end; ++i) hits += selected(i, a) ? 1 : 0;
        freq[roster[a].id.name] = static_cast<double>(hits) / static_cast<double>(end - start);
      }
      windows.push_back({{"first_item", start + 1}, {"last_item", end}, {"selection_frequency", freq}});
    }
    const std::size_t tail = std::min(args.tail, args.n);
    std::size_t best_hits = 0;
    for (std::size_t i = args.n - tail; i < args.n; ++i) best_hits += selected(i, best) ? 1 : 0;

    json states = json::array();
    for (const auto& s : outcome.final_states) {
      states.push_back({{"agent", s.agent.name},
                        {"ema_quality", s.ema_quality},
                        {"ema_latency", s.ema_latency},
                        {"ema_cost", s.ema_cost},
                        {"ema_stability", s.ema_stability},
                        {"observations", s.observations},
                        {"score", router::score(s, cfg.weights)}});
    }
    const json report = {{"n", args.n},
                         {"k", args.k},
                         {"seed", cfg.seed},
                         {"window", args.window},
                         {"accuracy", outcome.summary.accuracy},
                         {"best_agent", roster[best].id.name},
                         {"tail_items", tail},
                         {"best_agent_tail_frequency", static_cast<double>(best_hits) / static_cast<double>(tail)},
                         {"windows", windows},
                         {"final_states", states}};
    if (args.out) {
      write_file(*args.out, report.dump(2) + "\n");
    } else {
      out << report.dump(2) << '\n';
    }
    return static_cast<int>(kExitOk);
  });
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"orchkit: multi-agent orchestration benchmark harness", "orchkit"};
  app.require_subcommand(1);

  SampleArgs sample;
  auto* sc = app.add_subcommand("sample", "Draw a seeded evaluation manifest from a dataset");
  sc->add_option("--benchmark", sample.benchmark, "mmlu | mmlu_pro | gsm8k")->capture_default_str();
  sc->add_option("--seed", sample.seed)->capture_default_str();
  sc->add_option("--dataset", sample.dataset)->required();
  sc->add_option("--out", sample.out)->required();
  sc->add_option("--profile", sample.profile, "mmlu_pro: default | mmlu_pro_300")->capture_default_str();
  sc->add_option("--per-subject", sample.per_subject)->capture_default_str();
  sc->add_option("--bucket-size", sample.bucket_size)->capture_default_str();

  RunArgs run;
  auto* rc = app.add_subcommand("run", "Evaluate a manifest with the configured method");
  rc->add_option("--config", run.config)->required();
  rc->add_option("--manifest", run.manifest);
  rc->add_option("--dataset", run.dataset);
  rc->add_option("--ledger", run.ledger);
  rc->add_option("--method", run.method, "SINGLE(name) | VOTE | ORCH | ORCH_K(a,b) | ORCH_EMA | ORCH_EMA_SC(K,m)");
  rc->add_option("--seed", run.seed);
  rc->add_option("--cache", run.cache);
  rc->add_option("--cache-mode", run.cache_mode, "read_write | read_only | off");
  rc->add_option("--top-k", run.top_k);
  rc->add_flag("--resume", run.resume, "Skip items already present in the ledger");

  CompareArgs cmp;
  auto* cc = app.add_subcommand("compare", "Paired McNemar test between two ledgers");
  cc->add_option("a", cmp.a)->required();
  cc->add_option("b", cmp.b)->required();
  cc->add_flag("--corrected", cmp.corrected, "Report the continuity-corrected statistic as primary");

  ReportArgs rep;
  auto* pc = app.add_subcommand("report", "Consolidated accuracy/latency/cost table");
  pc->add_option("ledgers", rep.ledgers)->required();
  pc->add_option("--baseline", rep.baseline);
  pc->add_option("--group-by", rep.group_by, "none | subject | bucket")->capture_default_str();
  pc->add_option("--csv", rep.csv);
  pc->add_option("--md", rep.markdown);
  pc->add_option("--json", rep.json);

  SimulateArgs sim;
  auto* mc = app.add_subcommand("simulate", "Offline EMA routing simulation over a synthetic roster");
  mc->add_option("--config", sim.config)->required();
  mc->add_option("-n,--items", sim.n)->capture_default_str();
  mc->add_option("-k,--top-k", sim.k)->capture_default_str();
  mc->add_option("--seed", sim.seed);
  mc->add_option("--window", sim.window)->capture_default_str();
  mc->add_option("--tail", sim.tail)->capture_default_str();
  mc->add_option("--ledger", sim.ledger);
  mc->add_option("--out", sim.out);

  std::vector<std::string> storage{"orchkit"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(kExitOk) : static_cast<int>(kExitUsage);
  }

  if (sc->parsed()) return cmd_sample(sample, out, err);
  if (rc->parsed()) return cmd_run(run, out, err);
  if (cc->parsed()) return cmd_compare(cmp, out, err);
  if (pc->parsed()) return cmd_report(rep, out, err);
  return cmd_simulate(sim, out, err);
}

}  // namespace orchkit::cli
