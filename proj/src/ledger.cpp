#include "orchkit/ledger.hpp"

#include <algorithm>
#include <sstream>

namespace orchkit::ledger {

using nlohmann::json;

json answer_to_json(const std::optional<Answer>& a) {
  if (!a) return nullptr;
  return a->value();
}

std::optional<Answer> answer_from_json(const json& j, TaskKind kind) {
  if (j.is_null()) return std::nullopt;
  const auto s = j.get<std::string>();
  if (kind == TaskKind::kOpenNumeric) return Answer::number(s);
  if (s.size() != 1) throw Error(ErrorCode::kSchemaViolation, "letter answer '" + s + "' is not one character");
  return Answer::letter(s[0]);
}

namespace {

json usage_json(const std::optional<TokenUsage>& u) {
  if (!u) return nullptr;
  return {{"prompt", u->prompt}, {"completion", u->completion}, {"total", u->total}};
}

std::optional<TokenUsage> usage_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return TokenUsage{j.at("prompt").get<std::uint64_t>(), j.at("completion").get<std::uint64_t>(),
                    j.at("total").get<std::uint64_t>()};
}

json trace_json(const MergeTrace& t) {
  json samples = json::array();
  for (const auto& s : t.sample_answers) samples.push_back(answer_to_json(s));
  return {{"dispatcher", t.dispatcher},
          {"merger", t.merger},
          {"subquestion_origin", t.subquestion_origin},
          {"merge_prompt_digest", t.merge_prompt_digest},
          {"merge_text_digest", t.merge_text_digest},
          {"samples_taken", t.samples_taken},
          {"permutations", t.permutations},
          {"sample_answers", samples},
          {"used_fallback_merger", t.used_fallback_merger}};
}

MergeTrace trace_from(const json& j, TaskKind kind) {
  MergeTrace t;
  t.dispatcher = j.at("dispatcher").get<std::string>();
  t.merger = j.at("merger").get<std::string>();
  t.subquestion_origin = j.at("subquestion_origin").get<std::string>();
  t.merge_prompt_digest = j.at("merge_prompt_digest").get<std::string>();
  t.merge_text_digest = j.at("merge_text_digest").get<std::string>();
  t.samples_taken = j.at("samples_taken").get<int>();
  t.permutations = j.at("permutations").get<std::vector<std::vector<std::size_t>>>();
  for (const auto& s : j.at("sample_answers")) t.sample_answers.push_back(answer_from_json(s, kind));
  t.used_fallback_merger = j.at("used_fallback_merger").get<bool>();
  return t;
}

}  // namespace

json record_to_json(const RunRecord& r, TaskKind kind, const std::optional<json>& router_snapshot) {
  const auto& v = r.verdict;
  json analyses = json::array();
  for (const auto& a : v.analyses) {
    analyses.push_back({{"agent", a.agent.name},
                        {"agent_index", a.agent.index},
                        {"subquestion", a.subquestion},
                        {"analysis_text", a.analysis_text},
                        {"provisional", answer_to_json(a.provisional)},
                        {"status", status_name(a.status)},
                        {"latency_ms", a.latency_ms},
                        {"cost_units", a.cost_units},
                        {"token_usage", usage_json(a.token_usage)}});
  }
  json j = {{"type", "item"},
            {"wall_position", r.wall_position},
            {"item_id", r.item_id},
            {"subject", r.subject},
            {"kind", task_kind_name(kind)},
            {"method", method_label(r.method)},
            {"gold", r.gold.value()},
            {"final_answer", answer_to_json(v.final_answer)},
            {"correct", r.correct},
            {"calls_made", v.calls_made},
            {"latency_ms", v.total_latency_ms},
            {"cost_units", v.total_cost_units},
            {"failure", v.failure},
            {"analyses", analyses},
            {"merge_trace", v.merge_trace ? trace_json(*v.merge_trace) : json(nullptr)}};
  if (router_snapshot) j["router_snapshot"] = *router_snapshot;
  return j;
}

RunRecord record_from_json(const json& j, TaskKind* kind_out) {
  const TaskKind kind = parse_task_kind(j.at("kind").get<std::string>());
  if (kind_out) *kind_out = kind;
  RunRecord r;
  r.wall_position = j.at("wall_position").get<std::size_t>();
  r.item_id = j.at("item_id").get<std::string>();
  r.subject = j.at("subject").get<std::string>();
  r.method = parse_method(j.at("method").get<std::string>());
  r.gold = *answer_from_json(j.at("gold"), kind);
  r.correct = j.at("correct").get<bool>();
  auto& v = r.verdict;
  v.method = r.method;
  v.final_answer = answer_from_json(j.at("final_answer"), kind);
  v.calls_made = j.at("calls_made").get<int>();
  v.total_latency_ms = j.at("latency_ms").get<double>();
  v.total_cost_units = j.at("cost_units").get<double>();
  v.failure = j.at("failure").get<std::string>();
  for (const auto& a : j.at("analyses")) {
    AgentAnalysis x;
    x.agent = {a.at("agent_index").get<std::size_t>(), a.at("agent").get<std::string>()};
    x.subquestion = a.at("subquestion").get<std::string>();
    x.analysis_text = a.at("analysis_text").get<std::string>();
    x.provisional = answer_from_json(a.at("provisional"), kind);
    x.status = parse_status(a.at("status").get<std::string>());
    x.latency_ms = a.at("latency_ms").get<double>();
    x.cost_units = a.at("cost_units").get<double>();
    x.token_usage = usage_from(a.at("token_usage"));
    v.analyses.push_back(std::move(x));
  }
  if (!j.at("merge_trace").is_null()) v.merge_trace = trace_from(j.at("merge_trace"), kind);
  return r;
}

json summary_to_json(const Summary& s) {
  json costs = json::array();
  for (const auto& [name, cost] : s.roster_costs) costs.push_back({name, cost});
  return {{"type", "summary"},
          {"method", s.method},
          {"benchmark", s.benchmark},
          {"n", s.n},
          {"n_correct", s.n_correct},
          {"accuracy", s.accuracy},
          {"mean_latency_ms", s.mean_latency_ms},
          {"total_cost_units", s.total_cost_units},
          {"mean_calls", s.mean_calls},
          {"config_digest", s.config_digest},
          {"manifest_digest", s.manifest_digest},
          {"dataset_digest", s.dataset_digest},
          {"roster_costs", costs},
          {"paper_estimate_cost", s.paper_estimate_cost ? json(*s.paper_estimate_cost) : json(nullptr)}};
}

Summary summary_from_json(const json& j) {
  Summary s;
  s.method = j.at("method").get<std::string>();
  s.benchmark = j.at("benchmark").get<std::string>();
  s.n = j.at("n").get<std::size_t>();
  s.n_correct = j.at("n_correct").get<std::size_t>();
  s.accuracy = j.at("accuracy").get<double>();
  s.mean_latency_ms = j.at("mean_latency_ms").get<double>();
  s.total_cost_units = j.at("total_cost_units").get<double>();
  s.mean_calls = j.at("mean_calls").get<double>();
  s.config_digest = j.at("config_digest").get<std::string>();
  s.manifest_digest = j.at("manifest_digest").get<std::string>();
  s.dataset_digest = j.at("dataset_digest").get<std::string>();
  for (const auto& c : j.at("roster_costs")) s.roster_costs.emplace_back(c.at(0).get<std::string>(), c.at(1).get<double>());
  if (!j.at("paper_estimate_cost").is_null()) s.paper_estimate_cost = j.at("paper_estimate_cost").get<double>();
  return s;
}

Summary summarize(const std::vector<RunRecord>& records, const stats::RosterCosts& costs) {
  Summary s;
  s.roster_costs = costs;
  s.n = records.size();
  if (records.empty()) return s;
  s.method = method_label(records.front().method);
  s.n_correct = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const RunRecord& r) { return r.correct; }));
  s.accuracy = stats::accuracy(records, stats::GroupBy::kNone).front().accuracy;
  const auto lc = stats::latency_cost_summary(records, costs);
  s.mean_latency_ms = lc.mean_latency_ms;
  s.total_cost_units = lc.total_cost_units;
  s.mean_calls = lc.mean_calls;
  s.paper_estimate_cost = lc.paper_estimate;
  return s;
}

Ledger parse_ledger(std::string_view contents, std::string_view source_name) {
  Ledger out;
  std::istringstream in{std::string(contents)};
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    return Error(ErrorCode::kSchemaViolation, std::string(source_name) + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (out.summary) throw fail("line after the summary record");
    try {
      const json j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "item") {
        TaskKind kind{};
        out.records.push_back(record_from_json(j, &kind));
        out.kinds.push_back(kind);
        if (j.contains("router_snapshot")) {
          out.router_snapshots.emplace_back(j["router_snapshot"]);
        } else {
          out.router_snapshots.emplace_back(std::nullopt);
        }
      } else if (type == "summary") {
        out.summary = summary_from_json(j);
      } else {
        throw fail("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw fail(e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kSchemaViolation) throw;
      throw fail(e.what());
    }
  }
  return out;
}

Ledger read_ledger(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read ledger " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_ledger(buf.str(), path.string());
}

Writer::Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::kIo, "cannot write ledger " + path.string());
}

void Writer::item(const RunRecord& r, TaskKind kind, const std::optional<json>& router_snapshot) {
  line(record_to_json(r, kind, router_snapshot));
}

void Writer::summary(const Summary& s) { line(summary_to_json(s)); }

void Writer::line(const json& j) {
  out_ << j.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::kIo, "write failed on " + path_.string());
}

}  // namespace orchkit::ledger
