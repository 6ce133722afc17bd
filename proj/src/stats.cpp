#include "orchkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

namespace orchkit::stats {

ContingencyCounts contingency(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b) {
  std::map<std::string, bool> left;
  std::map<std::string, bool> right;
  for (const auto& r : a) left[r.item_id] = r.correct;
  for (const auto& r : b) right[r.item_id] = r.correct;

  std::vector<std::string> diff;
  for (const auto& [id, _] : left) {
    if (!right.count(id)) diff.push_back(id);
  }
  for (const auto& [id, _] : right) {
    if (!left.count(id)) diff.push_back(id);
  }
  if (!diff.empty() || left.size() != a.size() || right.size() != b.size()) {
    std::string listed;
    for (std::size_t i = 0; i < diff.size() && i < 20; ++i) listed += (i ? ", " : "") + diff[i];
    if (diff.size() > 20) listed += ", ...";
    if (diff.empty()) listed = "duplicate item ids";
    throw Error(ErrorCode::kManifestMismatch,
                "ledgers differ on " + std::to_string(diff.size()) + " items: " + listed);
  }

  ContingencyCounts out;
  for (const auto& [id, a_ok] : left) {
    const bool b_ok = right[id];
    if (a_ok && !b_ok) ++out.b;
    else if (!a_ok && b_ok) ++out.c;
    else if (a_ok) ++out.n_both;
    else ++out.n_neither;
  }
  return out;
}

double chi2_sf_1df(double x) {
  if (!(x > 0.0)) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

McNemarResult mcnemar(std::size_t b, std::size_t c, bool corrected) {
  McNemarResult r;
  r.b = b;
  r.c = c;
  r.corrected = corrected;
  if (b + c == 0) return r;
  double diff = std::fabs(static_cast<double>(b) - static_cast<double>(c));
  if (corrected) diff = std::max(diff - 1.0, 0.0);
  r.chi2 = diff * diff / static_cast<double>(b + c);
  r.p = chi2_sf_1df(r.chi2);
  return r;
}

std::string format_p(double p) {
  if (p < 1e-40) return "<1e-40";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", p);
  return buf;
}

GroupBy parse_group_by(std::string_view name) {
  if (name == "none") return GroupBy::kNone;
  if (name == "subject") return GroupBy::kSubject;
  if (name == "bucket") return GroupBy::kBucket;
  throw Error(ErrorCode::kValidation, "unknown grouping '" + std::string(name) + "'");
}

namespace {

// "B7" -> 7; anything else sorts after numbered buckets.
long bucket_number(const std::string& label) {
  if (label.size() < 2 || label[0] != 'B') return -1;
  if (!std::all_of(label.begin() + 1, label.end(), [](char c) { return c >= '0' && c <= '9'; })) return -1;
  return std::stol(label.substr(1));
}

AccuracyRow make_row(std::string group, std::size_t n, std::size_t correct) {
  return {std::move(group), n, correct, static_cast<double>(correct) / static_cast<double>(n)};
}

}  // namespace

std::vector<AccuracyRow> accuracy(const std::vector<RunRecord>& ledger, GroupBy group_by) {
  if (ledger.empty()) throw Error(ErrorCode::kEmptyLedger, "no records to aggregate");
  if (group_by == GroupBy::kNone) {
    const auto correct = static_cast<std::size_t>(
        std::count_if(ledger.begin(), ledger.end(), [](const RunRecord& r) { return r.correct; }));
    return {make_row("all", ledger.size(), correct)};
  }
  std::map<std::string, std::pair<std::size_t, std::size_t>> groups;
  for (const auto& r : ledger) {
    auto& [n, correct] = groups[r.subject];
    ++n;
    correct += r.correct ? 1 : 0;
  }
  std::vector<AccuracyRow> rows;
  for (const auto& [group, counts] : groups) rows.push_back(make_row(group, counts.first, counts.second));
  if (group_by == GroupBy::kBucket) {
    std::stable_sort(rows.begin(), rows.end(), [](const AccuracyRow& a, const AccuracyRow& b) {
      const long na = bucket_number(a.group);
      const long nb = bucket_number(b.group);
      if ((na < 0) != (nb < 0)) return na >= 0;
      return na < nb;
    });
  }
  return rows;
}

std::optional<double> closed_form_cost(const MethodKind& method, const RosterCosts& costs) {
  auto sum_of = [&](const std::vector<std::string>* names) {
    double s = 0.0;
    for (const auto& [name, cost] : costs) {
      if (!names || std::find(names->begin(), names->end(), name) != names->end()) s += cost;
    }
    return s;
  };
  switch (method.type) {
    case MethodType::kSingle:
      for (const auto& [name, cost] : costs) {
        if (name == method.agent) return cost;
      }
      return std::nullopt;
    case MethodType::kVote: return sum_of(nullptr);
    case MethodType::kOrch:
    case MethodType::kOrchEma: return 3.0 * sum_of(nullptr);
    case MethodType::kOrchSubset:
      if (method.subset.size() == costs.size()) return 3.0 * sum_of(nullptr);
      if (method.subset.size() == 2) return 2.5 * sum_of(&method.subset);
      return std::nullopt;
    case MethodType::kOrchEmaSc: return 6.0 * sum_of(nullptr);
  }
  return std::nullopt;
}

LatencyCostSummary latency_cost_summary(const std::vector<RunRecord>& ledger, const RosterCosts& costs) {
  LatencyCostSummary s;
  s.n = ledger.size();
  if (!ledger.empty()) s.paper_estimate = closed_form_cost(ledger.front().method, costs);
  if (ledger.empty()) return s;
  double latency = 0.0;
  double calls = 0.0;
  for (const auto& r : ledger) {
    latency += r.verdict.total_latency_ms;
    s.total_cost_units += r.verdict.total_cost_units;
    calls += r.verdict.calls_made;
  }
  const auto n = static_cast<double>(ledger.size());
  s.mean_latency_ms = latency / n;
  s.mean_cost_units = s.total_cost_units / n;
  s.mean_calls = calls / n;
  return s;
}

}  // namespace orchkit::stats
