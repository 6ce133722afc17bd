#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "orchkit/core.hpp"

namespace orchkit::stats {

struct ContingencyCounts {
  std::size_t b = 0;  // A correct, B wrong
  std::size_t c = 0;  // A wrong, B correct
  std::size_t n_both = 0;
  std::size_t n_neither = 0;

  friend bool operator==(const ContingencyCounts&, const ContingencyCounts&) = default;
};

/// Joins on item_id. Throws kManifestMismatch (listing the symmetric
/// difference) unless both ledgers cover exactly the same items.
ContingencyCounts contingency(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b);

struct McNemarResult {
  double chi2 = 0.0;
  double p = 1.0;
  bool corrected = false;
  std::size_t b = 0;
  std::size_t c = 0;
};

/// (b-c)^2/(b+c), or (max(|b-c|-1, 0))^2/(b+c) when corrected; b+c = 0 gives (0, 1).
McNemarResult mcnemar(std::size_t b, std::size_t c, bool corrected);

/// Upper tail of the chi-square distribution with one degree of freedom,
/// erfc(sqrt(x/2)).
double chi2_sf_1df(double x);

// "<1e-40" below the floor, otherwise %.4g.
std::string format_p(double p);

enum class GroupBy { kNone, kSubject, kBucket };

GroupBy parse_group_by(std::string_view name);

struct AccuracyRow {
  std::string group;
  std::size_t n = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
};

/// One row per group (a single "all" row for kNone). Buckets sort numerically
/// (B1..B10); subjects alphabetically. Throws kEmptyLedger.
std::vector<AccuracyRow> accuracy(const std::vector<RunRecord>& ledger, GroupBy group_by);

using RosterCosts = std::vector<std::pair<std::string, double>>;  // roster order

/// Closed-form cost hint per question: VOTE = O+D+X, ORCH = 3(O+D+X),
/// two-agent ORCH = 2.5(O+D), ORCH with self-consistency = 6(O+D+X).
std::optional<double> closed_form_cost(const MethodKind& method, const RosterCosts& costs);

struct LatencyCostSummary {
  std::size_t n = 0;
  double mean_latency_ms = 0.0;
  double total_cost_units = 0.0;
  double mean_cost_units = 0.0;
  double mean_calls = 0.0;
  std::optional<double> paper_estimate;  // per question, from closed_form_cost
};

LatencyCostSummary latency_cost_summary(const std::vector<RunRecord>& ledger, const RosterCosts& costs);

}  // namespace orchkit::stats
