#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace orchkit {

enum class ErrorCode {
  kValidation,
  kNotANumber,
  kPrecondition,
  kConfig,
  kNoEvidence,
  kAllAgentsFailed,
  kSamplingUnderflow,
  kSchemaViolation,
  kIo,
  kManifestMismatch,
  kEmptyLedger,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure raised by the library carries a stable code so that the
/// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct AgentId {
  std::size_t index = 0;  // roster position; lower index = higher priority
  std::string name;

  friend bool operator==(const AgentId&, const AgentId&) = default;
};

// Checks index/name uniqueness across a roster.
void validate_roster_ids(const std::vector<AgentId>& ids);

enum class TaskKind { kMcq4, kMcq10, kOpenNumeric };

std::size_t option_count(TaskKind kind);
std::string_view task_kind_name(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

/// A letter choice or a canonical decimal string. Numbers are canonicalized on
/// construction, so two Number answers are equal iff their payloads match.
class Answer {
 public:
  enum class Kind { kLetter, kNumber };

  static Answer letter(char label);
  static Answer number(std::string_view raw);

  Kind kind() const noexcept { return kind_; }
  bool is_letter() const noexcept { return kind_ == Kind::kLetter; }
  char as_letter() const;
  const std::string& value() const noexcept { return value_; }

  friend bool operator==(const Answer&, const Answer&) = default;

 private:
  Answer(Kind kind, std::string value) : kind_(kind), value_(std::move(value)) {}

  Kind kind_;
  std::string value_;
};

/// Strips "$", ",", surrounding whitespace and one trailing "." and returns the
/// canonical decimal string. Throws Error(kNotANumber).
std::string canonicalize_number(std::string_view raw);

bool answers_equal(TaskKind kind, const Answer& a, const Answer& b);

// Throws kValidation when `answer` is not a legal answer for `kind`.
void validate_answer(TaskKind kind, const Answer& answer);

struct Option {
  char label = 'A';
  std::string text;

  friend bool operator==(const Option&, const Option&) = default;
};

struct Question {
  std::string item_id;
  TaskKind kind = TaskKind::kMcq4;
  std::string subject;
  std::string stem;
  std::vector<Option> options;
  Answer gold = Answer::letter('A');
};

void validate_question(const Question& q);

// Convenience constructor: labels the option texts A, B, C, ... and validates.
Question make_question(std::string item_id, TaskKind kind, std::string subject, std::string stem,
                       const std::vector<std::string>& option_texts, Answer gold);

enum class AnalysisStatus { kOk, kTimeout, kTransportError, kMalformed };

std::string_view status_name(AnalysisStatus status);
AnalysisStatus parse_status(std::string_view name);

struct TokenUsage {
  std::uint64_t prompt = 0;
  std::uint64_t completion = 0;
  std::uint64_t total = 0;

  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct AgentAnalysis {
  AgentId agent;
  std::string subquestion;
  std::string analysis_text;
  std::optional<Answer> provisional;
  AnalysisStatus status = AnalysisStatus::kOk;
  double latency_ms = 0.0;
  double cost_units = 0.0;
  std::optional<TokenUsage> token_usage;
};

enum class MethodType { kSingle, kVote, kOrch, kOrchSubset, kOrchEma, kOrchEmaSc };

struct MethodKind {
  MethodType type = MethodType::kOrch;
  std::string agent;                // kSingle
  std::vector<std::string> subset;  // kOrchSubset
  int sc_k = 1;                     // kOrchEmaSc
  int shuffle_m = 0;                // kOrchEmaSc

  static MethodKind single(std::string agent) { return {MethodType::kSingle, std::move(agent), {}, 1, 0}; }
  static MethodKind vote() { return {MethodType::kVote, {}, {}, 1, 0}; }
  static MethodKind orch() { return {MethodType::kOrch, {}, {}, 1, 0}; }
  static MethodKind orch_subset(std::vector<std::string> subset) {
    return {MethodType::kOrchSubset, {}, std::move(subset), 1, 0};
  }
  static MethodKind orch_ema() { return {MethodType::kOrchEma, {}, {}, 1, 0}; }
  static MethodKind orch_ema_sc(int k, int m) { return {MethodType::kOrchEmaSc, {}, {}, k, m}; }

  friend bool operator==(const MethodKind&, const MethodKind&) = default;
};

// "SINGLE(O)", "VOTE", "ORCH", "ORCH_K(O,D)", "ORCH_EMA", "ORCH_EMA_SC(2,1)".
std::string method_label(const MethodKind& method);
MethodKind parse_method(std::string_view label);

struct MergeTrace {
  std::string dispatcher;
  std::string merger;
  std::string subquestion_origin;  // "DISPATCHED" | "FALLBACK"
  std::string merge_prompt_digest;
  std::string merge_text_digest;
  int samples_taken = 0;
  std::vector<std::vector<std::size_t>> permutations;  // one per option order
  std::vector<std::optional<Answer>> sample_answers;   // mapped back to original labels
  bool used_fallback_merger = false;
};

struct Verdict {
  MethodKind method;
  std::optional<Answer> final_answer;
  std::vector<AgentAnalysis> analyses;
  std::optional<MergeTrace> merge_trace;
  double total_latency_ms = 0.0;
  double total_cost_units = 0.0;
  int calls_made = 0;
  std::string failure;  // error code name when no answer was produced
};

struct RunRecord {
  std::string item_id;
  std::string subject;
  MethodKind method;
  Verdict verdict;
  bool correct = false;
  Answer gold = Answer::letter('A');
  std::size_t wall_position = 0;
};

}  // namespace orchkit
