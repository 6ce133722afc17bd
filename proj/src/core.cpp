#include "orchkit/core.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace orchkit {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation: return "VALIDATION";
    case ErrorCode::kNotANumber: return "NOT_A_NUMBER";
    case ErrorCode::kPrecondition: return "PRECONDITION";
    case ErrorCode::kConfig: return "CONFIG";
    case ErrorCode::kNoEvidence: return "NO_EVIDENCE";
    case ErrorCode::kAllAgentsFailed: return "ALL_AGENTS_FAILED";
    case ErrorCode::kSamplingUnderflow: return "SAMPLING_UNDERFLOW";
    case ErrorCode::kSchemaViolation: return "SCHEMA_VIOLATION";
    case ErrorCode::kIo: return "IO";
    case ErrorCode::kManifestMismatch: return "MANIFEST_MISMATCH";
    case ErrorCode::kEmptyLedger: return "EMPTY_LEDGER";
  }
  return "UNKNOWN";
}

void validate_roster_ids(const std::vector<AgentId>& ids) {
  std::set<std::size_t> indices;
  std::set<std::string> names;
  for (const auto& id : ids) {
    if (id.name.empty()) throw Error(ErrorCode::kValidation, "agent name must be non-empty");
    if (!indices.insert(id.index).second) {
      throw Error(ErrorCode::kValidation, "duplicate agent index " + std::to_string(id.index));
    }
    if (!names.insert(id.name).second) {
      throw Error(ErrorCode::kValidation, "duplicate agent name '" + id.name + "'");
    }
  }
}

std::size_t option_count(TaskKind kind) {
  switch (kind) {
    case TaskKind::kMcq4: return 4;
    case TaskKind::kMcq10: return 10;
    case TaskKind::kOpenNumeric: return 0;
  }
  return 0;
}

std::string_view task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kMcq4: return "MCQ4";
    case TaskKind::kMcq10: return "MCQ10";
    case TaskKind::kOpenNumeric: return "OPEN_NUMERIC";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "MCQ4") return TaskKind::kMcq4;
  if (name == "MCQ10") return TaskKind::kMcq10;
  if (name == "OPEN_NUMERIC") return TaskKind::kOpenNumeric;
  throw Error(ErrorCode::kValidation, "unknown task kind '" + std::string(name) + "'");
}

Answer Answer::letter(char label) {
  if (label < 'A' || label > 'Z') {
    throw Error(ErrorCode::kValidation, std::string("invalid answer letter '") + label + "'");
  }
  return Answer(Kind::kLetter, std::string(1, label));
}

Answer Answer::number(std::string_view raw) { return Answer(Kind::kNumber, canonicalize_number(raw)); }

char Answer::as_letter() const {
  if (kind_ != Kind::kLetter) throw Error(ErrorCode::kValidation, "answer is not a letter");
  return value_[0];
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::string canonicalize_number(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (char c : raw) {
    if (c != '$' && c != ',') s.push_back(c);
  }
  auto first = std::find_if_not(s.begin(), s.end(), is_space);
  auto last = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
  s = first < last ? std::string(first, last) : std::string();
  if (!s.empty() && s.back() == '.') s.pop_back();

  auto fail = [&] { return Error(ErrorCode::kNotANumber, "'" + std::string(raw) + "'"); };
  if (s.empty()) throw fail();

  bool negative = false;
  std::size_t pos = 0;
  if (s[0] == '-' || s[0] == '+') {
    negative = s[0] == '-';
    pos = 1;
  }
  std::string int_part;
  std::string frac_part;
  bool seen_dot = false;
  for (; pos < s.size(); ++pos) {
    char c = s[pos];
    if (c == '.') {
      if (seen_dot) throw fail();
      seen_dot = true;
    } else if (is_digit(c)) {
      (seen_dot ? frac_part : int_part).push_back(c);
    } else {
      throw fail();
    }
  }
  if (int_part.empty() && frac_part.empty()) throw fail();

  int_part.erase(0, std::min(int_part.find_first_not_of('0'), int_part.size()));
  if (int_part.empty()) int_part = "0";
  frac_part.erase(std::min(frac_part.find_last_not_of('0') + 1, frac_part.size()));

  std::string out = int_part;
  if (!frac_part.empty()) out += "." + frac_part;
  if (negative && out != "0") out.insert(out.begin(), '-');
  return out;
}

void validate_answer(TaskKind kind, const Answer& answer) {
  if (kind == TaskKind::kOpenNumeric) {
    if (answer.is_letter()) throw Error(ErrorCode::kValidation, "letter answer for OPEN_NUMERIC item");
    return;
  }
  if (!answer.is_letter()) throw Error(ErrorCode::kValidation, "numeric answer for MCQ item");
  const char last = static_cast<char>('A' + option_count(kind) - 1);
  if (answer.as_letter() > last) {
    throw Error(ErrorCode::kValidation,
                "letter " + answer.value() + " outside A-" + std::string(1, last));
  }
}

bool answers_equal(TaskKind kind, const Answer& a, const Answer& b) {
  validate_answer(kind, a);
  validate_answer(kind, b);
  return a.value() == b.value();
}

void validate_question(const Question& q) {
  if (q.item_id.empty()) throw Error(ErrorCode::kValidation, "empty item_id");
  const std::size_t n = option_count(q.kind);
  if (q.options.size() != n) {
    throw Error(ErrorCode::kValidation, q.item_id + ": " + std::string(task_kind_name(q.kind)) +
                                            " requires " + std::to_string(n) + " options, got " +
                                            std::to_string(q.options.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (q.options[i].label != static_cast<char>('A' + i)) {
      throw Error(ErrorCode::kValidation, q.item_id + ": option labels must be A, B, C, ... in order");
    }
  }
  validate_answer(q.kind, q.gold);
}

Question make_question(std::string item_id, TaskKind kind, std::string subject, std::string stem,
                       const std::vector<std::string>& option_texts, Answer gold) {
  Question q{std::move(item_id), kind, std::move(subject), std::move(stem), {}, std::move(gold)};
  for (std::size_t i = 0; i < option_texts.size(); ++i) {
    q.options.push_back({static_cast<char>('A' + i), option_texts[i]});
  }
  validate_question(q);
  return q;
}

std::string_view status_name(AnalysisStatus status) {
  switch (status) {
    case AnalysisStatus::kOk: return "OK";
    case AnalysisStatus::kTimeout: return "TIMEOUT";
    case AnalysisStatus::kTransportError: return "TRANSPORT_ERROR";
    case AnalysisStatus::kMalformed: return "MALFORMED";
  }
  return "?";
}

AnalysisStatus parse_status(std::string_view name) {
  if (name == "OK") return AnalysisStatus::kOk;
  if (name == "TIMEOUT") return AnalysisStatus::kTimeout;
  if (name == "TRANSPORT_ERROR") return AnalysisStatus::kTransportError;
  if (name == "MALFORMED") return AnalysisStatus::kMalformed;
  throw Error(ErrorCode::kValidation, "unknown status '" + std::string(name) + "'");
}

std::string method_label(const MethodKind& method) {
  auto join = [](const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
    return out;
  };
  switch (method.type) {
    case MethodType::kSingle: return "SINGLE(" + method.agent + ")";
    case MethodType::kVote: return "VOTE";
    case MethodType::kOrch: return "ORCH";
    case MethodType::kOrchSubset: return "ORCH_K(" + join(method.subset) + ")";
    case MethodType::kOrchEma: return "ORCH_EMA";
    case MethodType::kOrchEmaSc:
      return "ORCH_EMA_SC(" + std::to_string(method.sc_k) + "," + std::to_string(method.shuffle_m) + ")";
  }
  return "?";
}

namespace {

std::vector<std::string> split_args(std::string_view label, std::string_view prefix) {
  if (label.size() < prefix.size() + 2 || label.substr(0, prefix.size()) != prefix ||
      label[prefix.size()] != '(' || label.back() != ')') {
    throw Error(ErrorCode::kValidation, "malformed method '" + std::string(label) + "'");
  }
  std::string_view inner = label.substr(prefix.size() + 1, label.size() - prefix.size() - 2);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto comma = inner.find(',', start);
    auto part = inner.substr(start, comma == std::string_view::npos ? inner.npos : comma - start);
    if (part.empty()) throw Error(ErrorCode::kValidation, "empty argument in '" + std::string(label) + "'");
    out.emplace_back(part);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

int parse_nonneg_int(const std::string& s, std::string_view label) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), is_digit) || s.size() > 6) {
    throw Error(ErrorCode::kValidation, "bad integer in '" + std::string(label) + "'");
  }
  return std::stoi(s);
}

}  // namespace

MethodKind parse_method(std::string_view label) {
  if (label == "VOTE") return MethodKind::vote();
  if (label == "ORCH") return MethodKind::orch();
  if (label == "ORCH_EMA") return MethodKind::orch_ema();
  if (label.starts_with("SINGLE(")) {
    auto args = split_args(label, "SINGLE");
    if (args.size() != 1) throw Error(ErrorCode::kValidation, "SINGLE takes one agent");
    return MethodKind::single(args[0]);
  }
  if (label.starts_with("ORCH_K(")) return MethodKind::orch_subset(split_args(label, "ORCH_K"));
  if (label.starts_with("ORCH_EMA_SC(")) {
    auto args = split_args(label, "ORCH_EMA_SC");
    if (args.size() != 2) throw Error(ErrorCode::kValidation, "ORCH_EMA_SC takes (K,m)");
    int k = parse_nonneg_int(args[0], label);
    int m = parse_nonneg_int(args[1], label);
    if (k < 1) throw Error(ErrorCode::kValidation, "self-consistency K must be >= 1");
    return MethodKind::orch_ema_sc(k, m);
  }
  throw Error(ErrorCode::kValidation, "unknown method '" + std::string(label) + "'");
}

}  // namespace orchkit
