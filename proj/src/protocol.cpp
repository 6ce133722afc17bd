#include "orchkit/protocol.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <sstream>

namespace orchkit::protocol {

namespace {

constexpr std::array<std::string_view, 3> kMcqFacets = {
    "Verify the core concept this question tests and state what a correct answer must satisfy.",
    "Eliminate options that are inconsistent with the facts of the question, with reasons.",
    "Check the remaining candidates for internal consistency and pick the best supported one.",
};

constexpr std::string_view kNumericSecondFacet =
    "Solve the problem step by step and state the intermediate results.";

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string letter_range(std::size_t n) {
  return std::string("A-") + static_cast<char>('A' + n - 1);
}

std::string letter_slashes(std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += '/';
    out += static_cast<char>('A' + i);
  }
  return out;
}

void require_reply_limit(std::size_t limit) {
  if (limit < kMinReplyCharLimit) {
    throw Error(ErrorCode::kPrecondition,
                "reply limit " + std::to_string(limit) + " below " + std::to_string(kMinReplyCharLimit));
  }
}

// Offsets just past every occurrence of any marker, in text order.
std::vector<std::size_t> marker_ends(const std::string& lowered,
                                     std::initializer_list<std::string_view> markers) {
  std::vector<std::pair<std::size_t, std::size_t>> hits;
  for (auto marker : markers) {
    for (auto pos = lowered.find(marker); pos != std::string::npos; pos = lowered.find(marker, pos + 1)) {
      hits.emplace_back(pos, pos + marker.size());
    }
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::size_t> ends;
  for (const auto& [start, end] : hits) ends.push_back(end);
  return ends;
}

const std::regex& number_literal() {
  static const std::regex re(R"(-?\$?(?:\d{1,3}(?:,\d{3})+(?!\d)|\d+)(?:\.\d+)?)");
  return re;
}

}  // namespace

std::string_view role_name(PromptRole role) {
  switch (role) {
    case PromptRole::kDispatch: return "DISPATCH";
    case PromptRole::kAnalyze: return "ANALYZE";
    case PromptRole::kMerge: return "MERGE";
    case PromptRole::kDirectAnswer: return "DIRECT_ANSWER";
  }
  return "?";
}

PromptRole parse_role(std::string_view name) {
  if (name == "DISPATCH") return PromptRole::kDispatch;
  if (name == "ANALYZE") return PromptRole::kAnalyze;
  if (name == "MERGE") return PromptRole::kMerge;
  if (name == "DIRECT_ANSWER") return PromptRole::kDirectAnswer;
  throw Error(ErrorCode::kValidation, "unknown prompt role '" + std::string(name) + "'");
}

std::string_view origin_name(SubQuestionOrigin origin) {
  return origin == SubQuestionOrigin::kDispatched ? "DISPATCHED" : "FALLBACK";
}

Permutation identity_permutation(std::size_t n) {
  Permutation perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  return perm;
}

void validate_permutation(const Permutation& perm, std::size_t n) {
  if (perm.size() != n) {
    throw Error(ErrorCode::kValidation, "permutation size " + std::to_string(perm.size()) +
                                            " does not match " + std::to_string(n) + " options");
  }
  std::vector<bool> seen(n, false);
  for (auto v : perm) {
    if (v >= n || seen[v]) throw Error(ErrorCode::kValidation, "not a permutation");
    seen[v] = true;
  }
}

char unpermute_letter(char shown, const Permutation& perm) {
  auto pos = static_cast<std::size_t>(shown - 'A');
  if (shown < 'A' || pos >= perm.size()) throw Error(ErrorCode::kValidation, "letter outside permutation");
  return static_cast<char>('A' + perm[pos]);
}

char permute_letter(char original, const Permutation& perm) {
  auto orig = static_cast<std::size_t>(original - 'A');
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] == orig) return static_cast<char>('A' + i);
  }
  throw Error(ErrorCode::kValidation, "letter outside permutation");
}

std::string format_question(const Question& q) {
  return format_question(q, identity_permutation(q.options.size()));
}

std::string format_question(const Question& q, const Permutation& perm) {
  validate_permutation(perm, q.options.size());
  std::string out = "Question: " + q.stem;
  if (q.kind == TaskKind::kOpenNumeric) return out;
  out += "\nOptions:";
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out += '\n';
    out += static_cast<char>('A' + i);
    out += ". " + q.options[perm[i]].text;
  }
  return out;
}

PromptBundle build_direct_prompt(const Question& q) {
  std::string text = format_question(q) + "\n\n";
  if (q.kind == TaskKind::kOpenNumeric) {
    text += "Answer with exactly one number. Reply with the line \"Final answer: <number>\".";
  } else {
    text += "Answer with exactly one option letter (" + letter_range(q.options.size()) +
            "). Reply with the line \"Final answer: <letter>\".";
  }
  return {PromptRole::kDirectAnswer, std::move(text), kDefaultReplyCharLimit};
}

PromptBundle build_decomposition_prompt(const Question& q, std::size_t n_facets) {
  if (n_facets < 1 || n_facets > kMaxFacets) {
    throw Error(ErrorCode::kPrecondition, "n_facets must be in [1, 5], got " + std::to_string(n_facets));
  }
  const std::string n = std::to_string(n_facets);
  std::string text = "You are the dispatcher for a team of analysts.\n\n" + format_question(q) + "\n\n";
  text += "Break this question into exactly " + n +
          " numbered sub-questions that examine it from complementary perspectives, such as "
          "concept verification, option elimination, and consistency checking.\n";
  text += "Reply with exactly " + n + " lines numbered \"1.\" to \"" + n +
          ".\", one sub-question per line, and nothing else.";
  return {PromptRole::kDispatch, std::move(text), kDefaultReplyCharLimit};
}

SubQuestionSet parse_subquestions(const Question& q, std::string_view raw, std::size_t n_facets) {
  static const std::regex numbered(R"(^\s*(\d+)\.(?:\s+(.*))?$)");
  std::vector<std::string> items;
  bool in_sequence = true;
  std::istringstream lines{std::string(raw)};
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (!std::regex_match(line, m, numbered)) continue;
    const std::string digits = m[1].str();
    const std::string body(trim(m[2].str()));
    if (digits.size() > 2 || std::stoul(digits) != items.size() + 1 || body.empty()) {
      in_sequence = false;
      break;
    }
    items.push_back(body);
  }
  if (in_sequence && items.size() == n_facets) return {std::move(items), SubQuestionOrigin::kDispatched};
  return fallback_subquestions(q, n_facets);
}

SubQuestionSet fallback_subquestions(const Question& q, std::size_t n_facets) {
  if (n_facets < 1 || n_facets > kMcqFacets.size()) {
    throw Error(ErrorCode::kConfig, "only " + std::to_string(kMcqFacets.size()) +
                                        " generic sub-questions exist, requested " + std::to_string(n_facets));
  }
  SubQuestionSet set{{}, SubQuestionOrigin::kFallback};
  for (std::size_t i = 0; i < n_facets; ++i) {
    if (i == 1 && q.kind == TaskKind::kOpenNumeric) {
      set.items.emplace_back(kNumericSecondFacet);
    } else {
      set.items.emplace_back(kMcqFacets[i]);
    }
  }
  return set;
}

PromptBundle build_analysis_prompt(const Question& q, std::string_view subquestion) {
  if (trim(subquestion).empty()) throw Error(ErrorCode::kPrecondition, "empty sub-question");
  std::string text = "You are one analyst on a team answering the question below.\n\n" + format_question(q) +
                     "\n\nYour assigned sub-question: " + std::string(subquestion) + "\n\n";
  if (q.kind == TaskKind::kOpenNumeric) {
    text +=
        "Write a structured analysis of roughly 500 words that solves the problem step by step "
        "and states the intermediate results.\n"
        "Conclude with a final line of the form \"Provisional answer: <number>\".";
  } else {
    text +=
        "Write a structured analysis of roughly 500 words, explicitly stating which options are "
        "supported or ruled out and why.\n"
        "Conclude with a final line of the form \"Provisional answer: <letter>\" where <letter> is one of " +
        letter_slashes(q.options.size()) + ".";
  }
  return {PromptRole::kAnalyze, std::move(text), kDefaultReplyCharLimit};
}

PromptBundle build_merge_prompt(const Question& q, const std::vector<AgentAnalysis>& analyses,
                                const std::optional<Permutation>& perm) {
  std::string blocks;
  for (std::size_t i = 0; i < analyses.size(); ++i) {
    const auto& a = analyses[i];
    if (a.status != AnalysisStatus::kOk) continue;
    blocks += "[Agent " + a.agent.name + " | facet " + std::to_string(i + 1) + "]\n" + a.analysis_text + "\n\n";
  }
  if (blocks.empty()) throw Error(ErrorCode::kNoEvidence, q.item_id + ": no successful analyses to merge");

  const std::string question = perm ? format_question(q, *perm) : format_question(q);
  std::string text = "You are the merging agent. Several analysts examined the question below, each from a "
                     "different angle.\n\n" + question + "\n\n" + blocks;
  text += "Read all evidence, compare agreements and disagreements across agents, and then ";
  if (q.kind == TaskKind::kOpenNumeric) {
    text += "output exactly one final number as the decision.\nReply with the line \"Final answer: <number>\".";
  } else {
    text += "output exactly one final option letter (" + letter_range(q.options.size()) +
            ") as the decision.\nReply with the line \"Final answer: <letter>\".";
  }
  return {PromptRole::kMerge, std::move(text), kDefaultReplyCharLimit};
}

std::optional<char> parse_choice_letter(std::string_view raw, std::size_t n_options, ParseMode mode) {
  if (n_options < 2 || n_options > 10) {
    throw Error(ErrorCode::kPrecondition, "n_options must be in [2, 10]");
  }
  const char last = static_cast<char>('A' + n_options - 1);
  auto in_range = [&](char c) { return c >= 'A' && c <= last; };

  // P1: explicit marker, last one wins.
  const auto ends = marker_ends(lower(raw), {"provisional answer:", "final answer:"});
  for (auto it = ends.rbegin(); it != ends.rend(); ++it) {
    std::size_t p = *it;
    while (p < raw.size() && is_space(raw[p])) ++p;
    if (p < raw.size() && raw[p] == '(') ++p;
    if (p >= raw.size() || !in_range(raw[p])) continue;
    const char letter = raw[p];
    ++p;
    if (p < raw.size() && raw[p] == ')') ++p;
    if (p < raw.size() && is_alnum(raw[p])) continue;
    return letter;
  }

  // P2: standalone letter token.
  std::optional<char> found;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!in_range(raw[i])) continue;
    if (i > 0 && is_alnum(raw[i - 1])) continue;
    if (i + 1 < raw.size() && is_alnum(raw[i + 1])) continue;
    found = raw[i];
    if (mode == ParseMode::kMerger) break;
  }
  return found;
}

std::optional<Answer> parse_numeric_answer(std::string_view raw) {
  const std::string text(raw);
  const auto ends = marker_ends(lower(raw), {"provisional answer:", "final answer:", "####"});
  if (!ends.empty()) {
    const std::string tail = text.substr(ends.back());
    std::smatch m;
    if (std::regex_search(tail, m, number_literal())) return Answer::number(m.str());
  }
  std::optional<Answer> last;
  for (std::sregex_iterator it(text.begin(), text.end(), number_literal()), end; it != end; ++it) {
    last = Answer::number(it->str());
  }
  return last;
}

std::optional<Answer> parse_answer(const Question& q, std::string_view raw, ParseMode mode) {
  if (q.kind == TaskKind::kOpenNumeric) return parse_numeric_answer(raw);
  auto letter = parse_choice_letter(raw, q.options.size(), mode);
  if (!letter) return std::nullopt;
  return Answer::letter(*letter);
}

std::string truncate_reply(std::string_view raw, std::size_t limit) {
  require_reply_limit(limit);
  std::size_t scalars = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    // Continuation bytes (10xxxxxx) belong to the preceding scalar.
    if ((static_cast<unsigned char>(raw[i]) & 0xC0) == 0x80) continue;
    if (scalars == limit) return std::string(raw.substr(0, i));
    ++scalars;
  }
  return std::string(raw);
}

}  // namespace orchkit::protocol
