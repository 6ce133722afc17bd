#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orchkit/core.hpp"

namespace orchkit::protocol {

inline constexpr std::size_t kDefaultReplyCharLimit = 4096;
inline constexpr std::size_t kMinReplyCharLimit = 256;
inline constexpr std::size_t kMaxFacets = 5;

enum class PromptRole { kDispatch, kAnalyze, kMerge, kDirectAnswer };

std::string_view role_name(PromptRole role);
PromptRole parse_role(std::string_view name);

struct PromptBundle {
  PromptRole role = PromptRole::kDirectAnswer;
  std::string text;
  std::size_t char_limit_on_reply = kDefaultReplyCharLimit;
};

enum class SubQuestionOrigin { kDispatched, kFallback };

std::string_view origin_name(SubQuestionOrigin origin);

struct SubQuestionSet {
  std::vector<std::string> items;
  SubQuestionOrigin origin = SubQuestionOrigin::kFallback;
};

/// Option order used when presenting a question: entry i is the index of the
/// original option shown at position i. Shown options are re-lettered A, B, ...
using Permutation = std::vector<std::size_t>;

Permutation identity_permutation(std::size_t n);
void validate_permutation(const Permutation& perm, std::size_t n);

// Maps a letter read off a permuted presentation back to the original label.
char unpermute_letter(char shown, const Permutation& perm);
// Maps an original label to the letter it carries in the permuted presentation.
char permute_letter(char original, const Permutation& perm);

/// "Question: <stem>\nOptions:\nA. ...\nB. ..." (no Options block for numeric items).
std::string format_question(const Question& q);
std::string format_question(const Question& q, const Permutation& perm);

PromptBundle build_direct_prompt(const Question& q);
PromptBundle build_decomposition_prompt(const Question& q, std::size_t n_facets);
SubQuestionSet parse_subquestions(const Question& q, std::string_view raw, std::size_t n_facets);
SubQuestionSet fallback_subquestions(const Question& q, std::size_t n_facets);
PromptBundle build_analysis_prompt(const Question& q, std::string_view subquestion);

/// Only analyses with status OK are embedded; the facet number of each block is
/// its 1-based position in `analyses`. Throws Error(kNoEvidence) when nothing is OK.
PromptBundle build_merge_prompt(const Question& q, const std::vector<AgentAnalysis>& analyses,
                                const std::optional<Permutation>& perm = std::nullopt);

enum class ParseMode { kMerger, kAnalyst };

std::optional<char> parse_choice_letter(std::string_view raw, std::size_t n_options, ParseMode mode);
std::optional<Answer> parse_numeric_answer(std::string_view raw);

// Dispatches on q.kind; letters for MCQ, canonical numbers otherwise.
std::optional<Answer> parse_answer(const Question& q, std::string_view raw, ParseMode mode);

/// First `limit` Unicode scalar values of a UTF-8 string.
std::string truncate_reply(std::string_view raw, std::size_t limit);

}  // namespace orchkit::protocol
