#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>

#include "helpers.hpp"
#include "orchkit/protocol.hpp"
#include "orchkit/rng.hpp"

using namespace orchkit;
using namespace orchkit::protocol;

namespace {

Question two_plus_two() {
  return make_question("t", TaskKind::kMcq4, "s", "What is 2+2?", {"3", "4", "5", "6"}, Answer::letter('B'));
}

Question ten_options() {
  std::vector<std::string> opts;
  for (int i = 0; i < 10; ++i) opts.push_back("choice " + std::to_string(i));
  return make_question("p", TaskKind::kMcq10, "law", "Pick one.", opts, Answer::letter('C'));
}

AgentAnalysis analysis(std::size_t idx, const std::string& name, const std::string& text,
                       AnalysisStatus status = AnalysisStatus::kOk) {
  AgentAnalysis a;
  a.agent = {idx, name};
  a.analysis_text = text;
  a.status = status;
  return a;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("format_question layout") {
  CHECK(format_question(two_plus_two()) == "Question: What is 2+2?\nOptions:\nA. 3\nB. 4\nC. 5\nD. 6");
  CHECK(format_question(testing::numeric()) == "Question: Sam has 8 boxes of 9 pens. How many pens?");
  const auto ten = format_question(ten_options());
  std::string expected = "Question: Pick one.\nOptions:";
  for (int i = 0; i < 10; ++i) expected += "\n" + std::string(1, static_cast<char>('A' + i)) + ". choice " + std::to_string(i);
  CHECK(ten == expected);
}

TEST_CASE("format_question is injective on option texts") {
  std::set<std::string> seen;
  const std::vector<std::string> pool = {"3", "4", "5", "6", "7"};
  std::vector<std::size_t> idx = {0, 1, 2, 3, 4};
  do {
    const auto q = make_question("t", TaskKind::kMcq4, "s", "What?", {pool[idx[0]], pool[idx[1]], pool[idx[2]], pool[idx[3]]},
                                 Answer::letter('A'));
    seen.insert(format_question(q));
  } while (std::next_permutation(idx.begin(), idx.end()));
  CHECK(seen.size() == 120);
}

TEST_CASE("decomposition prompt") {
  const auto q = two_plus_two();
  const auto p3 = build_decomposition_prompt(q, 3);
  CHECK(p3.role == PromptRole::kDispatch);
  CHECK(p3.text.find("exactly 3 numbered sub-questions") != std::string::npos);
  CHECK(p3.text.find("\"1.\" to \"3.\"") != std::string::npos);
  CHECK(p3.text.find(format_question(q)) != std::string::npos);
  CHECK(build_decomposition_prompt(q, 2).text.find("exactly 2 numbered") != std::string::npos);
  CHECK_THROWS_AS(build_decomposition_prompt(q, 0), Error);
  CHECK_THROWS_AS(build_decomposition_prompt(q, 6), Error);
}

TEST_CASE("parse_subquestions") {
  const auto q = two_plus_two();
  auto ok = parse_subquestions(q, "1. Define the key concept.\n2. Eliminate options.\n3. Check consistency.", 3);
  CHECK(ok.origin == SubQuestionOrigin::kDispatched);
  CHECK(ok.items == std::vector<std::string>{"Define the key concept.", "Eliminate options.", "Check consistency."});

  CHECK(parse_subquestions(q, "", 3).origin == SubQuestionOrigin::kFallback);
  CHECK(parse_subquestions(q, "1. only one line", 3).origin == SubQuestionOrigin::kFallback);
  // surrounding chatter is ignored, numbering must run in order
  CHECK(parse_subquestions(q, "Sure:\n1. a\r\n2. b\nThanks", 2).origin == SubQuestionOrigin::kDispatched);
  CHECK(parse_subquestions(q, "1. a\n3. b", 2).origin == SubQuestionOrigin::kFallback);
  CHECK(parse_subquestions(q, "1. a\n2.\n", 2).origin == SubQuestionOrigin::kFallback);
  CHECK(parse_subquestions(q, "1. a\n2. b\n3. c", 2).origin == SubQuestionOrigin::kFallback);
}

TEST_CASE("fallback_subquestions") {
  const auto q = two_plus_two();
  const auto three = fallback_subquestions(q, 3);
  CHECK(three.origin == SubQuestionOrigin::kFallback);
  REQUIRE(three.items.size() == 3);
  CHECK(three.items[0].find("concept") != std::string::npos);
  CHECK(three.items[1].find("Eliminate") != std::string::npos);
  CHECK(three.items[2].find("consistency") != std::string::npos);
  const auto one = fallback_subquestions(q, 1);
  CHECK(one.items == std::vector<std::string>{three.items[0]});
  try {
    fallback_subquestions(q, 4);
    FAIL("accepted 4 facets");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
  CHECK(fallback_subquestions(testing::numeric(), 3).items[1].find("step by step") != std::string::npos);
}

TEST_CASE("analysis prompt") {
  const auto mcq = build_analysis_prompt(two_plus_two(), "Check arithmetic.");
  CHECK(mcq.role == PromptRole::kAnalyze);
  CHECK(mcq.text.find("Check arithmetic.") != std::string::npos);
  CHECK(mcq.text.ends_with("\"Provisional answer: <letter>\" where <letter> is one of A/B/C/D."));
  const auto num = build_analysis_prompt(testing::numeric(), "Solve it.");
  CHECK(num.text.ends_with("\"Provisional answer: <number>\"."));
  CHECK_THROWS_AS(build_analysis_prompt(two_plus_two(), ""), Error);
  CHECK_THROWS_AS(build_analysis_prompt(two_plus_two(), "  \n"), Error);
}

TEST_CASE("merge prompt blocks") {
  const auto q = two_plus_two();
  std::vector<AgentAnalysis> all = {analysis(0, "O", "O says B"), analysis(1, "D", "D says B"),
                                    analysis(2, "X", "X says C")};
  const auto p = build_merge_prompt(q, all);
  CHECK(p.role == PromptRole::kMerge);
  CHECK(count(p.text, "[Agent ") == 3);
  const auto o = p.text.find("[Agent O | facet 1]");
  const auto d = p.text.find("[Agent D | facet 2]");
  const auto x = p.text.find("[Agent X | facet 3]");
  CHECK(o < d);
  CHECK(d < x);
  CHECK(p.text.find("Final answer: <letter>") != std::string::npos);

  std::vector<AgentAnalysis> partial = {analysis(0, "O", "secret-O", AnalysisStatus::kTimeout),
                                        analysis(1, "D", "D says B"),
                                        analysis(2, "X", "secret-X", AnalysisStatus::kTransportError)};
  const auto one = build_merge_prompt(q, partial);
  CHECK(count(one.text, "[Agent ") == 1);
  CHECK(one.text.find("[Agent D | facet 2]") != std::string::npos);
  CHECK(one.text.find("secret") == std::string::npos);

  CHECK(build_merge_prompt(q, all, identity_permutation(4)).text == p.text);

  for (auto& a : partial) a.status = AnalysisStatus::kMalformed;
  try {
    build_merge_prompt(q, partial);
    FAIL("merged without evidence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoEvidence);
  }
}

TEST_CASE("merge prompts never leak non-OK analyses") {
  const auto q = two_plus_two();
  const AnalysisStatus statuses[] = {AnalysisStatus::kOk, AnalysisStatus::kTimeout, AnalysisStatus::kTransportError,
                                     AnalysisStatus::kMalformed};
  for (int mask = 0; mask < 64; ++mask) {
    std::vector<AgentAnalysis> as;
    for (int i = 0; i < 3; ++i) {
      const auto st = statuses[(mask >> (2 * i)) & 3];
      as.push_back(analysis(i, std::string(1, "ODX"[i]), "payload-" + std::to_string(i) + "-" + std::string(status_name(st)), st));
    }
    const bool any_ok = std::any_of(as.begin(), as.end(), [](auto& a) { return a.status == AnalysisStatus::kOk; });
    if (!any_ok) {
      CHECK_THROWS_AS(build_merge_prompt(q, as), Error);
      continue;
    }
    const auto text = build_merge_prompt(q, as).text;
    for (const auto& a : as) CHECK((text.find(a.analysis_text) != std::string::npos) == (a.status == AnalysisStatus::kOk));
  }
}

TEST_CASE("parse_choice_letter examples") {
  CHECK(parse_choice_letter("Long reasoning...\nProvisional answer: C", 4, ParseMode::kAnalyst) == 'C');
  CHECK(parse_choice_letter("The answer is (B).", 4, ParseMode::kMerger) == 'B');
  CHECK_FALSE(parse_choice_letter("no letters here 123", 4, ParseMode::kMerger).has_value());
  CHECK_FALSE(parse_choice_letter("no letters here 123", 4, ParseMode::kAnalyst).has_value());
}

TEST_CASE("parse_choice_letter rules") {
  // last marker wins, case-insensitive
  CHECK(parse_choice_letter("Final answer: A\nFINAL ANSWER: D", 4, ParseMode::kMerger) == 'D');
  CHECK(parse_choice_letter("final answer: (C)", 4, ParseMode::kMerger) == 'C');
  // marker followed by an out-of-range letter falls back to the previous marker
  CHECK(parse_choice_letter("Final answer: B\nFinal answer: E", 4, ParseMode::kMerger) == 'B');
  // "Apple" is not a letter token
  CHECK(parse_choice_letter("Final answer: Apple", 4, ParseMode::kMerger) == std::nullopt);
  // P2 first vs last
  CHECK(parse_choice_letter("A is wrong; C is right", 4, ParseMode::kMerger) == 'A');
  CHECK(parse_choice_letter("A is wrong; C is right", 4, ParseMode::kAnalyst) == 'C');
  CHECK(parse_choice_letter("option J.", 10, ParseMode::kMerger) == 'J');
  CHECK(parse_choice_letter("option J.", 4, ParseMode::kMerger) == std::nullopt);
  CHECK_THROWS_AS(parse_choice_letter("A", 1, ParseMode::kMerger), Error);
  CHECK_THROWS_AS(parse_choice_letter("A", 11, ParseMode::kMerger), Error);
}

TEST_CASE("parse_choice_letter stays in range") {
  orchkit::bench::DeterministicRng rng(99);
  const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ ():.\nfinal answer provisional12";
  for (int t = 0; t < 3000; ++t) {
    std::string s;
    const auto len = rng.next_u64() % 60;
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.next_u64() % alphabet.size()];
    const std::size_t n = 2 + rng.next_u64() % 9;
    for (auto mode : {ParseMode::kMerger, ParseMode::kAnalyst}) {
      const auto got = parse_choice_letter(s, n, mode);
      if (got) REQUIRE((*got >= 'A' && *got < static_cast<char>('A' + n)));
    }
  }
}

TEST_CASE("parse_numeric_answer") {
  CHECK(parse_numeric_answer("so the total is\n#### 72")->value() == "72");
  CHECK(parse_numeric_answer("steps give 3.50 then 7.00. Final answer: 7.00")->value() == "7");
  CHECK_FALSE(parse_numeric_answer("no digits").has_value());
  CHECK(parse_numeric_answer("Provisional answer: $1,234.50")->value() == "1234.5");
  CHECK(parse_numeric_answer("we get 5, then 8, and -3")->value() == "-3");
  CHECK(parse_numeric_answer("Final answer: 12 apples, not 13")->value() == "12");
  CHECK(parse_numeric_answer("Final answer: 4\nfinal answer: 9")->value() == "9");
  // marker without a number after it: last number in the text
  CHECK(parse_numeric_answer("maybe 15 or 16. Final answer: unsure")->value() == "16");
}

TEST_CASE("parse_answer dispatches on kind") {
  CHECK(parse_answer(two_plus_two(), "Final answer: B", ParseMode::kMerger) == Answer::letter('B'));
  CHECK(parse_answer(testing::numeric(), "Final answer: 72.0", ParseMode::kMerger) == Answer::number("72"));
}

TEST_CASE("truncate_reply") {
  CHECK(truncate_reply("0123456789", 4096) == "0123456789");
  const std::string long_text(5000, 'x');
  CHECK(truncate_reply(long_text, 4096) == std::string(4096, 'x'));
  CHECK_THROWS_AS(truncate_reply("abc", 100), Error);
  // multi-byte scalars count once and are never split
  std::string utf;
  for (int i = 0; i < 300; ++i) utf += "\xC3\xA9";  // é
  const auto cut = truncate_reply(utf, 256);
  CHECK(cut.size() == 512);
}

TEST_CASE("permutations: relabel then inverse-map recovers every option") {
  const auto q = two_plus_two();
  Permutation perm = {0, 1, 2, 3};
  int seen = 0;
  do {
    ++seen;
    for (char original = 'A'; original <= 'D'; ++original) {
      const char shown = permute_letter(original, perm);
      CHECK(unpermute_letter(shown, perm) == original);
    }
    const auto text = format_question(q, perm);
    // option text shown under letter L is the original option unpermute(L)
    for (std::size_t i = 0; i < 4; ++i) {
      const char shown = static_cast<char>('A' + i);
      const auto& opt = q.options[unpermute_letter(shown, perm) - 'A'].text;
      CHECK(text.find(std::string(1, shown) + ". " + opt) != std::string::npos);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(seen == 24);
  CHECK_THROWS_AS(validate_permutation({0, 0, 1, 2}, 4), Error);
  CHECK_THROWS_AS(validate_permutation({0, 1, 2}, 4), Error);
}
