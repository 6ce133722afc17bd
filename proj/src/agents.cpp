#include "orchkit/agents.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <regex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "orchkit/digest.hpp"
#include "orchkit/rng.hpp"

namespace orchkit::agents {

using protocol::PromptBundle;
using protocol::PromptRole;

std::string_view completion_status_name(CompletionStatus status) {
  switch (status) {
    case CompletionStatus::kOk: return "OK";
    case CompletionStatus::kTimeout: return "TIMEOUT";
    case CompletionStatus::kTransportError: return "TRANSPORT_ERROR";
  }
  return "?";
}

AnalysisStatus to_analysis_status(CompletionStatus status) {
  switch (status) {
    case CompletionStatus::kOk: return AnalysisStatus::kOk;
    case CompletionStatus::kTimeout: return AnalysisStatus::kTimeout;
    case CompletionStatus::kTransportError: return AnalysisStatus::kTransportError;
  }
  return AnalysisStatus::kTransportError;
}

std::string_view transport_name(TransportKind kind) {
  switch (kind) {
    case TransportKind::kLive: return "live";
    case TransportKind::kSynthetic: return "synthetic";
    case TransportKind::kCacheOnly: return "cache_only";
  }
  return "?";
}

TransportKind parse_transport(std::string_view name) {
  if (name == "live") return TransportKind::kLive;
  if (name == "synthetic") return TransportKind::kSynthetic;
  if (name == "cache_only") return TransportKind::kCacheOnly;
  throw Error(ErrorCode::kConfig, "unknown transport '" + std::string(name) + "'");
}

double SyntheticAgentSpec::accuracy_for(const std::string& subject) const {
  auto it = accuracy_by_subject.find(subject);
  return it == accuracy_by_subject.end() ? default_accuracy : it->second;
}

void validate_synthetic_spec(const SyntheticAgentSpec& spec) {
  auto prob = [](double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::kConfig, what + " must be in [0, 1]");
  };
  for (const auto& [subject, p] : spec.accuracy_by_subject) prob(p, "accuracy for '" + subject + "'");
  prob(spec.default_accuracy, "default_accuracy");
  prob(spec.failure_rate, "failure_rate");
  if (!(spec.base_latency_ms >= 0.0) || !(spec.jitter_ms >= 0.0)) {
    throw Error(ErrorCode::kConfig, "synthetic latencies must be non-negative");
  }
}

void validate_profile(const AgentProfile& profile) {
  if (profile.id.name.empty()) throw Error(ErrorCode::kConfig, "agent name must be non-empty");
  if (profile.model_label.empty()) {
    throw Error(ErrorCode::kConfig, "agent " + profile.id.name + ": model_label must be non-empty");
  }
  if (!(profile.per_call_cost >= 0.0)) {
    throw Error(ErrorCode::kConfig, "agent " + profile.id.name + ": per_call_cost must be >= 0");
  }
  switch (profile.transport) {
    case TransportKind::kLive:
      if (profile.live.url.empty() || profile.live.key_env.empty()) {
        throw Error(ErrorCode::kConfig, "agent " + profile.id.name + ": live transport needs url and key_env");
      }
      if (profile.live.max_retries < 0) throw Error(ErrorCode::kConfig, "max_retries must be >= 0");
      break;
    case TransportKind::kSynthetic: validate_synthetic_spec(profile.synthetic); break;
    case TransportKind::kCacheOnly: break;
  }
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return bench::DeterministicRng(h ^ v).next_u64(); }

char wrong_letter(char gold, std::size_t n_options) {
  return static_cast<char>('A' + (static_cast<std::size_t>(gold - 'A') + 1) % n_options);
}

// Non-negative decimal digit strings without leading zeros (except "0").
std::string strip_zeros(std::string d) {
  d.erase(0, std::min(d.find_first_not_of('0'), d.size() - 1));
  return d;
}

int compare_digits(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  return a.compare(b) < 0 ? -1 : (a == b ? 0 : 1);
}

std::string add_digits(const std::string& a, const std::string& b) {
  std::string out;
  int carry = 0;
  for (std::size_t i = 0; i < std::max(a.size(), b.size()) || carry; ++i) {
    int d = carry;
    if (i < a.size()) d += a[a.size() - 1 - i] - '0';
    if (i < b.size()) d += b[b.size() - 1 - i] - '0';
    out.push_back(static_cast<char>('0' + d % 10));
    carry = d / 10;
  }
  std::reverse(out.begin(), out.end());
  return strip_zeros(out);
}

std::string sub_digits(const std::string& a, const std::string& b) {  // a >= b
  std::string out;
  int borrow = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    int d = (a[a.size() - 1 - i] - '0') - borrow - (i < b.size() ? b[b.size() - 1 - i] - '0' : 0);
    borrow = d < 0;
    out.push_back(static_cast<char>('0' + (d + 10) % 10));
  }
  std::reverse(out.begin(), out.end());
  return strip_zeros(out);
}

// Exact gold + 1 on a canonical decimal string.
std::string wrong_number(const std::string& gold) {
  const bool negative = gold.starts_with('-');
  std::string magnitude = negative ? gold.substr(1) : gold;
  const auto dot = magnitude.find('.');
  const std::size_t scale = dot == std::string::npos ? 0 : magnitude.size() - dot - 1;
  if (dot != std::string::npos) magnitude.erase(dot, 1);
  magnitude = strip_zeros(magnitude);
  const std::string one = "1" + std::string(scale, '0');

  std::string digits;
  bool result_negative = false;
  if (!negative) {
    digits = add_digits(magnitude, one);
  } else if (compare_digits(magnitude, one) <= 0) {
    digits = sub_digits(one, magnitude);
  } else {
    digits = sub_digits(magnitude, one);
    result_negative = true;
  }
  if (digits.size() <= scale) digits.insert(0, scale + 1 - digits.size(), '0');
  if (scale > 0) digits.insert(digits.size() - scale, ".");
  return canonicalize_number((result_negative ? "-" : "") + digits);
}

std::string provisional_line(const std::string& value) { return "Provisional answer: " + value; }

std::string synthetic_dispatch(const PromptBundle& prompt) {
  static const std::regex re(R"(exactly (\d+) numbered)");
  std::smatch m;
  std::size_t n = 3;
  if (std::regex_search(prompt.text, m, re)) n = std::stoul(m[1].str());
  std::string out;
  for (std::size_t i = 1; i <= n; ++i) {
    out += std::to_string(i) + ". Examine perspective " + std::to_string(i) + " of the question.\n";
  }
  return out;
}

// Option label -> text as shown in the prompt's Options block.
std::vector<std::pair<char, std::string>> shown_options(const std::string& text) {
  std::vector<std::pair<char, std::string>> out;
  auto pos = text.find("\nOptions:\n");
  if (pos == std::string::npos) return out;
  std::istringstream in(text.substr(pos + 10));
  std::string line;
  while (std::getline(in, line) && line.size() >= 3 && line[1] == '.' && line[2] == ' ') {
    out.emplace_back(line[0], line.substr(3));
  }
  return out;
}

std::string synthetic_merge(const Question& q, const PromptBundle& prompt) {
  // Blocks run from an "[Agent " header to the next header or the closing instruction.
  std::vector<std::string> blocks;
  const std::string& text = prompt.text;
  const std::string header = "\n[Agent ";
  const auto tail = text.find("\nRead all evidence");
  for (auto pos = text.find(header); pos != std::string::npos && pos < tail;) {
    auto next = text.find(header, pos + 1);
    auto end = std::min(next, tail);
    blocks.push_back(text.substr(pos + 1, end - pos - 1));
    pos = next;
  }

  std::vector<Answer> votes;
  for (const auto& block : blocks) {
    auto body = block.substr(std::min(block.find('\n'), block.size()));
    if (auto a = protocol::parse_answer(q, body, protocol::ParseMode::kAnalyst)) votes.push_back(*a);
  }
  if (votes.empty()) return "No conclusion reached.";

  // Majority; ties resolved by first appearance.
  const Answer* best = nullptr;
  long best_count = 0;
  for (const auto& v : votes) {
    const long count = std::count(votes.begin(), votes.end(), v);
    if (count > best_count) {
      best = &v;
      best_count = count;
    }
  }
  if (q.kind == TaskKind::kOpenNumeric) return "After comparing the analyses.\nFinal answer: " + best->value();

  // Analysts answer in the original lettering; restate in the lettering shown here.
  const std::string& original_text = q.options[static_cast<std::size_t>(best->as_letter() - 'A')].text;
  char shown = best->as_letter();
  for (const auto& [label, option_text] : shown_options(text)) {
    if (option_text == original_text) {
      shown = label;
      break;
    }
  }
  return std::string("After comparing the analyses.\nFinal answer: ") + shown;
}

}  // namespace

CompletionOutcome synthetic_complete(const SyntheticAgentSpec& spec, const Question& q, const PromptBundle& prompt,
                                     const DecodingParams& params) {
  std::uint64_t h = mix(spec.rng_seed, bench::fnv1a64(q.item_id));
  h = mix(h, static_cast<std::uint64_t>(prompt.role) + 1);
  h = mix(h, params.sample_tag);
  bench::DeterministicRng draws(h);
  const double u_fail = draws.next_unit();
  const double u_correct = draws.next_unit();
  const double u_latency = draws.next_unit();

  CompletionOutcome out;
  out.attempts = 1;
  out.latency_ms = spec.base_latency_ms + spec.jitter_ms * u_latency;
  if (u_fail < spec.failure_rate) {
    out.status = CompletionStatus::kTransportError;
    out.error = "synthetic failure";
    return out;
  }

  std::string reply;
  switch (prompt.role) {
    case PromptRole::kDispatch: reply = synthetic_dispatch(prompt); break;
    case PromptRole::kMerge: reply = synthetic_merge(q, prompt); break;
    case PromptRole::kAnalyze:
    case PromptRole::kDirectAnswer: {
      const bool right = u_correct < spec.accuracy_for(q.subject);
      std::string value;
      if (q.kind == TaskKind::kOpenNumeric) {
        value = right ? q.gold.value() : wrong_number(q.gold.value());
      } else {
        value = std::string(1, right ? q.gold.as_letter() : wrong_letter(q.gold.as_letter(), q.options.size()));
      }
      reply = "Synthetic analysis of item " + q.item_id + ".\n" + provisional_line(value);
      break;
    }
  }
  out.status = CompletionStatus::kOk;
  out.text = std::move(reply);
  return out;
}

std::string cache_key(const AgentProfile& profile, const PromptBundle& prompt, const DecodingParams& params) {
  const nlohmann::json fields = {profile.model_label, prompt.text, params.temperature, params.sample_tag,
                                 protocol::role_name(prompt.role)};
  return sha256_hex(fields.dump());
}

namespace {

std::string utc_now_iso() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Invoker::Invoker(ResponseCache* cache, SleepFn sleep) : cache_(cache), sleep_(std::move(sleep)) {
  if (!sleep_) {
    sleep_ = [](double ms) {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
    };
  }
}

CompletionOutcome Invoker::invoke(const AgentProfile& profile, const Question& q, const PromptBundle& prompt,
                                  const DecodingParams& params, std::int64_t deadline_ms) const {
  CompletionOutcome out;
  try {
    if (deadline_ms <= 0) throw Error(ErrorCode::kPrecondition, "deadline_ms must be positive");

    if (profile.transport == TransportKind::kSynthetic) {
      out = synthetic_complete(profile.synthetic, q, prompt, params);
      if (out.latency_ms > static_cast<double>(deadline_ms)) {
        out.status = CompletionStatus::kTimeout;
        out.text.reset();
        out.error = "deadline exceeded";
        out.latency_ms = static_cast<double>(deadline_ms);
      }
      if (out.status == CompletionStatus::kOk) out.cost_units = profile.per_call_cost;
      return out;
    }

    const bool use_cache = cache_ && cache_->mode() != CacheMode::kOff;
    const std::string key = use_cache ? cache_key(profile, prompt, params) : std::string();
    if (use_cache) {
      if (auto hit = cache_->lookup(key)) {
        out.status = CompletionStatus::kOk;
        out.text = hit->text;
        out.cache_hit = true;
        if (hit->token_usage) out.provider_meta = ProviderMeta{"", hit->token_usage};
        return out;
      }
    }
    if (profile.transport == TransportKind::kCacheOnly) {
      out.status = CompletionStatus::kTransportError;
      out.error = "cache miss";
      return out;
    }

    out = live_complete(profile, prompt, params, deadline_ms, sleep_, &network_calls_);
    if (out.status == CompletionStatus::kOk && use_cache) {
      std::optional<TokenUsage> usage;
      if (out.provider_meta) usage = out.provider_meta->usage;
      cache_->store({key, profile.model_label, std::string(protocol::role_name(prompt.role)), *out.text, usage,
                     utc_now_iso()});
    }
    return out;
  } catch (const std::exception& e) {
    CompletionOutcome failed;
    failed.status = CompletionStatus::kTransportError;
    failed.error = e.what();
    failed.latency_ms = out.latency_ms;
    return failed;
  }
}

std::vector<CompletionOutcome> Invoker::fan_out(const Question& q, const std::vector<AgentRequest>& requests,
                                                std::int64_t deadline_ms) const {
  if (requests.empty()) throw Error(ErrorCode::kPrecondition, "fan_out needs at least one request");
  auto call = [&](const AgentRequest& r) {
    if (r.profile == nullptr) {
      CompletionOutcome bad;
      bad.error = "request without profile";
      return bad;
    }
    return invoke(*r.profile, q, r.prompt, r.params, deadline_ms);
  };
  if (requests.size() == 1) return {call(requests.front())};

  std::vector<std::future<CompletionOutcome>> pending;
  pending.reserve(requests.size());
  for (const auto& r : requests) pending.push_back(std::async(std::launch::async, call, std::cref(r)));
  std::vector<CompletionOutcome> results;
  results.reserve(requests.size());
  for (auto& f : pending) results.push_back(f.get());
  return results;
}

}  // namespace orchkit::agents
