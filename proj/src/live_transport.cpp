// HTTP chat-completion transport.
#include <httplib.h>

#include <chrono>
#include <cstdlib>

#include <json.hpp>

#include "orchkit/agents.hpp"

namespace orchkit::agents {

namespace {

using Clock = std::chrono::steady_clock;

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::kConfig, "url without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) {
  return status == 408 || status == 429 || status == 500 || status == 502 || status == 503 || status == 504;
}

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

CompletionOutcome live_complete(const AgentProfile& profile, const protocol::PromptBundle& prompt,
                                const DecodingParams& params, std::int64_t deadline_ms, const SleepFn& sleep,
                                std::atomic<std::uint64_t>* network_calls) {
  CompletionOutcome out;
  const auto start = Clock::now();
  const auto deadline = static_cast<double>(deadline_ms);

  const char* key = std::getenv(profile.live.key_env.c_str());
  if (key == nullptr || *key == '\0') {
    out.status = CompletionStatus::kTransportError;
    out.error = "environment variable " + profile.live.key_env + " is not set";
    return out;
  }

  const auto url = split_url(profile.live.url);
  const nlohmann::json body = {
      {"model", profile.model_label},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt.text}}})},
      {"temperature", params.temperature},
  };
  const std::string payload = body.dump();
  const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};

  double backoff = profile.live.backoff_initial_ms;
  for (int attempt = 0; attempt <= profile.live.max_retries; ++attempt) {
    const double remaining = deadline - elapsed_ms(start);
    if (remaining <= 0.0) {
      out.status = CompletionStatus::kTimeout;
      out.error = "deadline exceeded";
      break;
    }

    httplib::Client client(url.origin);
    const auto budget = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double, std::milli>(remaining));
    client.set_connection_timeout(budget);
    client.set_read_timeout(budget);
    client.set_write_timeout(budget);

    ++out.attempts;
    if (network_calls) ++*network_calls;
    auto res = client.Post(url.path, headers, payload, "application/json");

    if (elapsed_ms(start) >= deadline) {
      out.status = CompletionStatus::kTimeout;
      out.error = "deadline exceeded";
      break;
    }

    bool transient = false;
    if (!res) {
      transient = true;
      out.error = "transport: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      try {
        const auto j = nlohmann::json::parse(res->body);
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        ProviderMeta meta;
        meta.model_version = j.value("model", "");
        if (j.contains("usage") && j["usage"].is_object()) {
          const auto& u = j["usage"];
          meta.usage = TokenUsage{u.value("prompt_tokens", std::uint64_t{0}),
                                  u.value("completion_tokens", std::uint64_t{0}),
                                  u.value("total_tokens", std::uint64_t{0})};
        }
        out.provider_meta = std::move(meta);
        out.status = CompletionStatus::kOk;
        out.cost_units = profile.per_call_cost;
        out.error.clear();
      } catch (const nlohmann::json::exception& e) {
        out.status = CompletionStatus::kTransportError;
        out.error = std::string("unreadable provider reply: ") + e.what();
      }
      break;
    } else {
      transient = retryable_status(res->status);
      out.error = "HTTP " + std::to_string(res->status);
    }

    out.status = CompletionStatus::kTransportError;
    if (!transient || attempt == profile.live.max_retries) break;
    if (elapsed_ms(start) + backoff >= deadline) break;
    sleep(backoff);
    backoff *= 2.0;
  }
  out.latency_ms = elapsed_ms(start);
  return out;
}

}  // namespace orchkit::agents
