#include "orchkit/config.hpp"

#include <fstream>
#include <set>

#include "orchkit/digest.hpp"

namespace orchkit::cli {

using nlohmann::json;

namespace {

Error config_error(const std::string& where, const std::string& why) {
  return Error(ErrorCode::kConfig, where + ": " + why);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw config_error(where, "must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) throw config_error(where, "unknown field '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw config_error(where + "." + key, "has the wrong type");
  }
}

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw config_error(where, "missing field '" + std::string(key) + "'");
  return get_or<T>(j, key, T{}, where);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

agents::SyntheticAgentSpec parse_synthetic(const json& j, const std::string& where) {
  only_keys(j, where, {"accuracy_by_subject", "default_accuracy", "base_latency_ms", "jitter_ms", "failure_rate",
                       "rng_seed"});
  agents::SyntheticAgentSpec s;
  s.accuracy_by_subject = get_or<std::map<std::string, double>>(j, "accuracy_by_subject", {}, where);
  s.default_accuracy = get_or<double>(j, "default_accuracy", s.default_accuracy, where);
  s.base_latency_ms = get_or<double>(j, "base_latency_ms", 0.0, where);
  s.jitter_ms = get_or<double>(j, "jitter_ms", 0.0, where);
  s.failure_rate = get_or<double>(j, "failure_rate", 0.0, where);
  s.rng_seed = get_or<std::uint64_t>(j, "rng_seed", 0, where);
  return s;
}

agents::AgentProfile parse_profile(const json& j, std::size_t index) {
  const std::string where = "roster[" + std::to_string(index) + "]";
  only_keys(j, where, {"name", "model_label", "transport", "per_call_cost", "url", "key_env", "max_retries",
                       "backoff_initial_ms", "synthetic"});
  agents::AgentProfile p;
  p.id = {index, require<std::string>(j, "name", where)};
  p.model_label = require<std::string>(j, "model_label", where);
  p.transport = agents::parse_transport(require<std::string>(j, "transport", where));
  p.per_call_cost = get_or<double>(j, "per_call_cost", 0.0, where);
  p.live.url = get_or<std::string>(j, "url", "", where);
  p.live.key_env = get_or<std::string>(j, "key_env", "", where);
  p.live.max_retries = get_or<int>(j, "max_retries", p.live.max_retries, where);
  p.live.backoff_initial_ms = get_or<double>(j, "backoff_initial_ms", p.live.backoff_initial_ms, where);
  if (p.transport == agents::TransportKind::kSynthetic) {
    if (!j.contains("synthetic")) throw config_error(where, "synthetic transport needs a 'synthetic' block");
    p.synthetic = parse_synthetic(j["synthetic"], where + ".synthetic");
  } else if (j.contains("synthetic")) {
    throw config_error(where, "'synthetic' block given for a non-synthetic transport");
  }
  if (p.transport == agents::TransportKind::kLive && p.live.key_env.empty()) {
    throw config_error(where, "live transport requires key_env");
  }
  agents::validate_profile(p);
  return p;
}

orchestrator::RoleSelect parse_select(const json& j, const char* key, const std::string& where) {
  const auto v = get_or<std::string>(j, key, "", where);
  if (v == "ema") return {orchestrator::SelectMode::kEma, ""};
  return {orchestrator::SelectMode::kFixed, v};
}

json select_json(const orchestrator::RoleSelect& s) {
  return s.mode == orchestrator::SelectMode::kEma ? json("ema") : json(s.agent);
}

}  // namespace

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  only_keys(j, "config", {"config_version", "benchmark", "dataset", "manifest", "method", "seed", "roster",
                          "pipeline", "router", "cache", "ledger"});
  const int version = require<int>(j, "config_version", "config");
  if (version != kConfigVersion) {
    throw config_error("config.config_version", "unsupported version " + std::to_string(version));
  }

  RunConfig cfg;
  cfg.benchmark = bench::parse_benchmark(get_or<std::string>(j, "benchmark", "mmlu", "config"));
  cfg.dataset = resolve(base_dir, get_or<std::string>(j, "dataset", "", "config"));
  cfg.manifest = resolve(base_dir, get_or<std::string>(j, "manifest", "", "config"));
  cfg.method = parse_method(get_or<std::string>(j, "method", "ORCH", "config"));
  cfg.seed = get_or<std::uint64_t>(j, "seed", 42, "config");
  cfg.ledger = resolve(base_dir, get_or<std::string>(j, "ledger", "", "config"));

  if (!j.contains("roster") || !j["roster"].is_array() || j["roster"].empty()) {
    throw config_error("config", "roster must be a non-empty array");
  }
  for (std::size_t i = 0; i < j["roster"].size(); ++i) cfg.pipeline.roster.push_back(parse_profile(j["roster"][i], i));

  const json pipe = j.value("pipeline", json::object());
  only_keys(pipe, "pipeline", {"dispatcher", "merger", "n_facets", "fallback_agent", "sc_K", "shuffle_m",
                               "sc_temperature", "deadline_ms", "vote_tie_priority", "max_reply_chars", "top_k"});
  auto& p = cfg.pipeline;
  p.dispatcher_select = parse_select(pipe, "dispatcher", "pipeline");
  p.merger_select = parse_select(pipe, "merger", "pipeline");
  p.n_facets = get_or<std::size_t>(pipe, "n_facets", 0, "pipeline");
  p.fallback_agent = get_or<std::string>(pipe, "fallback_agent", "", "pipeline");
  p.sc_k = get_or<int>(pipe, "sc_K", 1, "pipeline");
  p.shuffle_m = get_or<int>(pipe, "shuffle_m", 0, "pipeline");
  p.sc_temperature = get_or<double>(pipe, "sc_temperature", 0.7, "pipeline");
  p.deadline_ms = get_or<std::int64_t>(pipe, "deadline_ms", agents::kDefaultDeadlineMs, "pipeline");
  p.vote_tie_priority = get_or<std::vector<std::string>>(pipe, "vote_tie_priority", {}, "pipeline");
  p.max_reply_chars = get_or<std::size_t>(pipe, "max_reply_chars", protocol::kDefaultReplyCharLimit, "pipeline");
  p.seed = cfg.seed;
  cfg.top_k = get_or<std::size_t>(pipe, "top_k", 0, "pipeline");
  orchestrator::validate_pipeline(p);
  if (cfg.top_k > p.roster.size()) throw config_error("pipeline.top_k", "exceeds roster size");

  const json rt = j.value("router", json::object());
  only_keys(rt, "router", {"alpha", "w_quality", "w_latency", "w_cost", "w_stability", "latency_ref", "cost_ref",
                           "quality_attribution"});
  auto& w = cfg.weights;
  w.alpha = get_or<double>(rt, "alpha", w.alpha, "router");
  w.w_quality = get_or<double>(rt, "w_quality", w.w_quality, "router");
  w.w_latency = get_or<double>(rt, "w_latency", w.w_latency, "router");
  w.w_cost = get_or<double>(rt, "w_cost", w.w_cost, "router");
  w.w_stability = get_or<double>(rt, "w_stability", w.w_stability, "router");
  w.latency_ref = get_or<double>(rt, "latency_ref", w.latency_ref, "router");
  w.cost_ref = get_or<double>(rt, "cost_ref", w.cost_ref, "router");
  const auto attribution = get_or<std::string>(rt, "quality_attribution", "run", "router");
  if (attribution == "run") {
    cfg.attribution = router::QualityAttribution::kRun;
  } else if (attribution == "per_agent") {
    cfg.attribution = router::QualityAttribution::kPerAgent;
  } else {
    throw config_error("router.quality_attribution", "must be 'run' or 'per_agent'");
  }
  router::validate_weights(w);

  const json cache = j.value("cache", json::object());
  only_keys(cache, "cache", {"path", "mode"});
  cfg.cache_path = resolve(base_dir, get_or<std::string>(cache, "path", "", "cache"));
  cfg.cache_mode = agents::parse_cache_mode(get_or<std::string>(cache, "mode", "off", "cache"));
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

json config_fingerprint(const RunConfig& cfg) {
  json roster = json::array();
  for (const auto& p : cfg.pipeline.roster) {
    json entry = {{"name", p.id.name},
                  {"model_label", p.model_label},
                  {"transport", agents::transport_name(p.transport)},
                  {"per_call_cost", p.per_call_cost}};
    if (p.transport == agents::TransportKind::kLive) {
      entry["url"] = p.live.url;
      entry["max_retries"] = p.live.max_retries;
    }
    if (p.transport == agents::TransportKind::kSynthetic) {
      const auto& s = p.synthetic;
      entry["synthetic"] = {{"accuracy_by_subject", s.accuracy_by_subject},
                            {"default_accuracy", s.default_accuracy},
                            {"base_latency_ms", s.base_latency_ms},
                            {"jitter_ms", s.jitter_ms},
                            {"failure_rate", s.failure_rate},
                            {"rng_seed", s.rng_seed}};
    }
    roster.push_back(std::move(entry));
  }
  const auto& p = cfg.pipeline;
  const auto& w = cfg.weights;
  return {{"config_version", kConfigVersion},
          {"benchmark", bench::benchmark_name(cfg.benchmark)},
          {"method", method_label(cfg.method)},
          {"seed", cfg.seed},
          {"roster", std::move(roster)},
          {"pipeline",
           {{"dispatcher", select_json(p.dispatcher_select)},
            {"merger", select_json(p.merger_select)},
            {"n_facets", p.n_facets},
            {"fallback_agent", p.fallback_agent},
            {"sc_K", p.sc_k},
            {"shuffle_m", p.shuffle_m},
            {"sc_temperature", p.sc_temperature},
            {"deadline_ms", p.deadline_ms},
            {"vote_tie_priority", p.vote_tie_priority},
            {"max_reply_chars", p.max_reply_chars},
            {"top_k", cfg.top_k}}},
          {"router",
           {{"alpha", w.alpha},
            {"w_quality", w.w_quality},
            {"w_latency", w.w_latency},
            {"w_cost", w.w_cost},
            {"w_stability", w.w_stability},
            {"latency_ref", w.latency_ref},
            {"cost_ref", w.cost_ref},
            {"quality_attribution", cfg.attribution == router::QualityAttribution::kRun ? "run" : "per_agent"}}},
          {"cache_mode", agents::cache_mode_name(cfg.cache_mode)}};
}

std::string config_digest(const RunConfig& cfg) { return sha256_hex(config_fingerprint(cfg).dump()); }

std::vector<AgentId> roster_ids(const RunConfig& cfg) {
  std::vector<AgentId> ids;
  for (const auto& p : cfg.pipeline.roster) ids.push_back(p.id);
  return ids;
}

}  // namespace orchkit::cli
