#include <fstream>

#include <json.hpp>

#include "orchkit/agents.hpp"

namespace orchkit::agents {

using nlohmann::json;

std::string_view cache_mode_name(CacheMode mode) {
  switch (mode) {
    case CacheMode::kReadWrite: return "read_write";
    case CacheMode::kReadOnly: return "read_only";
    case CacheMode::kOff: return "off";
  }
  return "?";
}

CacheMode parse_cache_mode(std::string_view name) {
  if (name == "read_write") return CacheMode::kReadWrite;
  if (name == "read_only") return CacheMode::kReadOnly;
  if (name == "off") return CacheMode::kOff;
  throw Error(ErrorCode::kConfig, "unknown cache mode '" + std::string(name) + "'");
}

ResponseCache::ResponseCache(std::filesystem::path path, CacheMode mode) : path_(std::move(path)), mode_(mode) {
  if (mode_ == CacheMode::kOff || path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  if (!in) throw Error(ErrorCode::kIo, "cannot read cache " + path_.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      CacheEntry e;
      e.key = j.at("key").get<std::string>();
      e.model_label = j.at("model_label").get<std::string>();
      e.role_hint = j.at("role_hint").get<std::string>();
      e.text = j.at("text").get<std::string>();
      e.created_at = j.value("created_at", "");
      if (j.contains("token_usage") && !j["token_usage"].is_null()) {
        const auto& u = j["token_usage"];
        e.token_usage = TokenUsage{u.at("prompt").get<std::uint64_t>(), u.at("completion").get<std::uint64_t>(),
                                   u.at("total").get<std::uint64_t>()};
      }
      entries_[e.key] = std::move(e);
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kSchemaViolation,
                  path_.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
}

std::optional<CacheEntry> ResponseCache::lookup(const std::string& key) const {
  if (mode_ == CacheMode::kOff) return std::nullopt;
  std::shared_lock lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::store(CacheEntry entry) {
  if (mode_ != CacheMode::kReadWrite) return;
  json j = {{"key", entry.key},
            {"model_label", entry.model_label},
            {"role_hint", entry.role_hint},
            {"text", entry.text},
            {"created_at", entry.created_at},
            {"token_usage", nullptr}};
  if (entry.token_usage) {
    j["token_usage"] = {{"prompt", entry.token_usage->prompt},
                        {"completion", entry.token_usage->completion},
                        {"total", entry.token_usage->total}};
  }
  std::unique_lock lock(mu_);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(ErrorCode::kIo, "cannot append to cache " + path_.string());
    out << j.dump() << '\n';
  }
  entries_[entry.key] = std::move(entry);
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

}  // namespace orchkit::agents
