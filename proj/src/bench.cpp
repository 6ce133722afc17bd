#include "orchkit/bench.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "orchkit/digest.hpp"

namespace orchkit::bench {

using nlohmann::json;

std::string_view benchmark_name(Benchmark b) {
  switch (b) {
    case Benchmark::kMmlu: return "mmlu";
    case Benchmark::kMmluPro: return "mmlu_pro";
    case Benchmark::kGsm8k: return "gsm8k";
  }
  return "?";
}

Benchmark parse_benchmark(std::string_view name) {
  if (name == "mmlu") return Benchmark::kMmlu;
  if (name == "mmlu_pro") return Benchmark::kMmluPro;
  if (name == "gsm8k") return Benchmark::kGsm8k;
  throw Error(ErrorCode::kValidation, "unknown benchmark '" + std::string(name) + "'");
}

const DatasetRecord& Dataset::by_item_id(const std::string& item_id) const {
  for (const auto& r : records) {
    if (r.item_id == item_id) return r;
  }
  throw Error(ErrorCode::kManifestMismatch, "item '" + item_id + "' is not in the dataset");
}

namespace {

Error schema_error(std::string_view source, std::size_t line, std::string_view field, const std::string& why) {
  return Error(ErrorCode::kSchemaViolation,
               std::string(source) + ":" + std::to_string(line) + ": field '" + std::string(field) + "': " + why);
}

std::string required_string(const json& j, std::string_view field, std::string_view source, std::size_t line,
                            bool allow_empty = false) {
  auto it = j.find(field);
  if (it == j.end()) throw schema_error(source, line, field, "missing");
  if (!it->is_string()) throw schema_error(source, line, field, "must be a string");
  auto s = it->get<std::string>();
  if (!allow_empty && s.empty()) throw schema_error(source, line, field, "must be non-empty");
  return s;
}

std::pair<std::size_t, std::size_t> option_bounds(Benchmark b) {
  switch (b) {
    case Benchmark::kMmlu: return {4, 4};
    case Benchmark::kMmluPro: return {2, 10};
    case Benchmark::kGsm8k: return {0, 0};
  }
  return {0, 0};
}

}  // namespace

Dataset parse_dataset(std::string_view contents, Benchmark benchmark, std::string_view source_name) {
  static const std::set<std::string> kFields = {"item_id", "benchmark", "subject", "stem", "options", "gold"};
  Dataset ds;
  ds.benchmark = benchmark;
  ds.digest = sha256_hex(contents);
  std::unordered_set<std::string> seen;
  const auto [min_options, max_options] = option_bounds(benchmark);

  std::istringstream in{std::string(contents)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw schema_error(source_name, line_no, "<record>", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw schema_error(source_name, line_no, "<record>", "must be an object");
    for (const auto& [key, value] : j.items()) {
      if (!kFields.count(key)) throw schema_error(source_name, line_no, key, "unknown field");
    }

    DatasetRecord r;
    r.source_index = ds.records.size();
    r.item_id = required_string(j, "item_id", source_name, line_no);
    if (required_string(j, "benchmark", source_name, line_no) != benchmark_name(benchmark)) {
      throw schema_error(source_name, line_no, "benchmark", "expected '" + std::string(benchmark_name(benchmark)) + "'");
    }
    r.subject = required_string(j, "subject", source_name, line_no);
    r.stem = required_string(j, "stem", source_name, line_no);
    r.gold = required_string(j, "gold", source_name, line_no);

    auto opts = j.find("options");
    if (benchmark == Benchmark::kGsm8k) {
      if (opts != j.end() && !(opts->is_array() && opts->empty())) {
        throw schema_error(source_name, line_no, "options", "must be absent for gsm8k");
      }
      try {
        r.gold = canonicalize_number(r.gold);
      } catch (const Error&) {
        throw schema_error(source_name, line_no, "gold", "not a number");
      }
    } else {
      if (opts == j.end() || !opts->is_array()) throw schema_error(source_name, line_no, "options", "missing");
      for (const auto& o : *opts) {
        if (!o.is_string()) throw schema_error(source_name, line_no, "options", "entries must be strings");
        r.options.push_back(o.get<std::string>());
      }
      if (r.options.size() < min_options || r.options.size() > max_options) {
        throw schema_error(source_name, line_no, "options",
                           std::to_string(r.options.size()) + " options outside [" + std::to_string(min_options) +
                               ", " + std::to_string(max_options) + "]");
      }
      if (r.gold.size() != 1 || r.gold[0] < 'A' || r.gold[0] >= static_cast<char>('A' + r.options.size())) {
        throw schema_error(source_name, line_no, "gold", "'" + r.gold + "' is not a valid option letter");
      }
    }
    if (!seen.insert(r.item_id).second) {
      throw schema_error(source_name, line_no, "item_id", "duplicate '" + r.item_id + "'");
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, Benchmark benchmark) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), benchmark, path.string());
}

Question to_question(const DatasetRecord& record, Benchmark benchmark) {
  switch (benchmark) {
    case Benchmark::kMmlu:
      return make_question(record.item_id, TaskKind::kMcq4, record.subject, record.stem, record.options,
                           Answer::letter(record.gold[0]));
    case Benchmark::kMmluPro:
      if (record.options.size() != 10) {
        throw Error(ErrorCode::kValidation, record.item_id + " has " + std::to_string(record.options.size()) +
                                                " options; only 10-option items are eligible");
      }
      return make_question(record.item_id, TaskKind::kMcq10, record.subject, record.stem, record.options,
                           Answer::letter(record.gold[0]));
    case Benchmark::kGsm8k:
      return make_question(record.item_id, TaskKind::kOpenNumeric, record.subject, record.stem, {},
                           Answer::number(record.gold));
  }
  throw Error(ErrorCode::kValidation, "unknown benchmark");
}

json manifest_to_json(const Manifest& m) {
  json items = json::array();
  for (const auto& it : m.items) {
    items.push_back({{"item_id", it.item_id}, {"source_index", it.source_index},
                     {"subject_or_bucket", it.subject_or_bucket}});
  }
  json j = {{"spec_version", kManifestVersion},
            {"benchmark", benchmark_name(m.benchmark)},
            {"seed", m.seed},
            {"protocol_params", m.protocol_params},
            {"dataset_digest", m.dataset_digest},
            {"items", std::move(items)}};
  if (!m.created_digest.empty()) j["created_digest"] = m.created_digest;
  return j;
}

std::string manifest_digest(const Manifest& m) {
  json j = manifest_to_json(m);
  j.erase("created_digest");
  return sha256_hex(j.dump());
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  try {
    if (j.at("spec_version").get<std::string>() != kManifestVersion) {
      throw Error(ErrorCode::kSchemaViolation, "unsupported manifest version");
    }
    m.benchmark = parse_benchmark(j.at("benchmark").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.protocol_params = j.at("protocol_params");
    m.dataset_digest = j.at("dataset_digest").get<std::string>();
    for (const auto& it : j.at("items")) {
      m.items.push_back({it.at("item_id").get<std::string>(), it.at("source_index").get<std::size_t>(),
                         it.at("subject_or_bucket").get<std::string>()});
    }
    m.created_digest = j.at("created_digest").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("manifest: ") + e.what());
  }
  if (manifest_digest(m) != m.created_digest) {
    throw Error(ErrorCode::kSchemaViolation, "manifest digest does not match its contents");
  }
  return m;
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchemaViolation, path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

std::vector<Question> resolve_manifest(const Manifest& m, const Dataset& dataset) {
  if (m.benchmark != dataset.benchmark) {
    throw Error(ErrorCode::kManifestMismatch, "manifest and dataset name different benchmarks");
  }
  std::unordered_map<std::string, const DatasetRecord*> index;
  for (const auto& r : dataset.records) index.emplace(r.item_id, &r);

  std::vector<Question> out;
  out.reserve(m.items.size());
  for (const auto& item : m.items) {
    auto it = index.find(item.item_id);
    if (it == index.end() || it->second->source_index != item.source_index) {
      throw Error(ErrorCode::kManifestMismatch, "manifest item '" + item.item_id + "' not found in dataset");
    }
    Question q = to_question(*it->second, m.benchmark);
    q.subject = item.subject_or_bucket;
    out.push_back(std::move(q));
  }
  return out;
}

const std::vector<std::string>& default_mmlu_subjects() {
  static const std::vector<std::string> kSubjects = {
      "abstract_algebra", "anatomy",      "business_ethics",  "clinical_knowledge", "college_mathematics",
      "computer_security", "econometrics", "jurisprudence",   "machine_learning",   "moral_scenarios",
  };
  return kSubjects;
}

namespace {

Manifest finalize(Manifest m) {
  m.created_digest = manifest_digest(m);
  return m;
}

ManifestItem item_of(const DatasetRecord& r, std::string group) {
  return {r.item_id, r.source_index, std::move(group)};
}

}  // namespace

Manifest sample_mmlu(const Dataset& dataset, std::uint64_t seed, const std::vector<std::string>& subjects,
                     std::size_t n_per_subject) {
  if (std::set<std::string>(subjects.begin(), subjects.end()).size() != subjects.size()) {
    throw Error(ErrorCode::kConfig, "subject list has duplicates");
  }
  std::vector<const DatasetRecord*> pooled;
  for (const auto& subject : subjects) {
    std::vector<const DatasetRecord*> pool;
    for (const auto& r : dataset.records) {
      if (r.subject == subject) pool.push_back(&r);
    }
    if (pool.size() < n_per_subject) {
      throw Error(ErrorCode::kSamplingUnderflow, "subject '" + subject + "' has " + std::to_string(pool.size()) +
                                                     " items, needs " + std::to_string(n_per_subject));
    }
    DeterministicRng rng(derive_seed(seed, "mmlu/subject/" + subject));
    shuffle(rng, pool);
    pooled.insert(pooled.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_per_subject));
  }
  // Source order before the global shuffle keeps the result independent of subject list order.
  std::sort(pooled.begin(), pooled.end(),
            [](const DatasetRecord* a, const DatasetRecord* b) { return a->source_index < b->source_index; });
  DeterministicRng global(seed);
  shuffle(global, pooled);

  Manifest m;
  m.benchmark = Benchmark::kMmlu;
  m.seed = seed;
  m.dataset_digest = dataset.digest;
  m.protocol_params = {{"protocol", "mmlu"}, {"subjects", subjects}, {"n_per_subject", n_per_subject}};
  for (const auto* r : pooled) m.items.push_back(item_of(*r, r->subject));
  return finalize(std::move(m));
}

Manifest sample_mmlu_pro(const Dataset& dataset, std::uint64_t seed, MmluProProfile profile) {
  std::map<std::string, std::vector<const DatasetRecord*>> pools;
  for (const auto& r : dataset.records) {
    if (r.options.size() == 10) pools[r.subject].push_back(&r);
  }
  std::vector<std::string> ranked;
  for (const auto& [name, pool] : pools) ranked.push_back(name);
  std::stable_sort(ranked.begin(), ranked.end(), [&](const std::string& a, const std::string& b) {
    return pools[a].size() > pools[b].size();  // std::map iteration already sorted names ascending
  });
  if (ranked.size() < profile.n_categories ||
      (profile.n_categories > 0 && pools[ranked[profile.n_categories - 1]].size() < profile.n_per_category)) {
    throw Error(ErrorCode::kSamplingUnderflow,
                "need " + std::to_string(profile.n_categories) + " categories with at least " +
                    std::to_string(profile.n_per_category) + " ten-option items");
  }
  ranked.resize(profile.n_categories);

  Manifest m;
  m.benchmark = Benchmark::kMmluPro;
  m.seed = seed;
  m.dataset_digest = dataset.digest;
  m.protocol_params = {{"protocol", "mmlu_pro"},
                       {"n_categories", profile.n_categories},
                       {"n_per_category", profile.n_per_category},
                       {"categories", ranked}};
  for (const auto& category : ranked) {
    auto pool = pools[category];
    DeterministicRng rng(derive_seed(seed, "mmlu_pro/category/" + category));
    shuffle(rng, pool);
    for (std::size_t i = 0; i < profile.n_per_category; ++i) m.items.push_back(item_of(*pool[i], category));
  }
  return finalize(std::move(m));
}

std::size_t whitespace_token_count(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  for (std::string tok; in >> tok;) ++n;
  return n;
}

Manifest sample_gsm8k(const Dataset& dataset, std::uint64_t seed, std::size_t bucket_size) {
  constexpr std::size_t kBuckets = 10;
  if (bucket_size == 0) throw Error(ErrorCode::kConfig, "bucket size must be positive");
  const std::size_t total = kBuckets * bucket_size;
  if (dataset.records.size() < total) {
    throw Error(ErrorCode::kSamplingUnderflow, "gsm8k pool has " + std::to_string(dataset.records.size()) +
                                                   " items, needs " + std::to_string(total));
  }
  std::vector<const DatasetRecord*> pool;
  for (const auto& r : dataset.records) pool.push_back(&r);
  DeterministicRng rng(seed);
  shuffle(rng, pool);
  pool.resize(total);

  std::vector<std::pair<std::size_t, const DatasetRecord*>> by_length;
  for (const auto* r : pool) by_length.emplace_back(whitespace_token_count(r->stem), r);
  std::stable_sort(by_length.begin(), by_length.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  Manifest m;
  m.benchmark = Benchmark::kGsm8k;
  m.seed = seed;
  m.dataset_digest = dataset.digest;
  m.protocol_params = {{"protocol", "gsm8k"}, {"B", bucket_size}, {"n_buckets", kBuckets}};
  for (std::size_t i = 0; i < by_length.size(); ++i) {
    m.items.push_back(item_of(*by_length[i].second, "B" + std::to_string(i / bucket_size + 1)));
  }
  return finalize(std::move(m));
}

bool score_item(const Question& q, const Verdict& verdict) {
  if (!verdict.final_answer) return false;
  try {
    return answers_equal(q.kind, *verdict.final_answer, q.gold);
  } catch (const Error&) {
    return false;
  }
}

}  // namespace orchkit::bench
