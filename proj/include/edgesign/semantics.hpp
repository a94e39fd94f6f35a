#pragma once

// Semantic question embeddings: flatten an MCQ into the extraction prompt,
// obtain weighted knowledge-point terms from a chat-completion endpoint
// (with a mandatory on-disk cache so experiments run offline), embed the
// terms with word vectors, and PCA-reduce to the encoder dimension.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "edgesign/wordvec.hpp"

namespace edgesign {

// ---------------------------------------------------------------------------
// MCQ corpus
// ---------------------------------------------------------------------------

struct McqOption {
  char label = 'A';  // 'A'..'E'
  std::string text;
};

struct Mcq {
  std::string question_key;
  std::string stem;
  std::vector<McqOption> options;  // up to five
  char answer = 'A';
  std::string explanation;
};

inline void validate_mcq(const Mcq& mcq) {
  if (mcq.stem.empty()) {
    throw SemanticsError("mcq " + mcq.question_key + ": empty stem");
  }
  if (mcq.options.empty() || mcq.options.size() > 5) {
    throw SemanticsError("mcq " + mcq.question_key +
                         ": expected 1..5 options, got " +
                         std::to_string(mcq.options.size()));
  }
  bool answer_found = false;
  for (const auto& opt : mcq.options) {
    if (opt.label < 'A' || opt.label > 'E') {
      throw SemanticsError("mcq " + mcq.question_key + ": bad option label");
    }
    answer_found = answer_found || opt.label == mcq.answer;
  }
  if (!answer_found) {
    throw SemanticsError("mcq " + mcq.question_key +
                         ": answer label not among options");
  }
}

// Line-delimited corpus records:
//   {"question_id": ..., "stem": ..., "options": {"A": ...}, "answer": "A",
//    "explanation": ...}
inline std::vector<Mcq> read_mcq_corpus(std::istream& in,
                                        const std::string& origin = "") {
  std::vector<Mcq> corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SemanticsError("mcq corpus " + origin + " line " +
                           std::to_string(lineno) + ": " + e.what());
    }
    Mcq mcq;
    mcq.question_key = j.at("question_id").get<std::string>();
    mcq.stem = j.at("stem").get<std::string>();
    for (const auto& [label, text] : j.at("options").items()) {
      if (label.size() != 1) {
        throw SemanticsError("mcq corpus " + origin + " line " +
                             std::to_string(lineno) + ": bad option label '" +
                             label + "'");
      }
      mcq.options.push_back({label[0], text.get<std::string>()});
    }
    std::sort(mcq.options.begin(), mcq.options.end(),
              [](const McqOption& a, const McqOption& b) {
                return a.label < b.label;
              });
    const std::string answer = j.at("answer").get<std::string>();
    if (answer.size() != 1) {
      throw SemanticsError("mcq corpus " + origin + " line " +
                           std::to_string(lineno) + ": bad answer label");
    }
    mcq.answer = answer[0];
    mcq.explanation = j.value("explanation", std::string());
    validate_mcq(mcq);
    corpus.push_back(std::move(mcq));
  }
  return corpus;
}

inline std::vector<Mcq> read_mcq_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SemanticsError("cannot open mcq corpus: " + path);
  return read_mcq_corpus(in, path);
}

inline nlohmann::json mcq_to_json(const Mcq& mcq) {
  nlohmann::json options = nlohmann::json::object();
  for (const auto& opt : mcq.options) {
    options[std::string(1, opt.label)] = opt.text;
  }
  return nlohmann::json{{"question_id", mcq.question_key},
                        {"stem", mcq.stem},
                        {"options", options},
                        {"answer", std::string(1, mcq.answer)},
                        {"explanation", mcq.explanation}};
}

inline void write_mcq_corpus(std::ostream& out, const std::vector<Mcq>& corpus) {
  for (const Mcq& mcq : corpus) out << mcq_to_json(mcq).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Prompt flattening
// ---------------------------------------------------------------------------

struct PromptConfig {
  // Description of the question author inserted into the task objective.
  std::string audience = "a first-year student who studies biology in college";
};

// Deterministic rendering of an MCQ into the extraction prompt: task
// objective, response-format requirements, an in-context example, and the
// flattened stem/options/answer/explanation block.
inline std::string flatten_mcq(const Mcq& mcq, const PromptConfig& cfg = {}) {
  validate_mcq(mcq);
  std::ostringstream out;
  out << "Task Objective: Your task is to extract key knowledge points from "
         "an MCQ created by "
      << cfg.audience
      << ". The question consists of a stem, up to five options, an answer, "
         "and an explanation provided by the student author.\n\n";
  out << "Special Requirements: Please provide your response in JSON format "
         "with the following keys and format:\n"
         "{\"Keywords\": [{\"keyword\": \"keyword_name\", \"percentage\": "
         "0}]}\n\n"
         "1. Each \"keyword_name\" should be a word or a short term with "
         "less than five words.\n\n"
         "2. The percentages of all keywords should add up to 1.\n\n"
         "3. Only include the top five keywords to avoid excessive keyword "
         "extraction.\n\n";
  out << "In Context Learning: Here's an example response format:\n"
         "{\"Keywords\": [\n"
         "  {\"keyword\": \"Menstrual cycle\", \"percentage\": 0.8},\n"
         "  {\"keyword\": \"Luteal phase\", \"percentage\": 0.2}\n"
         "]}\n\n";
  out << "Context:\nHere's the MCQ from the student author:\n\n";
  out << "Question stem: " << mcq.stem << "\n\n";
  for (const auto& opt : mcq.options) {
    out << '[' << opt.label << "]: " << opt.text << "\n\n";
  }
  out << "Question answer: " << mcq.answer << "\n\n";
  out << "Explanation: " << mcq.explanation << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Knowledge-point records
// ---------------------------------------------------------------------------

enum class KpSource : std::uint8_t { LlmLive, Cache, Manual };

inline std::string kp_source_name(KpSource s) {
  switch (s) {
    case KpSource::LlmLive: return "llm";
    case KpSource::Cache: return "cache";
    case KpSource::Manual: return "manual";
  }
  return "unknown";
}

struct KnowledgePointRecord {
  std::string question_key;
  std::vector<std::pair<std::string, double>> points;  // term, weight
  KpSource source = KpSource::Manual;
};

class ExtractionError : public SemanticsError {
 public:
  using SemanticsError::SemanticsError;
};

// Keeps the top five terms by weight and renormalizes the weights to sum 1.
inline std::vector<std::pair<std::string, double>> finalize_points(
    std::vector<std::pair<std::string, double>> points) {
  std::erase_if(points, [](const auto& p) {
    return p.first.empty() || !(p.second > 0.0);
  });
  if (points.empty()) {
    throw ExtractionError("knowledge points: no usable terms");
  }
  std::stable_sort(points.begin(), points.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  if (points.size() > 5) points.resize(5);
  double total = 0.0;
  for (const auto& p : points) total += p.second;
  for (auto& p : points) p.second /= total;
  return points;
}

namespace detail {

inline std::optional<nlohmann::json> try_parse_json(std::string_view text) {
  auto parsed = nlohmann::json::parse(text, nullptr, false);
  if (parsed.is_discarded()) return std::nullopt;
  return parsed;
}

// Responses sometimes arrive wrapped in prose or markdown fences; fall back
// to the first balanced JSON value in the text.
inline std::optional<nlohmann::json> extract_json_payload(
    const std::string& raw) {
  if (auto direct = try_parse_json(raw)) return direct;
  const std::size_t begin = raw.find_first_of("[{");
  if (begin == std::string::npos) return std::nullopt;
  const char open = raw[begin];
  const char close = open == '[' ? ']' : '}';
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = begin; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == open) ++depth;
    else if (c == close && --depth == 0) {
      return try_parse_json(std::string_view(raw).substr(begin, i - begin + 1));
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Accepts both the mandated {"Keywords": [...]} object and a bare array of
// {"keyword", "percentage"} entries.
inline std::vector<std::pair<std::string, double>> parse_knowledge_points(
    const std::string& raw) {
  auto payload = detail::extract_json_payload(raw);
  if (!payload) throw ExtractionError("knowledge points: response is not JSON");
  nlohmann::json entries;
  if (payload->is_object() && payload->contains("Keywords")) {
    entries = payload->at("Keywords");
  } else if (payload->is_array()) {
    entries = *payload;
  } else {
    throw ExtractionError("knowledge points: unexpected JSON shape");
  }
  if (!entries.is_array()) {
    throw ExtractionError("knowledge points: Keywords is not an array");
  }
  std::vector<std::pair<std::string, double>> points;
  for (const auto& entry : entries) {
    if (!entry.is_object() || !entry.contains("keyword") ||
        !entry.contains("percentage") || !entry["keyword"].is_string() ||
        !entry["percentage"].is_number()) {
      throw ExtractionError("knowledge points: malformed entry " + entry.dump());
    }
    points.emplace_back(entry["keyword"].get<std::string>(),
                        entry["percentage"].get<double>());
  }
  return finalize_points(std::move(points));
}

// ---------------------------------------------------------------------------
// Chat-completion client
// ---------------------------------------------------------------------------

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

struct LlmConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo-0613";
  double temperature = 0.0;
  std::string api_key;
  int max_retries = 3;
  int timeout_seconds = 60;
  bool debug_log = false;
};

// ---------------------------------------------------------------------------
// On-disk extraction cache (one JSON file per prompt hash)
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string prompt_cache_key(const LlmConfig& cfg,
                                    const std::string& prompt) {
  std::ostringstream material;
  material << cfg.model << '\x1f' << cfg.temperature << '\x1f' << prompt;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(material.str())));
  return buf;
}

struct CacheEntry {
  std::string question_key;
  std::string prompt_hash;
  std::string raw_response;
  std::vector<std::pair<std::string, double>> points;
};

class KnowledgePointCache {
 public:
  explicit KnowledgePointCache(std::filesystem::path dir)
      : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const { return dir_; }

  std::optional<CacheEntry> get(const std::string& hash) const {
    const auto path = entry_path(hash);
    std::ifstream in(path);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception&) {
      throw SemanticsError("cache: corrupt entry " + path.string());
    }
    CacheEntry entry;
    entry.question_key = j.at("question_key").get<std::string>();
    entry.prompt_hash = j.at("prompt_hash").get<std::string>();
    entry.raw_response = j.at("raw_response").get<std::string>();
    for (const auto& p : j.at("points")) {
      entry.points.emplace_back(p.at("term").get<std::string>(),
                                p.at("weight").get<double>());
    }
    return entry;
  }

  void put(const CacheEntry& entry) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [term, weight] : entry.points) {
      points.push_back({{"term", term}, {"weight", weight}});
    }
    const nlohmann::json j{{"question_key", entry.question_key},
                           {"prompt_hash", entry.prompt_hash},
                           {"raw_response", entry.raw_response},
                           {"points", points}};
    std::lock_guard<std::mutex> lock(write_mutex_);
    std::ofstream out(entry_path(entry.prompt_hash));
    if (!out) {
      throw SemanticsError("cache: cannot write entry for " +
                           entry.question_key);
    }
    out << j.dump(2) << '\n';
  }

 private:
  std::filesystem::path entry_path(const std::string& hash) const {
    return dir_ / (hash + ".json");
  }

  std::filesystem::path dir_;
  std::mutex write_mutex_;
};

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

struct ExtractionContext {
  ChatClient* client = nullptr;  // null = offline, cache only
  KnowledgePointCache* cache = nullptr;
  LlmConfig config;
  PromptConfig prompt;
};

inline KnowledgePointRecord extract_knowledge_points(
    const Mcq& mcq, ExtractionContext& ctx) {
  const std::string prompt = flatten_mcq(mcq, ctx.prompt);
  const std::string hash = prompt_cache_key(ctx.config, prompt);
  if (ctx.cache) {
    if (auto entry = ctx.cache->get(hash)) {
      return {mcq.question_key, entry->points, KpSource::Cache};
    }
  }
  if (!ctx.client) {
    throw ExtractionError("extraction: offline and no cache entry for " +
                          mcq.question_key);
  }
  std::string last_error;
  for (int attempt = 0; attempt <= ctx.config.max_retries; ++attempt) {
    std::string raw;
    try {
      raw = ctx.client->complete(prompt);
    } catch (const std::exception& e) {
      last_error = e.what();
      continue;
    }
    if (ctx.config.debug_log) {
      std::cerr << "[extract] " << mcq.question_key << " response: " << raw
                << '\n';
    }
    try {
      auto points = parse_knowledge_points(raw);
      if (ctx.cache) {
        ctx.cache->put({mcq.question_key, hash, raw, points});
      }
      return {mcq.question_key, std::move(points), KpSource::LlmLive};
    } catch (const ExtractionError& e) {
      last_error = e.what();
    }
  }
  throw ExtractionError("unparseable extraction for " + mcq.question_key +
                        ": " + last_error);
}

// ---------------------------------------------------------------------------
// Manual records (hand-authored knowledge points, JSONL)
// ---------------------------------------------------------------------------

inline std::vector<KnowledgePointRecord> read_manual_kp(
    std::istream& in, const std::string& origin = "") {
  std::vector<KnowledgePointRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SemanticsError("manual kp " + origin + " line " +
                           std::to_string(lineno) + ": " + e.what());
    }
    KnowledgePointRecord rec;
    rec.question_key = j.at("question_id").get<std::string>();
    std::vector<std::pair<std::string, double>> points;
    for (const auto& p : j.at("points")) {
      points.emplace_back(p.at("term").get<std::string>(),
                          p.at("weight").get<double>());
    }
    rec.points = finalize_points(std::move(points));
    rec.source = KpSource::Manual;
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<KnowledgePointRecord> read_manual_kp_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SemanticsError("cannot open manual knowledge points: " + path);
  return read_manual_kp(in, path);
}

inline void write_manual_kp(std::ostream& out,
                            const std::vector<KnowledgePointRecord>& records) {
  for (const auto& rec : records) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [term, weight] : rec.points) {
      points.push_back({{"term", term}, {"weight", weight}});
    }
    out << nlohmann::json{{"question_id", rec.question_key},
                          {"points", points}}
               .dump()
        << '\n';
  }
}

}  // namespace edgesign
