#pragma once

// Immutable signed bipartite graph: students on one side, questions on the
// other, every edge labeled positive (correct answer) or negative. Also owns
// split generation and class-imbalance statistics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

namespace edgesign {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Side : std::uint8_t { Student, Question };
enum class Sign : std::uint8_t { Positive, Negative };

inline Sign opposite(Sign s) {
  return s == Sign::Positive ? Sign::Negative : Sign::Positive;
}

struct NodeId {
  Side side;
  std::uint32_t index;

  bool operator==(const NodeId&) const = default;
};

struct SignedEdge {
  std::uint32_t student;
  std::uint32_t question;
  Sign sign;

  bool operator==(const SignedEdge&) const = default;
};

struct EdgeRecord {
  std::string student_key;
  std::string question_key;
  bool correct;
};

// Neighbor entry: the opposite-side node index plus the edge id behind it.
struct AdjEntry {
  std::uint32_t neighbor;
  std::uint32_t edge;
};

class SignedBipartiteGraph {
 public:
  SignedBipartiteGraph(std::vector<std::string> student_keys,
                       std::vector<std::string> question_keys,
                       std::vector<SignedEdge> edges,
                       std::size_t discarded_duplicates)
      : student_keys_(std::move(student_keys)),
        question_keys_(std::move(question_keys)),
        edges_(std::move(edges)),
        discarded_duplicates_(discarded_duplicates) {
    student_adj_[0].resize(num_students());
    student_adj_[1].resize(num_students());
    question_adj_[0].resize(num_questions());
    question_adj_[1].resize(num_questions());
    for (std::uint32_t e = 0; e < edges_.size(); ++e) {
      const SignedEdge& edge = edges_[e];
      if (edge.student >= num_students() || edge.question >= num_questions()) {
        throw GraphError("edge references out-of-range node");
      }
      const int s = edge.sign == Sign::Positive ? 0 : 1;
      student_adj_[s][edge.student].push_back({edge.question, e});
      question_adj_[s][edge.question].push_back({edge.student, e});
    }
  }

  std::size_t num_students() const { return student_keys_.size(); }
  std::size_t num_questions() const { return question_keys_.size(); }
  std::size_t num_nodes() const { return num_students() + num_questions(); }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t discarded_duplicates() const { return discarded_duplicates_; }

  const std::vector<SignedEdge>& edges() const { return edges_; }
  const SignedEdge& edge(std::uint32_t e) const { return edges_.at(e); }

  const std::vector<std::string>& student_keys() const {
    return student_keys_;
  }
  const std::vector<std::string>& question_keys() const {
    return question_keys_;
  }

  const std::vector<AdjEntry>& neighbors(NodeId node, Sign sign) const {
    const int s = sign == Sign::Positive ? 0 : 1;
    if (node.side == Side::Student) {
      return student_adj_[s].at(node.index);
    }
    return question_adj_[s].at(node.index);
  }

  std::size_t count_sign(Sign sign) const {
    return std::size_t(std::count_if(
        edges_.begin(), edges_.end(),
        [sign](const SignedEdge& e) { return e.sign == sign; }));
  }

  // Global node numbering used by the encoders: students first, then
  // questions.
  std::size_t global_index(NodeId node) const {
    return node.side == Side::Student ? node.index
                                      : num_students() + node.index;
  }

 private:
  std::vector<std::string> student_keys_;
  std::vector<std::string> question_keys_;
  std::vector<SignedEdge> edges_;
  std::size_t discarded_duplicates_ = 0;
  // [0] positive, [1] negative
  std::array<std::vector<std::vector<AdjEntry>>, 2> student_adj_;
  std::array<std::vector<std::vector<AdjEntry>>, 2> question_adj_;
};

// Dense re-indexing of opaque keys in first-occurrence order. Duplicate
// (student, question) pairs keep the first record; the discard count is
// kept on the graph.
inline SignedBipartiteGraph build_graph(const std::vector<EdgeRecord>& records) {
  if (records.empty()) throw GraphError("empty edge log");
  std::unordered_map<std::string, std::uint32_t> student_ids;
  std::unordered_map<std::string, std::uint32_t> question_ids;
  std::vector<std::string> student_keys;
  std::vector<std::string> question_keys;
  std::vector<SignedEdge> edges;
  std::unordered_set<std::uint64_t> seen_pairs;
  std::size_t discarded = 0;
  for (const EdgeRecord& rec : records) {
    auto [sit, s_new] =
        student_ids.try_emplace(rec.student_key, student_keys.size());
    if (s_new) student_keys.push_back(rec.student_key);
    auto [qit, q_new] =
        question_ids.try_emplace(rec.question_key, question_keys.size());
    if (q_new) question_keys.push_back(rec.question_key);
    const std::uint64_t pair =
        (std::uint64_t(sit->second) << 32) | qit->second;
    if (!seen_pairs.insert(pair).second) {
      ++discarded;
      continue;
    }
    edges.push_back({sit->second, qit->second,
                     rec.correct ? Sign::Positive : Sign::Negative});
  }
  return SignedBipartiteGraph(std::move(student_keys),
                              std::move(question_keys), std::move(edges),
                              discarded);
}

inline double positive_ratio(const SignedBipartiteGraph& g) {
  if (g.num_edges() == 0) throw GraphError("positive_ratio: graph has no edges");
  return double(g.count_sign(Sign::Positive)) / double(g.num_edges());
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

enum class SplitMode : std::uint8_t { Standard, ColdStart };

struct SplitFractions {
  double train = 0.85;
  double val = 0.05;
  double test = 0.10;
};

struct SplitOptions {
  // ColdStart only: move 5% of the training edges into a validation set.
  bool carve_validation = false;
  double held_question_fraction = 0.10;
};

struct SplitPlan {
  SplitMode mode = SplitMode::Standard;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> train;
  std::vector<std::uint32_t> val;
  std::vector<std::uint32_t> test;
  std::vector<std::uint32_t> held_questions;  // ColdStart only
};

inline SplitPlan make_split(const SignedBipartiteGraph& g,
                            SplitFractions fractions, SplitMode mode,
                            std::uint64_t seed, SplitOptions options = {}) {
  SplitPlan plan;
  plan.mode = mode;
  plan.seed = seed;
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));

  if (mode == SplitMode::Standard) {
    const double total = fractions.train + fractions.val + fractions.test;
    if (std::fabs(total - 1.0) > 1e-9 || fractions.train < 0 ||
        fractions.val < 0 || fractions.test < 0) {
      throw GraphError("make_split: fractions must be non-negative and sum to 1");
    }
    std::vector<std::uint32_t> order(g.num_edges());
    std::iota(order.begin(), order.end(), 0u);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n = order.size();
    std::size_t n_train = std::size_t(std::llround(fractions.train * double(n)));
    std::size_t n_val = std::size_t(std::llround(fractions.val * double(n)));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    plan.train.assign(order.begin(), order.begin() + n_train);
    plan.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    plan.test.assign(order.begin() + n_train + n_val, order.end());
  } else {
    if (g.num_questions() < 10) {
      throw GraphError("make_split: too few questions for a cold-start split");
    }
    std::vector<std::uint32_t> questions(g.num_questions());
    std::iota(questions.begin(), questions.end(), 0u);
    std::shuffle(questions.begin(), questions.end(), rng);
    const std::size_t n_held = std::max<std::size_t>(
        1, std::size_t(std::llround(options.held_question_fraction *
                                    double(g.num_questions()))));
    plan.held_questions.assign(questions.begin(), questions.begin() + n_held);
    std::sort(plan.held_questions.begin(), plan.held_questions.end());
    std::vector<std::uint8_t> held(g.num_questions(), 0);
    for (auto q : plan.held_questions) held[q] = 1;
    for (std::uint32_t e = 0; e < g.num_edges(); ++e) {
      if (held[g.edge(e).question]) {
        plan.test.push_back(e);
      } else {
        plan.train.push_back(e);
      }
    }
    if (options.carve_validation && plan.train.size() >= 20) {
      std::shuffle(plan.train.begin(), plan.train.end(), rng);
      const std::size_t n_val =
          std::size_t(std::llround(0.05 * double(plan.train.size())));
      plan.val.assign(plan.train.end() - n_val, plan.train.end());
      plan.train.resize(plan.train.size() - n_val);
      std::sort(plan.train.begin(), plan.train.end());
      std::sort(plan.val.begin(), plan.val.end());
    }
  }
  return plan;
}

// Inverse-frequency class weights normalized so that
// w_pos * n_pos + w_neg * n_neg = n_total, i.e. w_c = n / (2 * n_c).
inline std::pair<double, double> class_weights(
    const SignedBipartiteGraph& g, const std::vector<std::uint32_t>& train) {
  std::size_t n_pos = 0, n_neg = 0;
  for (auto e : train) {
    (g.edge(e).sign == Sign::Positive ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0) {
    throw GraphError("class_weights: degenerate class distribution");
  }
  const double n = double(n_pos + n_neg);
  return {n / (2.0 * double(n_pos)), n / (2.0 * double(n_neg))};
}

// ---------------------------------------------------------------------------
// External formats
// ---------------------------------------------------------------------------

// Edge log CSV: header `student_id,question_id,correct`, correct in {0,1}.
inline std::vector<EdgeRecord> read_edge_csv(std::istream& in,
                                             const std::string& origin = "") {
  auto fail = [&origin](std::size_t line, const std::string& what) -> void {
    throw GraphError("edge csv " + origin + " line " + std::to_string(line) +
                     ": " + what);
  };
  std::string line;
  if (!std::getline(in, line)) fail(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "student_id,question_id,correct") {
    fail(1, "expected header student_id,question_id,correct");
  }
  std::vector<EdgeRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos
                                            : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos ||
        line.find(',', c2 + 1) != std::string::npos) {
      fail(lineno, "expected exactly 3 fields");
    }
    EdgeRecord rec;
    rec.student_key = line.substr(0, c1);
    rec.question_key = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string correct = line.substr(c2 + 1);
    if (correct == "1") {
      rec.correct = true;
    } else if (correct == "0") {
      rec.correct = false;
    } else {
      fail(lineno, "correct must be 0 or 1, got '" + correct + "'");
    }
    if (rec.student_key.empty() || rec.question_key.empty()) {
      fail(lineno, "empty id");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<EdgeRecord> read_edge_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open edge csv: " + path);
  return read_edge_csv(in, path);
}

inline void write_edge_csv(std::ostream& out,
                           const SignedBipartiteGraph& g) {
  out << "student_id,question_id,correct\n";
  for (const SignedEdge& e : g.edges()) {
    out << g.student_keys()[e.student] << ',' << g.question_keys()[e.question]
        << ',' << (e.sign == Sign::Positive ? '1' : '0') << '\n';
  }
}

inline nlohmann::json split_to_json(const SplitPlan& plan) {
  nlohmann::json j;
  j["mode"] = plan.mode == SplitMode::Standard ? "standard" : "coldstart";
  j["seed"] = plan.seed;
  j["train"] = plan.train;
  j["val"] = plan.val;
  j["test"] = plan.test;
  j["held_questions"] = plan.held_questions;
  return j;
}

inline SplitPlan split_from_json(const nlohmann::json& j) {
  SplitPlan plan;
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "standard") {
    plan.mode = SplitMode::Standard;
  } else if (mode == "coldstart") {
    plan.mode = SplitMode::ColdStart;
  } else {
    throw GraphError("split sidecar: unknown mode '" + mode + "'");
  }
  plan.seed = j.at("seed").get<std::uint64_t>();
  plan.train = j.at("train").get<std::vector<std::uint32_t>>();
  plan.val = j.at("val").get<std::vector<std::uint32_t>>();
  plan.test = j.at("test").get<std::vector<std::uint32_t>>();
  plan.held_questions =
      j.at("held_questions").get<std::vector<std::uint32_t>>();
  return plan;
}

inline void save_split(const std::string& path, const SplitPlan& plan) {
  std::ofstream out(path);
  if (!out) throw GraphError("cannot write split sidecar: " + path);
  out << split_to_json(plan).dump(2) << '\n';
}

inline SplitPlan load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open split sidecar: " + path);
  nlohmann::json j;
  in >> j;
  return split_from_json(j);
}

}  // namespace edgesign
