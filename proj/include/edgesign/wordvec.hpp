#pragma once

// Word-vector table in GloVe text format (`token v1 v2 ... vD` per line)
// and the weighted knowledge-point averaging that produces the raw semantic
// question vector.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace edgesign {

class SemanticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string fold_token(const std::string& token) {
  std::string out;
  out.reserve(token.size());
  for (unsigned char c : token) out.push_back(char(std::tolower(c)));
  // trim punctuation stuck to word edges ("walls." -> "walls")
  std::size_t b = 0, e = out.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(out[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(out[e - 1]))) --e;
  return out.substr(b, e - b);
}

class WordVectorTable {
 public:
  WordVectorTable() = default;

  static WordVectorTable load(std::istream& in, const std::string& origin = "") {
    WordVectorTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string token;
      ss >> token;
      std::vector<float> vec;
      double v;
      while (ss >> v) vec.push_back(float(v));
      if (vec.empty()) {
        throw SemanticsError("word vectors " + origin + " line " +
                             std::to_string(lineno) + ": no values");
      }
      if (table.dim_ == 0) {
        table.dim_ = vec.size();
      } else if (vec.size() != table.dim_) {
        throw SemanticsError("word vectors " + origin + " line " +
                             std::to_string(lineno) + ": dimension " +
                             std::to_string(vec.size()) + " != " +
                             std::to_string(table.dim_));
      }
      table.vectors_.try_emplace(fold_token(token), std::move(vec));
    }
    return table;
  }

  static WordVectorTable load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SemanticsError("cannot open word vectors: " + path);
    return load(in, path);
  }

  void insert(const std::string& token, std::vector<float> vec) {
    if (dim_ == 0) dim_ = vec.size();
    if (vec.size() != dim_) {
      throw SemanticsError("word vector dimension mismatch for " + token);
    }
    vectors_[fold_token(token)] = std::move(vec);
  }

  const std::vector<float>* lookup(const std::string& token) const {
    auto it = vectors_.find(fold_token(token));
    return it == vectors_.end() ? nullptr : &it->second;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool empty() const { return vectors_.empty(); }

  void save(std::ostream& out) const {
    for (const auto& [token, vec] : vectors_) {
      out << token;
      for (float v : vec) out << ' ' << v;
      out << '\n';
    }
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<float>> vectors_;
};

inline std::vector<std::string> split_term_tokens(const std::string& term) {
  std::vector<std::string> tokens;
  std::istringstream ss(term);
  std::string tok;
  while (ss >> tok) {
    std::string folded = fold_token(tok);
    if (!folded.empty()) tokens.push_back(std::move(folded));
  }
  return tokens;
}

struct SemanticVector {
  std::vector<double> values;
  bool all_terms_dropped = false;
  std::size_t dropped_terms = 0;
};

// Weighted average of knowledge-point vectors: each term's vector is the
// mean of its in-vocabulary token vectors; terms with no in-vocabulary
// tokens are dropped; if everything drops the result is the zero vector
// with the flag set.
inline SemanticVector embed_knowledge_points(
    const std::vector<std::pair<std::string, double>>& points,
    const WordVectorTable& table) {
  if (table.empty()) throw SemanticsError("embed: word-vector table is empty");
  SemanticVector out;
  out.values.assign(table.dim(), 0.0);
  double weight_sum = 0.0;
  for (const auto& [term, weight] : points) {
    std::vector<double> term_vec(table.dim(), 0.0);
    std::size_t hits = 0;
    for (const std::string& tok : split_term_tokens(term)) {
      if (const auto* vec = table.lookup(tok)) {
        for (std::size_t k = 0; k < table.dim(); ++k) term_vec[k] += (*vec)[k];
        ++hits;
      }
    }
    if (hits == 0) {
      ++out.dropped_terms;
      continue;
    }
    for (std::size_t k = 0; k < table.dim(); ++k) {
      out.values[k] += weight * term_vec[k] / double(hits);
    }
    weight_sum += weight;
  }
  if (weight_sum <= 0.0) {
    out.all_terms_dropped = true;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  for (double& v : out.values) v /= weight_sum;
  return out;
}

}  // namespace edgesign
