#pragma once

// Synthetic planted-structure data for desk-scale experiments. Students get
// latent abilities, questions get difficulties partially determined by a
// latent topic (strength kp_signal), and the emitted knowledge points plus
// toy word vectors identify that topic, so semantic embeddings carry real
// signal exactly when kp_signal does.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "edgesign/graph.hpp"
#include "edgesign/semantics.hpp"
#include "edgesign/wordvec.hpp"

namespace edgesign {

struct SynthConfig {
  std::size_t num_students = 200;
  std::size_t num_questions = 100;
  double density = 0.3;   // per-pair edge probability
  double noise = 0.0;     // per-edge sign flip probability
  double kp_signal = 1.0; // how strongly topic determines difficulty, [0,1]
  std::size_t num_topics = 8;
  std::size_t vector_dim = 50;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  std::vector<EdgeRecord> records;
  std::vector<Mcq> corpus;
  std::vector<KnowledgePointRecord> knowledge_points;
  WordVectorTable vectors;
  std::vector<double> abilities;     // per student
  std::vector<double> difficulties;  // per question
  std::vector<std::size_t> topics;   // per question
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline SyntheticData generate_synthetic(const SynthConfig& cfg) {
  if (cfg.num_students < 1 || cfg.num_questions < 1) {
    throw GraphError("synth: counts must be at least 1");
  }
  if (!(cfg.density >= 0.0 && cfg.density <= 1.0) ||
      !(cfg.noise >= 0.0 && cfg.noise <= 1.0)) {
    throw GraphError("synth: density and noise must be in [0, 1]");
  }
  std::mt19937 rng(static_cast<std::mt19937::result_type>(cfg.seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticData data;
  const std::size_t topics = std::max<std::size_t>(1, cfg.num_topics);

  std::vector<double> topic_difficulty(topics);
  for (auto& d : topic_difficulty) d = normal(rng);

  std::vector<std::vector<double>> topic_centroid(
      topics, std::vector<double>(cfg.vector_dim));
  for (auto& centroid : topic_centroid) {
    for (auto& v : centroid) v = normal(rng);
  }
  constexpr std::size_t kTokensPerTopic = 3;
  for (std::size_t t = 0; t < topics; ++t) {
    for (std::size_t k = 0; k < kTokensPerTopic; ++k) {
      std::vector<float> vec(cfg.vector_dim);
      for (std::size_t j = 0; j < cfg.vector_dim; ++j) {
        vec[j] = float(topic_centroid[t][j] + 0.15 * normal(rng));
      }
      data.vectors.insert("topic" + std::to_string(t) + "_kw" +
                              std::to_string(k),
                          std::move(vec));
    }
  }
  for (std::size_t i = 0; i < 20; ++i) {
    std::vector<float> vec(cfg.vector_dim);
    for (auto& v : vec) v = float(normal(rng));
    data.vectors.insert("filler" + std::to_string(i), std::move(vec));
  }

  data.abilities.resize(cfg.num_students);
  for (auto& a : data.abilities) a = normal(rng);

  data.difficulties.resize(cfg.num_questions);
  data.topics.resize(cfg.num_questions);
  const double idio_scale =
      std::sqrt(std::max(0.0, 1.0 - cfg.kp_signal * cfg.kp_signal));
  for (std::size_t v = 0; v < cfg.num_questions; ++v) {
    data.topics[v] = std::size_t(unit(rng) * double(topics)) % topics;
    data.difficulties[v] = cfg.kp_signal * topic_difficulty[data.topics[v]] +
                           idio_scale * normal(rng);
  }

  for (std::size_t u = 0; u < cfg.num_students; ++u) {
    for (std::size_t v = 0; v < cfg.num_questions; ++v) {
      if (unit(rng) >= cfg.density) continue;
      bool correct =
          unit(rng) < logistic(data.abilities[u] - data.difficulties[v]);
      if (unit(rng) < cfg.noise) correct = !correct;
      data.records.push_back(
          {"s" + std::to_string(u), "q" + std::to_string(v), correct});
    }
  }

  for (std::size_t v = 0; v < cfg.num_questions; ++v) {
    const std::size_t t = data.topics[v];
    const std::string kw0 = "topic" + std::to_string(t) + "_kw0";
    const std::string kw1 = "topic" + std::to_string(t) + "_kw1";
    const std::string kw2 = "topic" + std::to_string(t) + "_kw2";
    Mcq mcq;
    mcq.question_key = "q" + std::to_string(v);
    mcq.stem = "Which statement about " + kw0 + " and " + kw1 + " is correct?";
    mcq.options = {
        {'A', "It follows directly from " + kw2 + "."},
        {'B', "It contradicts " + kw0 + "."},
        {'C', "It is unrelated to " + kw1 + "."},
        {'D', "None of the above."},
    };
    mcq.answer = char('A' + int(v % 4));
    mcq.explanation = "The key idea is " + kw0 + "; see also " + kw2 + ".";
    data.corpus.push_back(std::move(mcq));

    KnowledgePointRecord rec;
    rec.question_key = "q" + std::to_string(v);
    rec.points = {{kw0 + " " + kw1, 0.6}, {kw2, 0.4}};
    rec.source = KpSource::Manual;
    data.knowledge_points.push_back(std::move(rec));
  }
  return data;
}

// Writes edges.csv, corpus.jsonl, kp_manual.jsonl, and vectors.txt.
inline void write_synthetic_files(const std::filesystem::path& dir,
                                  const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "edges.csv");
    if (!out) throw GraphError("synth: cannot write edges.csv");
    out << "student_id,question_id,correct\n";
    for (const auto& rec : data.records) {
      out << rec.student_key << ',' << rec.question_key << ','
          << (rec.correct ? '1' : '0') << '\n';
    }
  }
  {
    std::ofstream out(dir / "corpus.jsonl");
    if (!out) throw GraphError("synth: cannot write corpus.jsonl");
    write_mcq_corpus(out, data.corpus);
  }
  {
    std::ofstream out(dir / "kp_manual.jsonl");
    if (!out) throw GraphError("synth: cannot write kp_manual.jsonl");
    write_manual_kp(out, data.knowledge_points);
  }
  {
    std::ofstream out(dir / "vectors.txt");
    if (!out) throw GraphError("synth: cannot write vectors.txt");
    data.vectors.save(out);
  }
}

}  // namespace edgesign
