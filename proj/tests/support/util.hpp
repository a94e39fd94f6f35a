#pragma once

#include <random>
#include <string>
#include <vector>

#include "edgesign/graph.hpp"

namespace testutil {

// Small random bipartite edge logs for property tests.
inline std::vector<edgesign::EdgeRecord> random_records(std::mt19937& rng,
                                                        std::size_t students,
                                                        std::size_t questions,
                                                        double density = 0.5) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<edgesign::EdgeRecord> records;
  for (std::size_t u = 0; u < students; ++u) {
    for (std::size_t q = 0; q < questions; ++q) {
      if (unit(rng) < density) {
        records.push_back({"s" + std::to_string(u), "q" + std::to_string(q),
                           unit(rng) < 0.6});
      }
    }
  }
  if (records.empty()) records.push_back({"s0", "q0", true});
  return records;
}

inline edgesign::SignedBipartiteGraph random_graph(std::mt19937& rng,
                                                   std::size_t students = 6,
                                                   std::size_t questions = 5,
                                                   double density = 0.5) {
  return edgesign::build_graph(
      random_records(rng, students, questions, density));
}

}  // namespace testutil
