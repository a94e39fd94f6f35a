#pragma once

// Stochastic sign-flip augmentation. A view is the base graph plus a flip
// set; topology never changes, so the incidence structure is shared and the
// per-view state is O(flips).

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "edgesign/graph.hpp"

namespace edgesign {

class AugmentedView {
 public:
  AugmentedView(const SignedBipartiteGraph& base,
                std::vector<std::uint32_t> flipped)
      : base_(&base), flip_mask_(base.num_edges(), 0) {
    flipped_.reserve(flipped.size());
    for (auto e : flipped) {
      if (e >= base.num_edges()) {
        throw GraphError("augmented view: flip index out of range");
      }
      if (!flip_mask_[e]) {
        flip_mask_[e] = 1;
        flipped_.push_back(e);
      }
    }
    std::sort(flipped_.begin(), flipped_.end());
  }

  const SignedBipartiteGraph& base() const { return *base_; }
  const std::vector<std::uint32_t>& flipped() const { return flipped_; }
  std::size_t flip_count() const { return flipped_.size(); }
  bool is_flipped(std::uint32_t e) const { return flip_mask_.at(e) != 0; }

  Sign effective_sign(std::uint32_t e) const {
    const Sign s = base_->edge(e).sign;
    return flip_mask_.at(e) ? opposite(s) : s;
  }

 private:
  const SignedBipartiteGraph* base_;
  std::vector<std::uint32_t> flipped_;
  std::vector<std::uint8_t> flip_mask_;
};

// Flips each edge sign independently with probability p under the seed.
inline AugmentedView augment(const SignedBipartiteGraph& g, double p,
                             std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw GraphError("augment: flip probability must be in [0, 1]");
  }
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::uint32_t> flipped;
  for (std::uint32_t e = 0; e < g.num_edges(); ++e) {
    if (unit(rng) < p) flipped.push_back(e);
  }
  return AugmentedView(g, std::move(flipped));
}

inline AugmentedView identity_view(const SignedBipartiteGraph& g) {
  return AugmentedView(g, {});
}

// Edge ids of the view whose effective sign matches, optionally restricted
// to a subset of edge ids (e.g. the training split).
inline std::vector<std::uint32_t> sign_subgraph_edges(
    const AugmentedView& view, Sign sign,
    const std::vector<std::uint32_t>* restrict_to = nullptr) {
  std::vector<std::uint32_t> out;
  if (restrict_to) {
    for (auto e : *restrict_to) {
      if (view.effective_sign(e) == sign) out.push_back(e);
    }
  } else {
    for (std::uint32_t e = 0; e < view.base().num_edges(); ++e) {
      if (view.effective_sign(e) == sign) out.push_back(e);
    }
  }
  return out;
}

}  // namespace edgesign
