#pragma once

// Dual-sign, dual-view graph attention encoding. Four GAT stacks (one per
// (view, sign) pair) run over the shared node embedding tables; their final
// layers are concatenated and projected to the fused representation.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "edgesign/augment.hpp"
#include "edgesign/checkpoint.hpp"
#include "edgesign/graph.hpp"
#include "edgesign/tensor.hpp"

namespace edgesign {

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t layers = 2;
  double leaky_slope = 0.2;
  double prelu_init = 0.25;
};

// Directed message-passing structure of one sign subgraph over the global
// node numbering (students, then questions). Edges appear in both directions
// so each side aggregates its opposite-side neighbors; they are grouped by
// destination node so segment ops can run over CSR offsets.
struct SignAdjacency {
  std::size_t num_nodes = 0;
  std::vector<std::uint32_t> edge_ids;   // underlying undirected edges used
  std::vector<std::uint32_t> src;        // length 2 * edge_ids.size()
  std::vector<std::size_t> offsets;      // length num_nodes + 1, by dst
  std::vector<float> isolated;           // 1.0 where a node has no in-edges

  std::size_t num_directed() const { return src.size(); }
};

inline SignAdjacency build_sign_adjacency(
    const AugmentedView& view, Sign sign,
    const std::vector<std::uint32_t>* restrict_to = nullptr) {
  const SignedBipartiteGraph& g = view.base();
  SignAdjacency adj;
  adj.num_nodes = g.num_nodes();
  adj.edge_ids = sign_subgraph_edges(view, sign, restrict_to);

  std::vector<std::size_t> degree(adj.num_nodes, 0);
  for (auto e : adj.edge_ids) {
    const SignedEdge& edge = g.edge(e);
    degree[edge.student] += 1;
    degree[g.num_students() + edge.question] += 1;
  }
  adj.offsets.assign(adj.num_nodes + 1, 0);
  for (std::size_t i = 0; i < adj.num_nodes; ++i) {
    adj.offsets[i + 1] = adj.offsets[i] + degree[i];
  }
  adj.src.resize(2 * adj.edge_ids.size());
  std::vector<std::size_t> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
  for (auto e : adj.edge_ids) {
    const SignedEdge& edge = g.edge(e);
    const std::uint32_t u = edge.student;
    const std::uint32_t q = std::uint32_t(g.num_students() + edge.question);
    adj.src[cursor[u]++] = q;
    adj.src[cursor[q]++] = u;
  }
  adj.isolated.assign(adj.num_nodes, 0.0f);
  for (std::size_t i = 0; i < adj.num_nodes; ++i) {
    if (degree[i] == 0) adj.isolated[i] = 1.0f;
  }
  return adj;
}

template <typename T>
struct GatLayerParams {
  Tensor<T> weight;       // d_in x d_out
  Tensor<T> attention;    // 2 * d_out x 1, split into [target | source]
  Tensor<T> prelu_slope;  // {1}
};

template <typename T>
struct GatStack {
  std::vector<GatLayerParams<T>> layers;
};

template <typename T>
struct GatLayerResult {
  Tensor<T> features;   // num_nodes x d_out
  Tensor<T> attention;  // directed-edge column, grouped like adj.offsets
};

// One GAT layer over a sign subgraph:
//   e_ij = LeakyReLU(a^T [W h_i || W h_j]),  alpha = softmax over i's
//   neighbors,  h_i' = sum_j alpha_ij W h_j.
// Nodes with no neighbors under this sign fall back to h_i' = W h_i.
template <typename T>
GatLayerResult<T> gat_layer(const Tensor<T>& features,
                            const SignAdjacency& adj,
                            const GatLayerParams<T>& params,
                            double leaky_slope = 0.2) {
  if (features.ndim() != 2 || features.rows() != adj.num_nodes) {
    throw TensorError("gat_layer: features shape " +
                      shape_to_string(features.shape()) + " does not match " +
                      std::to_string(adj.num_nodes) + " nodes");
  }
  const std::size_t d_out = params.weight.cols();
  Tensor<T> h = matmul(features, params.weight);
  Tensor<T> attn_dst = slice_rows(params.attention, 0, d_out);
  Tensor<T> attn_src = slice_rows(params.attention, d_out, 2 * d_out);
  Tensor<T> score_dst = matmul(h, attn_dst);  // num_nodes x 1
  Tensor<T> score_src = matmul(h, attn_src);

  // Destination index of directed edge r is the node whose offset range
  // contains r.
  std::vector<std::uint32_t> dst(adj.num_directed());
  for (std::uint32_t node = 0; node < adj.num_nodes; ++node) {
    for (std::size_t r = adj.offsets[node]; r < adj.offsets[node + 1]; ++r) {
      dst[r] = node;
    }
  }

  Tensor<T> alpha;
  Tensor<T> aggregated;
  if (adj.num_directed() > 0) {
    Tensor<T> logits = leaky_relu(
        add(gather_rows(score_dst, dst), gather_rows(score_src, adj.src)),
        leaky_slope);
    alpha = segment_softmax(logits, adj.offsets);
    Tensor<T> messages = scale_rows(gather_rows(h, adj.src), alpha);
    aggregated = segment_sum(messages, adj.offsets);
  } else {
    alpha = Tensor<T>::zeros({0, 1});
    aggregated = Tensor<T>::zeros({adj.num_nodes, d_out});
  }

  // Self-projection fallback for isolated nodes.
  std::vector<T> iso(adj.isolated.begin(), adj.isolated.end());
  Tensor<T> iso_mask =
      Tensor<T>::from_vector({adj.num_nodes, std::size_t(1)}, std::move(iso));
  Tensor<T> out = add(aggregated, scale_rows(h, iso_mask));
  return {std::move(out), std::move(alpha)};
}

// Stack order mirrors the fused concatenation: view 1 positive, view 1
// negative, view 2 positive, view 2 negative.
enum StackIndex : std::size_t {
  kView1Pos = 0,
  kView1Neg = 1,
  kView2Pos = 2,
  kView2Neg = 3,
};

template <typename T>
struct EncoderState {
  Tensor<T> student_table;   // |U| x d
  Tensor<T> question_table;  // |V| x d
  std::array<GatStack<T>, 4> stacks;
  Tensor<T> fusion;  // 4d x d

  static EncoderState init(std::size_t num_students, std::size_t num_questions,
                           const EncoderConfig& cfg, std::mt19937& rng) {
    EncoderState state;
    state.student_table =
        Tensor<T>::randn({num_students, cfg.dim}, rng).set_requires_grad(true);
    state.question_table =
        Tensor<T>::randn({num_questions, cfg.dim}, rng).set_requires_grad(true);
    const double weight_scale = 1.0 / std::sqrt(double(cfg.dim));
    for (auto& stack : state.stacks) {
      stack.layers.resize(cfg.layers);
      for (auto& layer : stack.layers) {
        layer.weight = Tensor<T>::randn({cfg.dim, cfg.dim}, rng, weight_scale)
                           .set_requires_grad(true);
        layer.attention =
            Tensor<T>::randn({2 * cfg.dim, std::size_t(1)}, rng, weight_scale)
                .set_requires_grad(true);
        layer.prelu_slope = Tensor<T>::scalar(T(cfg.prelu_init));
        layer.prelu_slope.set_requires_grad(true);
      }
    }
    state.fusion = Tensor<T>::randn({4 * cfg.dim, cfg.dim}, rng,
                                    1.0 / std::sqrt(4.0 * double(cfg.dim)))
                       .set_requires_grad(true);
    return state;
  }

  std::vector<Tensor<T>> parameters() {
    std::vector<Tensor<T>> out{student_table, question_table};
    for (auto& stack : stacks) {
      for (auto& layer : stack.layers) {
        out.push_back(layer.weight);
        out.push_back(layer.attention);
        out.push_back(layer.prelu_slope);
      }
    }
    out.push_back(fusion);
    return out;
  }

  NamedTensors<T> named_parameters() {
    NamedTensors<T> out;
    out.emplace_back("encoder.student_table", student_table);
    out.emplace_back("encoder.question_table", question_table);
    for (std::size_t s = 0; s < stacks.size(); ++s) {
      for (std::size_t l = 0; l < stacks[s].layers.size(); ++l) {
        const std::string prefix = "encoder.stack" + std::to_string(s) +
                                   ".layer" + std::to_string(l) + ".";
        out.emplace_back(prefix + "weight", stacks[s].layers[l].weight);
        out.emplace_back(prefix + "attention", stacks[s].layers[l].attention);
        out.emplace_back(prefix + "prelu", stacks[s].layers[l].prelu_slope);
      }
    }
    out.emplace_back("encoder.fusion", fusion);
    return out;
  }

  // Deep value copy (parameters keep requires_grad, lose any tape linkage).
  EncoderState clone() const {
    EncoderState out;
    out.student_table = student_table.detach().set_requires_grad(true);
    out.question_table = question_table.detach().set_requires_grad(true);
    for (std::size_t s = 0; s < stacks.size(); ++s) {
      out.stacks[s].layers.resize(stacks[s].layers.size());
      for (std::size_t l = 0; l < stacks[s].layers.size(); ++l) {
        out.stacks[s].layers[l].weight =
            stacks[s].layers[l].weight.detach().set_requires_grad(true);
        out.stacks[s].layers[l].attention =
            stacks[s].layers[l].attention.detach().set_requires_grad(true);
        out.stacks[s].layers[l].prelu_slope =
            stacks[s].layers[l].prelu_slope.detach().set_requires_grad(true);
      }
    }
    out.fusion = fusion.detach().set_requires_grad(true);
    return out;
  }
};

template <typename T>
struct EncodeResult {
  Tensor<T> fused;                     // num_nodes x d
  std::array<Tensor<T>, 4> per_stack;  // num_nodes x d each
};

// Runs all four stacks over the two views and fuses the outputs. Both views
// must wrap the same base graph; `restrict_to` limits message passing to a
// subset of edge ids (the training split).
template <typename T>
EncodeResult<T> encode(const AugmentedView& view1, const AugmentedView& view2,
                       EncoderState<T>& state, const EncoderConfig& cfg,
                       const std::vector<std::uint32_t>* restrict_to = nullptr) {
  if (&view1.base() != &view2.base()) {
    throw TensorError("encode: views disagree on the base graph");
  }
  const std::array<SignAdjacency, 4> adjacency{
      build_sign_adjacency(view1, Sign::Positive, restrict_to),
      build_sign_adjacency(view1, Sign::Negative, restrict_to),
      build_sign_adjacency(view2, Sign::Positive, restrict_to),
      build_sign_adjacency(view2, Sign::Negative, restrict_to),
  };
  Tensor<T> table =
      concat<T>({state.student_table, state.question_table}, 0);
  EncodeResult<T> result;
  for (std::size_t s = 0; s < 4; ++s) {
    Tensor<T> h = table;
    for (auto& layer : state.stacks[s].layers) {
      auto layer_out = gat_layer(h, adjacency[s], layer, cfg.leaky_slope);
      h = prelu(layer_out.features, layer.prelu_slope);
    }
    result.per_stack[s] = h;
  }
  Tensor<T> stacked = concat<T>({result.per_stack[0], result.per_stack[1],
                                 result.per_stack[2], result.per_stack[3]},
                                1);
  result.fused = matmul(stacked, state.fusion);
  return result;
}

}  // namespace edgesign
