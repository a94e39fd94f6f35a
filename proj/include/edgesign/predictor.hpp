#pragma once

// Question fusion, sign prediction, and the supervised losses. The question
// path concatenates the structural embedding with the semantic embedding and
// projects back to d; with the semantic toggle off it uses the structural
// embedding directly.

#include <cstdint>
#include <random>
#include <vector>

#include "edgesign/checkpoint.hpp"
#include "edgesign/tensor.hpp"

namespace edgesign {

template <typename T>
struct PredictorState {
  Tensor<T> fuse_weight;  // 2d x d
  Tensor<T> mlp_weight;   // 2d x 1
  Tensor<T> mlp_bias;     // {1}
  bool use_semantic = true;

  static PredictorState init(std::size_t dim, bool use_semantic,
                             std::mt19937& rng) {
    PredictorState state;
    const double scale = 1.0 / std::sqrt(2.0 * double(dim));
    state.fuse_weight =
        Tensor<T>::randn({2 * dim, dim}, rng, scale).set_requires_grad(true);
    state.mlp_weight = Tensor<T>::randn({2 * dim, std::size_t(1)}, rng, scale)
                           .set_requires_grad(true);
    state.mlp_bias = Tensor<T>::scalar(T(0));
    state.mlp_bias.set_requires_grad(true);
    state.use_semantic = use_semantic;
    return state;
  }

  std::vector<Tensor<T>> parameters() {
    if (use_semantic) return {fuse_weight, mlp_weight, mlp_bias};
    return {mlp_weight, mlp_bias};
  }

  NamedTensors<T> named_parameters() {
    NamedTensors<T> out;
    out.emplace_back("predictor.fuse_weight", fuse_weight);
    out.emplace_back("predictor.mlp_weight", mlp_weight);
    out.emplace_back("predictor.mlp_bias", mlp_bias);
    return out;
  }

  PredictorState clone() const {
    PredictorState out;
    out.fuse_weight = fuse_weight.detach().set_requires_grad(true);
    out.mlp_weight = mlp_weight.detach().set_requires_grad(true);
    out.mlp_bias = mlp_bias.detach().set_requires_grad(true);
    out.use_semantic = use_semantic;
    return out;
  }
};

// q_v = (v || w) W_q, applied row-wise to batches of question embeddings.
template <typename T>
Tensor<T> fuse_questions(const Tensor<T>& structural, const Tensor<T>& semantic,
                         const PredictorState<T>& state) {
  if (!state.use_semantic) return structural;
  if (structural.ndim() != 2 || !semantic.defined() || semantic.ndim() != 2 ||
      structural.rows() != semantic.rows() ||
      structural.cols() != semantic.cols()) {
    throw TensorError("fuse_questions: shape mismatch " +
                      shape_to_string(structural.shape()) + " vs " +
                      (semantic.defined() ? shape_to_string(semantic.shape())
                                          : std::string("<none>")));
  }
  return matmul(concat<T>({structural, semantic}, 1), state.fuse_weight);
}

// Probability that the edge sign is positive: sigmoid of the single affine
// layer over [u || q_v].
template <typename T>
Tensor<T> predict_edges(const Tensor<T>& student_rows,
                        const Tensor<T>& question_rows,
                        const PredictorState<T>& state) {
  Tensor<T> joint = concat<T>({student_rows, question_rows}, 1);
  Tensor<T> logits =
      add_scalar_tensor(matmul(joint, state.mlp_weight), state.mlp_bias);
  return sigmoid(logits);
}

// Mean class-weighted cross-entropy; labels use 1 for positive edges.
template <typename T>
Tensor<T> ce_loss(const Tensor<T>& probs, const std::vector<int>& labels,
                  double w_pos, double w_neg) {
  return weighted_bce(probs, labels, w_pos, w_neg);
}

template <typename T>
Tensor<T> joint_loss(const Tensor<T>& ce, const Tensor<T>& cl, double beta) {
  return add(ce, mul_scalar(cl, beta));
}

}  // namespace edgesign
