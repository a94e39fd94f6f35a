#pragma once

// Contrastive objective over the encoder outputs: inter-view InfoNCE per
// sign, intra-view positive-vs-negative contrast, and their weighted
// combination.

#include <cstdint>
#include <vector>

#include "edgesign/encoder.hpp"
#include "edgesign/tensor.hpp"

namespace edgesign {

template <typename T>
struct ContrastiveBatch {
  Tensor<T> fused;                     // I x d
  std::array<Tensor<T>, 4> per_stack;  // I x d each, StackIndex order
  double temperature = 0.5;
  double alpha = 0.8;

  std::size_t size() const { return fused.rows(); }
};

template <typename T>
ContrastiveBatch<T> make_contrastive_batch(
    const EncodeResult<T>& enc, const std::vector<std::uint32_t>& node_ids,
    double temperature, double alpha) {
  ContrastiveBatch<T> batch;
  batch.fused = gather_rows(enc.fused, node_ids);
  for (std::size_t s = 0; s < 4; ++s) {
    batch.per_stack[s] = gather_rows(enc.per_stack[s], node_ids);
  }
  batch.temperature = temperature;
  batch.alpha = alpha;
  return batch;
}

namespace detail {

template <typename T>
void validate_batch(const ContrastiveBatch<T>& batch) {
  if (batch.temperature <= 0.0) {
    throw TensorError("contrastive: temperature must be positive");
  }
  if (batch.size() < 2) {
    throw TensorError("contrastive: batch needs at least 2 nodes");
  }
  if (!(batch.alpha >= 0.0 && batch.alpha <= 1.0)) {
    throw TensorError("contrastive: alpha must be in [0, 1]");
  }
}

}  // namespace detail

// InfoNCE across the two views for one sign: each node's view-1 embedding is
// pulled toward its view-2 counterpart and contrasted against the other
// view-2 embeddings in the batch (the matched term is excluded from the
// denominator).
template <typename T>
Tensor<T> inter_view_loss(const ContrastiveBatch<T>& batch, Sign sign) {
  detail::validate_batch(batch);
  const std::size_t a = sign == Sign::Positive ? kView1Pos : kView1Neg;
  const std::size_t b = sign == Sign::Positive ? kView2Pos : kView2Neg;
  Tensor<T> z1 = rows_l2_normalize(batch.per_stack[a]);
  Tensor<T> z2 = rows_l2_normalize(batch.per_stack[b]);
  Tensor<T> sims =
      mul_scalar(matmul(z1, transpose(z2)), 1.0 / batch.temperature);
  Tensor<T> matched = diag(sims);
  Tensor<T> denom = logsumexp_rows(sims, /*exclude_diag=*/true);
  return mean(sub(denom, matched));
}

// Intra-view contrast of the fused embedding against the per-view positive
// encoder outputs (numerator) and negative encoder outputs (denominator).
template <typename T>
Tensor<T> intra_view_loss(const ContrastiveBatch<T>& batch) {
  detail::validate_batch(batch);
  Tensor<T> z = rows_l2_normalize(batch.fused);
  auto view_sims = [&](std::size_t stack) {
    return mul_scalar(
        rowwise_dot(z, rows_l2_normalize(batch.per_stack[stack])),
        1.0 / batch.temperature);
  };
  Tensor<T> pos =
      concat<T>({view_sims(kView1Pos), view_sims(kView2Pos)}, 1);  // I x 2
  Tensor<T> neg = concat<T>({view_sims(kView1Neg), view_sims(kView2Neg)}, 1);
  return mean(sub(logsumexp_rows(neg), logsumexp_rows(pos)));
}

// (1 - alpha) * (inter+ + inter-) + alpha * intra.
template <typename T>
Tensor<T> combined_loss(const ContrastiveBatch<T>& batch) {
  detail::validate_batch(batch);
  Tensor<T> inter = add(inter_view_loss(batch, Sign::Positive),
                        inter_view_loss(batch, Sign::Negative));
  Tensor<T> intra = intra_view_loss(batch);
  return add(mul_scalar(inter, 1.0 - batch.alpha),
             mul_scalar(intra, batch.alpha));
}

}  // namespace edgesign
