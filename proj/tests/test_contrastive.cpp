#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "edgesign/contrastive.hpp"
#include "support/oracles.hpp"

using namespace edgesign;
using Catch::Approx;

namespace {

template <typename T>
Tensor<T> rows(const std::vector<std::vector<T>>& data) {
  std::vector<T> flat;
  for (const auto& row : data) flat.insert(flat.end(), row.begin(), row.end());
  return Tensor<T>::from_vector({data.size(), data.front().size()},
                                std::move(flat));
}

template <typename T>
ContrastiveBatch<T> batch_from(const std::vector<std::vector<T>>& fused,
                               const std::vector<std::vector<T>>& v1p,
                               const std::vector<std::vector<T>>& v1n,
                               const std::vector<std::vector<T>>& v2p,
                               const std::vector<std::vector<T>>& v2n,
                               double tau, double alpha) {
  ContrastiveBatch<T> batch;
  batch.fused = rows(fused);
  batch.per_stack[kView1Pos] = rows(v1p);
  batch.per_stack[kView1Neg] = rows(v1n);
  batch.per_stack[kView2Pos] = rows(v2p);
  batch.per_stack[kView2Neg] = rows(v2n);
  batch.temperature = tau;
  batch.alpha = alpha;
  return batch;
}

std::vector<std::vector<double>> random_rows(std::mt19937& rng, std::size_t n,
                                             std::size_t d) {
  std::uniform_real_distribution<double> dist(-1.5, 1.5);
  std::vector<std::vector<double>> out(n, std::vector<double>(d));
  for (auto& row : out) {
    for (auto& v : row) v = dist(rng);
  }
  return out;
}

}  // namespace

TEST_CASE("two-node inter-view loss with sim 1 matched and sim 0 crossed") {
  // matched pairs are identical unit vectors, cross pairs are orthogonal
  std::vector<std::vector<double>> id{{1.0, 0.0}, {0.0, 1.0}};
  auto batch = batch_from<double>(id, id, id, id, id, /*tau=*/1.0, 0.8);
  // per node: -log(exp(1) / exp(0)) = -1
  CHECK(inter_view_loss(batch, Sign::Positive).item() ==
        Approx(-1.0).margin(1e-9));
  CHECK(inter_view_loss(batch, Sign::Negative).item() ==
        Approx(-1.0).margin(1e-9));
}

TEST_CASE("identical embeddings give inter-view loss log(I-1)") {
  for (std::size_t n : {2u, 4u, 8u}) {
    std::vector<std::vector<double>> same(n, {0.4, -1.1, 0.9});
    auto batch = batch_from<double>(same, same, same, same, same, 0.5, 0.8);
    CHECK(inter_view_loss(batch, Sign::Positive).item() ==
          Approx(std::log(double(n - 1))).margin(1e-9));
  }
}

TEST_CASE("intra-view loss closed forms") {
  // fused aligned with both positives, orthogonal to both negatives, tau = 1:
  // -log(2e / 2) = -1
  std::vector<std::vector<double>> id{{1.0, 0.0}, {0.0, 1.0}};
  std::vector<std::vector<double>> ortho{{0.0, 1.0}, {1.0, 0.0}};
  auto batch = batch_from<double>(id, id, ortho, id, ortho, 1.0, 0.8);
  CHECK(intra_view_loss(batch).item() == Approx(-1.0).margin(1e-9));

  // positives identical to negatives: ratio 1, loss 0
  auto batch_same = batch_from<double>(id, id, id, id, id, 0.7, 0.8);
  CHECK(intra_view_loss(batch_same).item() == Approx(0.0).margin(1e-9));
}

TEST_CASE("double-loop oracle equivalence on random small batches") {
  std::mt19937 rng(71);
  for (int round = 0; round < 8; ++round) {
    const std::size_t n = 2 + round % 4;  // I <= 5
    const std::size_t d = 3;
    auto fused = random_rows(rng, n, d);
    auto v1p = random_rows(rng, n, d);
    auto v1n = random_rows(rng, n, d);
    auto v2p = random_rows(rng, n, d);
    auto v2n = random_rows(rng, n, d);
    const double tau = 0.4 + 0.2 * (round % 3);
    auto batch = batch_from<double>(fused, v1p, v1n, v2p, v2n, tau, 0.8);

    CHECK(inter_view_loss(batch, Sign::Positive).item() ==
          Approx(oracles::inter_view_loss_loop(v1p, v2p, tau)).margin(1e-5));
    CHECK(inter_view_loss(batch, Sign::Negative).item() ==
          Approx(oracles::inter_view_loss_loop(v1n, v2n, tau)).margin(1e-5));
    CHECK(intra_view_loss(batch).item() ==
          Approx(oracles::intra_view_loss_loop(fused, {v1p, v2p}, {v1n, v2n},
                                               tau))
              .margin(1e-5));
  }
}

TEST_CASE("combined loss interpolates between inter and intra") {
  std::mt19937 rng(19);
  auto fused = random_rows(rng, 4, 3);
  auto v1p = random_rows(rng, 4, 3);
  auto v1n = random_rows(rng, 4, 3);
  auto v2p = random_rows(rng, 4, 3);
  auto v2n = random_rows(rng, 4, 3);

  auto at_alpha = [&](double alpha) {
    return batch_from<double>(fused, v1p, v1n, v2p, v2n, 0.5, alpha);
  };
  auto inter_sum = inter_view_loss(at_alpha(0.0), Sign::Positive).item() +
                   inter_view_loss(at_alpha(0.0), Sign::Negative).item();
  const double intra = intra_view_loss(at_alpha(0.0)).item();

  CHECK(combined_loss(at_alpha(0.0)).item() == Approx(inter_sum).margin(1e-9));
  CHECK(combined_loss(at_alpha(1.0)).item() == Approx(intra).margin(1e-9));
  // the paper's operating point
  CHECK(combined_loss(at_alpha(0.8)).item() ==
        Approx(0.2 * inter_sum + 0.8 * intra).margin(1e-9));
}

TEST_CASE("losses are invariant to positive rescaling of embeddings") {
  std::mt19937 rng(23);
  auto fused = random_rows(rng, 5, 4);
  auto v1p = random_rows(rng, 5, 4);
  auto v1n = random_rows(rng, 5, 4);
  auto v2p = random_rows(rng, 5, 4);
  auto v2n = random_rows(rng, 5, 4);
  auto scaled = [](std::vector<std::vector<double>> vecs) {
    for (auto& row : vecs) {
      for (auto& v : row) v *= 3.7;
    }
    return vecs;
  };
  auto batch = batch_from<double>(fused, v1p, v1n, v2p, v2n, 0.5, 0.8);
  auto batch_scaled =
      batch_from<double>(scaled(fused), scaled(v1p), scaled(v1n), scaled(v2p),
                         scaled(v2n), 0.5, 0.8);
  CHECK(combined_loss(batch).item() ==
        Approx(combined_loss(batch_scaled).item()).margin(1e-5));
}

TEST_CASE("inter-view loss strictly decreases as the matched pair aligns") {
  // rotate node 0's view-2 embedding toward its view-1 embedding
  double previous = std::numeric_limits<double>::infinity();
  for (double angle : {1.2, 0.8, 0.4, 0.1}) {
    std::vector<std::vector<double>> v1{{1.0, 0.0}, {-0.6, 0.8}};
    std::vector<std::vector<double>> v2{{std::cos(angle), std::sin(angle)},
                                        {-0.6, 0.8}};
    auto batch = batch_from<double>(v1, v1, v1, v2, v2, 0.5, 0.8);
    const double loss = inter_view_loss(batch, Sign::Positive).item();
    CHECK(loss < previous);
    previous = loss;
  }
}

TEST_CASE("contrastive losses pass the finite-difference check") {
  std::mt19937 rng(101);
  auto make_param = [&rng](std::size_t n, std::size_t d) {
    return rows(random_rows(rng, n, d)).set_requires_grad(true);
  };
  ContrastiveBatch<double> batch;
  batch.fused = make_param(4, 3);
  for (auto& stack : batch.per_stack) stack = make_param(4, 3);
  batch.temperature = 0.5;
  batch.alpha = 0.8;

  std::vector<Tensor<double>> params{batch.fused};
  for (auto& stack : batch.per_stack) params.push_back(stack);

  auto report = oracles::gradient_check(
      params, [&] { return combined_loss(batch); });
  INFO("max rel error " << report.max_rel_error);
  CHECK(report.max_rel_error < 1e-3);
}

TEST_CASE("batch validation errors") {
  std::vector<std::vector<double>> one{{1.0, 0.0}};
  auto tiny = batch_from<double>(one, one, one, one, one, 0.5, 0.8);
  CHECK_THROWS_AS(inter_view_loss(tiny, Sign::Positive), TensorError);

  std::vector<std::vector<double>> two{{1.0, 0.0}, {0.0, 1.0}};
  auto bad_tau = batch_from<double>(two, two, two, two, two, 0.0, 0.8);
  CHECK_THROWS_AS(intra_view_loss(bad_tau), TensorError);
  auto bad_alpha = batch_from<double>(two, two, two, two, two, 0.5, 1.2);
  CHECK_THROWS_AS(combined_loss(bad_alpha), TensorError);
}
