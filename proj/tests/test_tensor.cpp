#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "edgesign/checkpoint.hpp"
#include "edgesign/optim.hpp"
#include "edgesign/tensor.hpp"
#include "support/oracles.hpp"

using namespace edgesign;
using Catch::Approx;

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937& rng, double lo = 0.2,
                             double hi = 1.5) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = dist(rng);
  return Tensor<double>::from_vector(std::move(shape), std::move(data))
      .set_requires_grad(true);
}

// Gradient-checks `build` by contracting its output against a fixed random
// weighting, so every output element influences the scalar loss differently.
void check_grads(const std::string& what,
                 std::vector<Tensor<double>> params,
                 const std::function<Tensor<double>()>& build) {
  Tensor<double> probe;
  {
    NoGradGuard guard;
    probe = build();
  }
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> w(probe.numel());
  for (auto& v : w) v = dist(rng);
  Tensor<double> weights = Tensor<double>::from_vector(probe.shape(), w);
  auto loss_fn = [&]() { return sum(mul(build(), weights)); };
  auto report = oracles::gradient_check(params, loss_fn);
  INFO(what << ": max rel error " << report.max_rel_error << " over "
            << report.checked << " entries");
  CHECK(report.max_rel_error < 1e-3);
}

}  // namespace

TEST_CASE("elementwise forward values") {
  auto a = Tensor<float>::from_vector({3}, {1.0f, 2.0f, 3.0f});
  auto b = Tensor<float>::from_vector({3}, {4.0f, 5.0f, 6.0f});
  CHECK(add(a, b).values()[1] == 7.0f);
  CHECK(sub(b, a).values()[2] == 3.0f);
  CHECK(mul(a, b).values()[0] == 4.0f);
  CHECK(div(b, a).values()[1] == 2.5f);
  CHECK(add_scalar(a, 1.0).values()[0] == 2.0f);
  CHECK(mul_scalar(a, -2.0).values()[2] == -6.0f);
}

TEST_CASE("prelu matches its definition") {
  auto x = Tensor<float>::from_vector({2}, {-2.0f, 3.0f});
  auto slope = Tensor<float>::scalar(0.25f);
  auto y = prelu(x, slope);
  CHECK(y.values()[0] == Approx(-0.5));
  CHECK(y.values()[1] == Approx(3.0));
}

TEST_CASE("softmax of a constant row is uniform") {
  auto x = Tensor<float>::from_vector({3}, {0.0f, 0.0f, 0.0f});
  auto y = softmax(x);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(y.values()[i] == Approx(1.0 / 3.0).margin(1e-7));
  }
}

TEST_CASE("softmax rows sum to one and sigmoid stays in (0,1)") {
  std::mt19937 rng(5);
  auto x = random_tensor({4, 6}, rng, -3.0, 3.0);
  auto y = softmax(x, 1);
  for (std::size_t i = 0; i < 4; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 6; ++j) row += y.at(i, j);
    CHECK(row == Approx(1.0).margin(1e-6));
  }
  auto s = sigmoid(x);
  for (std::size_t i = 0; i < s.numel(); ++i) {
    CHECK(s.values()[i] > 0.0);
    CHECK(s.values()[i] < 1.0);
  }
}

TEST_CASE("cosine similarity of a vector with itself is 1") {
  auto v = Tensor<float>::from_vector({4}, {0.3f, -1.2f, 2.0f, 0.7f});
  CHECK(cosine_similarity(v, v).item() == Approx(1.0).margin(1e-6));
}

TEST_CASE("shape mismatches name both shapes") {
  auto a = Tensor<float>::zeros({2, 3});
  auto b = Tensor<float>::zeros({3, 3});
  CHECK_THROWS_WITH(add(a, b), Catch::Matchers::ContainsSubstring("[2, 3]") &&
                                   Catch::Matchers::ContainsSubstring("[3, 3]"));
  CHECK_THROWS_WITH(matmul(a, Tensor<float>::zeros({2, 2})),
                    Catch::Matchers::ContainsSubstring("[2, 3]"));
}

TEST_CASE("non-finite outputs are rejected") {
  auto a = Tensor<float>::from_vector({2}, {-1.0f, 2.0f});
  CHECK_THROWS_AS(log(a), TensorError);
  auto zero = Tensor<float>::from_vector({1}, {0.0f});
  auto one = Tensor<float>::from_vector({1}, {1.0f});
  CHECK_THROWS_AS(div(one, zero), TensorError);
}

TEST_CASE("backward on sum of squares") {
  auto w = Tensor<float>::from_vector({3}, {1.0f, 2.0f, 3.0f});
  w.set_requires_grad(true);
  auto loss = sum(mul(w, w));
  backward(loss);
  CHECK(w.grad()[0] == Approx(2.0));
  CHECK(w.grad()[1] == Approx(4.0));
  CHECK(w.grad()[2] == Approx(6.0));
}

TEST_CASE("backward requires a tracked scalar") {
  auto w = Tensor<float>::from_vector({2}, {1.0f, 2.0f});
  w.set_requires_grad(true);
  auto y = mul(w, w);
  CHECK_THROWS_AS(backward(y), TensorError);  // not scalar
  auto plain = Tensor<float>::scalar(1.0f);
  CHECK_THROWS_AS(backward(plain), TensorError);  // not tracked
}

TEST_CASE("detached tensors receive no grad") {
  auto w = Tensor<float>::from_vector({2}, {1.0f, 2.0f});
  w.set_requires_grad(true);
  auto d = w.detach();
  auto loss = sum(mul(d, d));
  CHECK_FALSE(loss.requires_grad());
  auto loss2 = sum(add(mul(w, w), d));
  backward(loss2);
  CHECK(w.grad()[0] == Approx(2.0));
  CHECK_FALSE(d.has_grad());
}

TEST_CASE("gradient check: every differentiable op") {
  std::mt19937 rng(42);

  SECTION("binary elementwise") {
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({3, 4}, rng);
    check_grads("add", {a, b}, [&] { return add(a, b); });
    check_grads("sub", {a, b}, [&] { return sub(a, b); });
    check_grads("mul", {a, b}, [&] { return mul(a, b); });
    check_grads("div", {a, b}, [&] { return div(a, b); });
  }

  SECTION("scalar ops") {
    auto a = random_tensor({2, 3}, rng);
    auto s = random_tensor({1}, rng);
    check_grads("add_scalar", {a}, [&] { return add_scalar(a, 0.7); });
    check_grads("mul_scalar", {a}, [&] { return mul_scalar(a, -1.3); });
    check_grads("add_scalar_tensor", {a, s},
                [&] { return add_scalar_tensor(a, s); });
  }

  SECTION("unary ops") {
    auto a = random_tensor({3, 3}, rng, 0.3, 2.0);
    check_grads("exp", {a}, [&] { return exp(a); });
    check_grads("log", {a}, [&] { return log(a); });
    check_grads("sqrt", {a}, [&] { return sqrt(a); });
    check_grads("sigmoid", {a}, [&] { return sigmoid(a); });
    auto signed_a = random_tensor({3, 3}, rng, -2.0, 2.0);
    check_grads("leaky_relu", {signed_a},
                [&] { return leaky_relu(signed_a, 0.2); });
    auto slope = random_tensor({1}, rng, 0.1, 0.5);
    check_grads("prelu", {signed_a, slope},
                [&] { return prelu(signed_a, slope); });
  }

  SECTION("shape ops") {
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({2, 4}, rng);
    auto c = random_tensor({3, 2}, rng);
    check_grads("transpose", {a}, [&] { return transpose(a); });
    check_grads("concat axis0", {a, b},
                [&] { return concat<double>({a, b}, 0); });
    check_grads("concat axis1", {a, c},
                [&] { return concat<double>({a, c}, 1); });
    check_grads("slice_rows", {a}, [&] { return slice_rows(a, 1, 3); });
  }

  SECTION("reductions and matmul") {
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 2}, rng);
    check_grads("sum", {a}, [&] { return sum(a); });
    check_grads("mean", {a}, [&] { return mean(a); });
    check_grads("matmul", {a, b}, [&] { return matmul(a, b); });
  }

  SECTION("softmax") {
    auto a = random_tensor({3, 4}, rng, -2.0, 2.0);
    check_grads("softmax rows", {a}, [&] { return softmax(a, 1); });
    check_grads("softmax cols", {a}, [&] { return softmax(a, 0); });
  }

  SECTION("row and segment ops") {
    auto x = random_tensor({5, 3}, rng);
    std::vector<std::uint32_t> idx{4, 0, 2, 2, 1};
    check_grads("gather_rows", {x}, [&] { return gather_rows(x, idx); });
    std::vector<std::size_t> offsets{0, 2, 2, 5};
    check_grads("segment_sum", {x},
                [&] { return segment_sum(x, offsets); });
    auto logits = random_tensor({5, 1}, rng, -1.5, 1.5);
    check_grads("segment_softmax", {logits},
                [&] { return segment_softmax(logits, offsets); });
    auto w = random_tensor({5, 1}, rng, -1.0, 1.0);
    check_grads("scale_rows", {x, w}, [&] { return scale_rows(x, w); });
    check_grads("rows_l2_normalize", {x},
                [&] { return rows_l2_normalize(x); });
    auto y = random_tensor({5, 3}, rng);
    check_grads("rowwise_dot", {x, y}, [&] { return rowwise_dot(x, y); });
    auto sq = random_tensor({4, 4}, rng, -1.0, 1.0);
    check_grads("diag", {sq}, [&] { return diag(sq); });
    check_grads("logsumexp_rows", {sq},
                [&] { return logsumexp_rows(sq); });
    check_grads("logsumexp_rows excl diag", {sq},
                [&] { return logsumexp_rows(sq, true); });
  }

  SECTION("losses and composites") {
    auto logits = random_tensor({6, 1}, rng, -2.0, 2.0);
    std::vector<int> labels{1, 0, 1, 1, 0, 0};
    check_grads("weighted_bce via sigmoid", {logits}, [&] {
      return weighted_bce(sigmoid(logits), labels, 0.8, 1.6);
    });
    auto u = random_tensor({4}, rng, -1.5, 1.5);
    auto v = random_tensor({4}, rng, -1.5, 1.5);
    check_grads("cosine_similarity", {u, v},
                [&] { return cosine_similarity(u, v); });
  }
}

TEST_CASE("weighted_bce forward values") {
  auto half = Tensor<double>::from_vector({4, 1}, {0.5, 0.5, 0.5, 0.5});
  std::vector<int> labels{1, 0, 1, 0};
  CHECK(weighted_bce(half, labels, 1.0, 1.0).item() ==
        Approx(std::log(2.0)).margin(1e-9));
  auto perfect =
      Tensor<double>::from_vector({2, 1}, {1.0 - 1e-7, 1e-7});
  CHECK(weighted_bce(perfect, {1, 0}, 1.0, 1.0).item() ==
        Approx(0.0).margin(1e-6));
  CHECK_THROWS_AS(weighted_bce(Tensor<double>::zeros({0, 1}),
                               std::vector<int>{}, 1.0, 1.0),
                  TensorError);
}

TEST_CASE("adam first step matches the hand-computed update") {
  auto p = Tensor<float>::scalar(1.0f);
  p.set_requires_grad(true);
  Adam<float> opt({p}, {0.1});
  auto loss = sum(p);  // grad = 1
  backward(loss);
  opt.step();
  CHECK(p.values()[0] ==
        Approx(oracles::adam_first_step(1.0, 1.0, 0.1)).margin(1e-6));
  CHECK(p.values()[0] == Approx(0.9).margin(1e-6));
}

TEST_CASE("adam leaves parameters alone on zero grad") {
  auto p = Tensor<float>::scalar(2.0f);
  p.set_requires_grad(true);
  Adam<float> opt({p}, {0.1});
  auto loss = sum(mul_scalar(p, 0.0));
  backward(loss);
  opt.step();
  CHECK(p.values()[0] == 2.0f);
}

TEST_CASE("adam updates identical parameters identically") {
  auto a = Tensor<float>::from_vector({2}, {0.5f, 0.5f});
  auto b = Tensor<float>::from_vector({2}, {0.5f, 0.5f});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  Adam<float> opt({a, b}, {0.05});
  for (int i = 0; i < 3; ++i) {
    auto loss = add(sum(mul(a, a)), sum(mul(b, b)));
    backward(loss);
    opt.step();
  }
  CHECK(a.values()[0] == b.values()[0]);
  CHECK(a.values()[1] == b.values()[1]);
}

TEST_CASE("adam rejects parameters with no populated grad") {
  auto p = Tensor<float>::scalar(1.0f);
  p.set_requires_grad(true);
  Adam<float> opt({p}, {0.1});
  CHECK_THROWS_AS(opt.step(), TensorError);
}

TEST_CASE("identical seeds produce bit-identical results") {
  std::mt19937 rng1(7), rng2(7);
  auto a1 = Tensor<float>::randn({4, 4}, rng1);
  auto a2 = Tensor<float>::randn({4, 4}, rng2);
  for (std::size_t i = 0; i < a1.numel(); ++i) {
    CHECK(a1.values()[i] == a2.values()[i]);
  }
  auto y1 = softmax(matmul(a1, a1), 1);
  auto y2 = softmax(matmul(a2, a2), 1);
  for (std::size_t i = 0; i < y1.numel(); ++i) {
    CHECK(y1.values()[i] == y2.values()[i]);
  }
}

TEST_CASE("checkpoint round trip preserves names, shapes and values") {
  std::mt19937 rng(3);
  NamedTensors<float> tensors;
  tensors.emplace_back("alpha", Tensor<float>::randn({3, 2}, rng));
  tensors.emplace_back("beta", Tensor<float>::randn({5}, rng));
  const std::string path = "test_checkpoint.bin";
  save_checkpoint(path, tensors);
  auto loaded = load_checkpoint<float>(path);
  REQUIRE(loaded.size() == 2);
  REQUIRE(loaded.count("alpha") == 1);
  CHECK(loaded.at("alpha").shape() == Shape{3, 2});
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(loaded.at("alpha").values()[i] == tensors[0].second.values()[i]);
  }
  CHECK(loaded.at("beta").shape() == Shape{5});
  std::remove(path.c_str());
}
