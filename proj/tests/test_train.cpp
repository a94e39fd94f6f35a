#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "edgesign/edgesign.hpp"
#include "support/oracles.hpp"
#include "support/util.hpp"

using namespace edgesign;
using Catch::Approx;

namespace {

SignedBipartiteGraph six_node_toy() {
  // 3 students x 3 questions with multi-neighbor nodes under both signs
  return build_graph({{"s0", "q0", true},
                      {"s0", "q1", true},
                      {"s1", "q0", true},
                      {"s1", "q1", false},
                      {"s1", "q2", true},
                      {"s2", "q1", false},
                      {"s2", "q2", false},
                      {"s0", "q2", false}});
}

TrainConfig small_config(std::size_t dim = 8, std::size_t epochs = 40) {
  TrainConfig config;
  config.encoder.dim = dim;
  config.encoder.layers = 2;
  config.epochs = epochs;
  config.batch_size = 128;
  config.use_semantic = false;
  return config;
}

SemanticTable table_for(const SignedBipartiteGraph& g,
                        const SyntheticData& data, std::size_t dim,
                        const std::vector<std::uint32_t>& train_edges) {
  return build_semantic_table(g, data.knowledge_points, data.vectors, dim,
                              questions_in_edges(g, train_edges));
}

}  // namespace

TEST_CASE("full joint loss passes the finite-difference check on a toy graph") {
  auto g = six_node_toy();
  EncoderConfig cfg;
  cfg.dim = 3;
  cfg.layers = 2;
  std::mt19937 rng(5);
  auto encoder =
      EncoderState<double>::init(g.num_students(), g.num_questions(), cfg, rng);
  auto predictor = PredictorState<double>::init(cfg.dim, true, rng);
  auto semantic = Tensor<double>::randn({g.num_questions(), cfg.dim}, rng);

  std::vector<std::uint32_t> train_edges(g.num_edges());
  std::iota(train_edges.begin(), train_edges.end(), 0u);
  const auto labels = [&] {
    std::vector<int> out;
    for (auto e : train_edges) {
      out.push_back(g.edge(e).sign == Sign::Positive ? 1 : 0);
    }
    return out;
  }();
  std::vector<std::uint32_t> batch(g.num_nodes());
  std::iota(batch.begin(), batch.end(), 0u);
  auto view1 = augment(g, 0.3, 11);
  auto view2 = augment(g, 0.3, 12);

  std::vector<Tensor<double>> params = encoder.parameters();
  for (auto& p : predictor.parameters()) params.push_back(p);

  auto loss_fn = [&]() {
    return build_epoch_loss(g, view1, view2, encoder, predictor, cfg, semantic,
                            train_edges, labels, {batch}, 0.5, 0.8, 0.3, 1.2,
                            0.8)
        .total;
  };
  auto report = oracles::gradient_check(params, loss_fn);
  INFO("max rel error " << report.max_rel_error << " over " << report.checked
                        << " parameters");
  CHECK(report.max_rel_error < 1e-3);
}

TEST_CASE("training loss drops on planted synthetic data") {
  SynthConfig synth;
  synth.num_students = 40;
  synth.num_questions = 20;
  synth.density = 0.4;
  synth.noise = 0.0;
  synth.seed = 9;
  auto data = generate_synthetic(synth);
  auto g = build_graph(data.records);
  auto split = make_split(g, {0.85, 0.05, 0.10}, SplitMode::Standard, 1);

  auto config = small_config(8, 50);
  auto result = train(g, split, config);
  REQUIRE(result.history.size() == 50);
  CHECK(result.history[49].total_loss < result.history[0].total_loss);
}

TEST_CASE("identical config and seed reproduce the history bit for bit") {
  std::mt19937 rng(3);
  auto g = testutil::random_graph(rng, 14, 12, 0.5);
  auto split = make_split(g, {0.8, 0.1, 0.1}, SplitMode::Standard, 4);
  auto config = small_config(6, 8);
  config.seed = 21;

  auto a = train(g, split, config);
  auto b = train(g, split, config);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].total_loss == b.history[i].total_loss);
    CHECK(a.history[i].ce_loss == b.history[i].ce_loss);
    CHECK(a.history[i].cl_loss == b.history[i].cl_loss);
  }
  auto ma = evaluate_edges(g, a.encoder, a.predictor, config.encoder, nullptr,
                           split.train, split.test);
  auto mb = evaluate_edges(g, b.encoder, b.predictor, config.encoder, nullptr,
                           split.train, split.test);
  CHECK(metrics_to_json(ma).dump() == metrics_to_json(mb).dump());
}

TEST_CASE("beta = 0 training matches a contrastive-free reference loop") {
  std::mt19937 rng(8);
  auto g = testutil::random_graph(rng, 12, 10, 0.5);
  auto split = make_split(g, {0.9, 0.0, 0.1}, SplitMode::Standard, 2);
  auto config = small_config(6, 6);
  config.beta = 0.0;
  config.seed = 33;

  auto result = train(g, split, config);

  // reference loop: same seed derivation, supervised loss only
  std::mt19937 seeder(static_cast<std::mt19937::result_type>(config.seed));
  std::mt19937 init_rng(seeder());
  std::mt19937 batch_rng(seeder());
  auto encoder = EncoderState<float>::init(g.num_students(), g.num_questions(),
                                           config.encoder, init_rng);
  auto predictor =
      PredictorState<float>::init(config.encoder.dim, false, init_rng);
  std::vector<Tensor<float>> params = encoder.parameters();
  for (auto& p : predictor.parameters()) params.push_back(p);
  Adam<float> optimizer(params, {config.lr, config.adam_beta1,
                                 config.adam_beta2, config.adam_eps});
  const auto [w_pos, w_neg] = class_weights(g, split.train);
  std::vector<int> labels;
  for (auto e : split.train) {
    labels.push_back(g.edge(e).sign == Sign::Positive ? 1 : 0);
  }
  std::vector<std::uint32_t> all_nodes(g.num_nodes());
  std::iota(all_nodes.begin(), all_nodes.end(), 0u);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::uint64_t seed1 = seeder();
    const std::uint64_t seed2 = seeder();
    auto view1 = augment(g, config.flip_p, seed1);
    auto view2 = augment(g, config.flip_p, seed2);
    std::shuffle(all_nodes.begin(), all_nodes.end(), batch_rng);

    auto enc = encode(view1, view2, encoder, config.encoder, &split.train);
    std::vector<std::uint32_t> s_idx, q_idx;
    for (auto e : split.train) {
      s_idx.push_back(g.edge(e).student);
      q_idx.push_back(std::uint32_t(g.num_students()) + g.edge(e).question);
    }
    auto probs = predict_edges(gather_rows(enc.fused, s_idx),
                               gather_rows(enc.fused, q_idx), predictor);
    auto ce = ce_loss(probs, labels, w_pos, w_neg);
    CHECK(std::fabs(double(ce.item()) - result.history[epoch].ce_loss) <=
          1e-6);
    backward(ce);
    optimizer.step();
  }
}

TEST_CASE("divergence aborts with the offending epoch in the message") {
  std::mt19937 rng(12);
  auto g = testutil::random_graph(rng, 10, 8, 0.6);
  auto split = make_split(g, {0.9, 0.0, 0.1}, SplitMode::Standard, 3);
  auto config = small_config(6, 10);
  config.lr = 1e30;  // guarantees overflow after the first step
  CHECK_THROWS_WITH(train(g, split, config),
                    Catch::Matchers::ContainsSubstring("epoch"));
}

TEST_CASE("audit rejects splits that are not partitions") {
  std::mt19937 rng(14);
  auto g = testutil::random_graph(rng, 8, 8, 0.5);
  auto split = make_split(g, {0.8, 0.1, 0.1}, SplitMode::Standard, 5);
  REQUIRE_NOTHROW(audit_split(g, split));

  auto corrupt = split;
  corrupt.train.push_back(corrupt.test.front());  // duplicated edge
  CHECK_THROWS_AS(audit_split(g, corrupt), TrainError);

  auto missing = split;
  missing.val.clear();  // unassigned edges
  if (!split.val.empty()) {
    CHECK_THROWS_AS(audit_split(g, missing), TrainError);
  }
}

TEST_CASE("cold start training never touches held-question edges") {
  SynthConfig synth;
  synth.num_students = 30;
  synth.num_questions = 15;
  synth.density = 0.5;
  synth.seed = 4;
  auto data = generate_synthetic(synth);
  auto g = build_graph(data.records);

  auto config = small_config(6, 5);
  config.use_semantic = true;
  auto cold = run_cold_start(g, config, data.knowledge_points, data.vectors);

  std::vector<std::uint8_t> held(g.num_questions(), 0);
  for (auto q : cold.split.held_questions) held[q] = 1;
  for (auto e : cold.split.train) {
    CHECK(held[g.edge(e).question] == 0);
  }
  for (auto e : cold.split.test) {
    CHECK(held[g.edge(e).question] == 1);
  }
  CHECK(cold.semantic_coverage == 1.0);  // synthetic corpus covers everything
  CHECK(cold.metrics.num_edges == cold.split.test.size());
}

TEST_CASE("validation tracking returns the best checkpoint") {
  std::mt19937 rng(6);
  auto g = testutil::random_graph(rng, 16, 14, 0.5);
  auto split = make_split(g, {0.7, 0.15, 0.15}, SplitMode::Standard, 6);
  auto config = small_config(6, 12);
  auto result = train(g, split, config);

  REQUIRE(result.best_val_f1.has_value());
  double best_seen = -1.0;
  for (const auto& h : result.history) {
    REQUIRE(h.val_binary_f1.has_value());
    best_seen = std::max(best_seen, *h.val_binary_f1);
  }
  CHECK(*result.best_val_f1 == Approx(best_seen));
  CHECK(result.best_epoch >= 1);
  CHECK(result.best_epoch <= config.epochs);
}

TEST_CASE("synthetic generator produces exact counts at density one") {
  SynthConfig synth;
  synth.num_students = 10;
  synth.num_questions = 7;
  synth.density = 1.0;
  synth.noise = 0.0;
  synth.seed = 2;
  auto data = generate_synthetic(synth);
  CHECK(data.records.size() == 70);
  auto g = build_graph(data.records);
  CHECK(g.num_students() == 10);
  CHECK(g.num_questions() == 7);
}

TEST_CASE("synthetic generator is deterministic per seed") {
  SynthConfig synth;
  synth.num_students = 12;
  synth.num_questions = 9;
  synth.density = 0.4;
  synth.seed = 77;
  auto a = generate_synthetic(synth);
  auto b = generate_synthetic(synth);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].student_key == b.records[i].student_key);
    CHECK(a.records[i].correct == b.records[i].correct);
  }
}

TEST_CASE("synthetic signs follow the latent ability-difficulty gap") {
  SynthConfig synth;
  synth.num_students = 80;
  synth.num_questions = 50;
  synth.density = 0.5;
  synth.noise = 0.0;
  synth.seed = 10;
  auto data = generate_synthetic(synth);

  // positive rate must increase across gap terciles
  std::vector<std::pair<double, bool>> gap_sign;
  for (const auto& rec : data.records) {
    const std::size_t u = std::stoul(rec.student_key.substr(1));
    const std::size_t v = std::stoul(rec.question_key.substr(1));
    gap_sign.emplace_back(data.abilities[u] - data.difficulties[v],
                          rec.correct);
  }
  std::sort(gap_sign.begin(), gap_sign.end());
  const std::size_t third = gap_sign.size() / 3;
  auto rate = [&](std::size_t begin, std::size_t end) {
    double hits = 0;
    for (std::size_t i = begin; i < end; ++i) hits += gap_sign[i].second;
    return hits / double(end - begin);
  };
  const double low = rate(0, third);
  const double mid = rate(third, 2 * third);
  const double high = rate(2 * third, gap_sign.size());
  CHECK(low < mid);
  CHECK(mid < high);
}

TEST_CASE("biology-shaped synthetic call lands inside the binomial bound") {
  SynthConfig synth;
  synth.num_students = 761;
  synth.num_questions = 380;
  synth.density = 0.265;
  synth.seed = 1;
  auto data = generate_synthetic(synth);
  // 289180 pairs at p = 0.265: mean 76633, 6 sigma ~ 1425
  CHECK(data.records.size() >= 75208);
  CHECK(data.records.size() <= 78058);
}

TEST_CASE("semantic table: coverage flags and train-only PCA fit") {
  SynthConfig synth;
  synth.num_students = 20;
  synth.num_questions = 12;
  synth.density = 0.6;
  synth.seed = 3;
  auto data = generate_synthetic(synth);
  auto g = build_graph(data.records);

  std::vector<std::uint32_t> fit_questions;
  for (std::uint32_t q = 0; q + 2 < g.num_questions(); ++q) {
    fit_questions.push_back(q);
  }
  auto table =
      build_semantic_table(g, data.knowledge_points, data.vectors, 4,
                           fit_questions);
  CHECK(table.dim == 4);
  for (auto flag : table.available) CHECK(flag == 1);

  // perturbing a non-fit question's record must not change the projection
  auto perturbed = data.knowledge_points;
  for (auto& rec : perturbed) {
    if (rec.question_key == g.question_keys().back()) {
      rec.points = {{"filler0 filler1", 0.5}, {"filler2", 0.5}};
    }
  }
  auto table2 =
      build_semantic_table(g, perturbed, data.vectors, 4, fit_questions);
  for (std::size_t k = 0; k < table.pca.components.size(); ++k) {
    for (std::size_t j = 0; j < table.pca.in_dim; ++j) {
      CHECK(table2.pca.components[k][j] == table.pca.components[k][j]);
    }
  }

  // a question with no record stays unavailable and zero
  auto partial = data.knowledge_points;
  partial.erase(partial.begin());  // q0's record
  auto table3 =
      build_semantic_table(g, partial, data.vectors, 4, fit_questions);
  std::uint32_t q0 = 0;
  for (std::uint32_t q = 0; q < g.num_questions(); ++q) {
    if (g.question_keys()[q] == "q0") q0 = q;
  }
  CHECK(table3.available[q0] == 0);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(table3.matrix[q0 * 4 + k] == 0.0f);
  }
}

TEST_CASE("baseline trains and reports sane metrics") {
  SynthConfig synth;
  synth.num_students = 40;
  synth.num_questions = 20;
  synth.density = 0.5;
  synth.seed = 5;
  auto data = generate_synthetic(synth);
  auto g = build_graph(data.records);
  auto split = make_split(g, {0.85, 0.05, 0.10}, SplitMode::Standard, 7);
  BaselineConfig config;
  config.epochs = 50;
  auto report = baseline_random_logistic(g, split, config);
  CHECK(report.num_edges == split.test.size());
  CHECK(report.binary_f1 >= 0.0);
  CHECK(report.binary_f1 <= 1.0);
}

TEST_CASE("evaluate rejects an empty edge set") {
  std::mt19937 rng(2);
  auto g = testutil::random_graph(rng, 6, 6, 0.5);
  auto split = make_split(g, {0.9, 0.0, 0.1}, SplitMode::Standard, 1);
  auto config = small_config(4, 2);
  auto result = train(g, split, config);
  CHECK_THROWS_AS(evaluate_edges(g, result.encoder, result.predictor,
                                 config.encoder, nullptr, split.train, {}),
                  TrainError);
}

TEST_CASE("run artifacts round trip through the checkpoint") {
  SynthConfig synth;
  synth.num_students = 15;
  synth.num_questions = 10;
  synth.density = 0.6;
  synth.seed = 8;
  auto data = generate_synthetic(synth);
  auto g = build_graph(data.records);
  auto split = make_split(g, {0.8, 0.1, 0.1}, SplitMode::Standard, 9);
  auto config = small_config(4, 4);
  auto result = train(g, split, config);
  auto before = evaluate_edges(g, result.encoder, result.predictor,
                               config.encoder, nullptr, split.train,
                               split.test);

  const std::string path = "test_model_checkpoint.bin";
  save_checkpoint(path, model_named_tensors(result));

  std::mt19937 rng(999);  // fresh random states, then restored
  auto encoder = EncoderState<float>::init(g.num_students(), g.num_questions(),
                                           config.encoder, rng);
  auto predictor =
      PredictorState<float>::init(config.encoder.dim, false, rng);
  restore_model(path, encoder, predictor);
  auto after = evaluate_edges(g, encoder, predictor, config.encoder, nullptr,
                              split.train, split.test);
  CHECK(metrics_to_json(after).dump() == metrics_to_json(before).dump());
  std::remove(path.c_str());
}
