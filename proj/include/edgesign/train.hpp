#pragma once

// Training orchestration: per epoch, resample the two augmented views,
// encode, combine the supervised cross-entropy over the training edges with
// the contrastive loss over node batches, backprop, and take an Adam step.
// Message passing and supervision are restricted to training edges; the
// structural audit below makes that checkable.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "edgesign/augment.hpp"
#include "edgesign/checkpoint.hpp"
#include "edgesign/contrastive.hpp"
#include "edgesign/encoder.hpp"
#include "edgesign/graph.hpp"
#include "edgesign/metrics.hpp"
#include "edgesign/optim.hpp"
#include "edgesign/pca.hpp"
#include "edgesign/predictor.hpp"
#include "edgesign/semantics.hpp"
#include "edgesign/tensor.hpp"
#include "edgesign/wordvec.hpp"

namespace edgesign {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t epochs = 300;
  double alpha = 0.8;    // intra- vs inter-view weight in the combined loss
  double beta = 5e-4;    // contrastive weight in the joint loss
  double flip_p = 0.1;   // augmentation sign-flip probability
  double tau = 0.5;      // contrastive temperature
  std::size_t batch_size = 512;
  double lr = 5e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool use_semantic = true;
  EncoderConfig encoder;
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"epochs", c.epochs},
                        {"alpha", c.alpha},
                        {"beta", c.beta},
                        {"flip_p", c.flip_p},
                        {"tau", c.tau},
                        {"batch_size", c.batch_size},
                        {"lr", c.lr},
                        {"adam_beta1", c.adam_beta1},
                        {"adam_beta2", c.adam_beta2},
                        {"adam_eps", c.adam_eps},
                        {"seed", c.seed},
                        {"use_semantic", c.use_semantic},
                        {"dim", c.encoder.dim},
                        {"layers", c.encoder.layers},
                        {"leaky_slope", c.encoder.leaky_slope},
                        {"prelu_init", c.encoder.prelu_init}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.flip_p = j.at("flip_p").get<double>();
  c.tau = j.at("tau").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.use_semantic = j.at("use_semantic").get<bool>();
  c.encoder.dim = j.at("dim").get<std::size_t>();
  c.encoder.layers = j.at("layers").get<std::size_t>();
  c.encoder.leaky_slope = j.at("leaky_slope").get<double>();
  c.encoder.prelu_init = j.at("prelu_init").get<double>();
  return c;
}

// ---------------------------------------------------------------------------
// Semantic table
// ---------------------------------------------------------------------------

// Post-PCA semantic embedding per question, with availability flags for
// questions without usable knowledge points.
struct SemanticTable {
  std::size_t dim = 0;
  std::size_t num_questions = 0;
  std::vector<float> matrix;  // num_questions x dim
  std::vector<std::uint8_t> available;
  PcaProjection pca;

  double coverage(const std::vector<std::uint32_t>& questions) const {
    if (questions.empty()) return 0.0;
    std::size_t hit = 0;
    for (auto q : questions) hit += available.at(q) ? 1 : 0;
    return double(hit) / double(questions.size());
  }

  template <typename T>
  Tensor<T> as_tensor() const {
    std::vector<T> data(matrix.begin(), matrix.end());
    return Tensor<T>::from_vector({num_questions, dim}, std::move(data));
  }
};

// Builds raw semantic vectors from records, fits the PCA projection on the
// designated fit questions only (training questions, so held-out question
// statistics never leak into the projection), and applies it to everyone.
inline SemanticTable build_semantic_table(
    const SignedBipartiteGraph& g,
    const std::vector<KnowledgePointRecord>& records,
    const WordVectorTable& vectors, std::size_t dim,
    const std::vector<std::uint32_t>& fit_questions) {
  SemanticTable table;
  table.dim = dim;
  table.num_questions = g.num_questions();
  table.matrix.assign(g.num_questions() * dim, 0.0f);
  table.available.assign(g.num_questions(), 0);

  std::unordered_map<std::string, const KnowledgePointRecord*> by_key;
  for (const auto& rec : records) by_key[rec.question_key] = &rec;

  std::vector<std::vector<double>> raw(g.num_questions());
  for (std::uint32_t q = 0; q < g.num_questions(); ++q) {
    auto it = by_key.find(g.question_keys()[q]);
    if (it == by_key.end()) continue;
    SemanticVector vec = embed_knowledge_points(it->second->points, vectors);
    if (vec.all_terms_dropped) continue;
    raw[q] = std::move(vec.values);
    table.available[q] = 1;
  }

  std::vector<std::vector<double>> fit_set;
  for (auto q : fit_questions) {
    if (table.available.at(q)) fit_set.push_back(raw[q]);
  }
  if (fit_set.size() < 2) {
    throw SemanticsError(
        "semantic table: fewer than 2 training questions with usable "
        "knowledge points");
  }
  table.pca = fit_pca(fit_set, dim);
  for (std::uint32_t q = 0; q < g.num_questions(); ++q) {
    if (!table.available[q]) continue;
    const std::vector<double> reduced = table.pca.apply(raw[q]);
    for (std::size_t k = 0; k < dim; ++k) {
      table.matrix[q * dim + k] = float(reduced[k]);
    }
  }
  return table;
}

inline std::vector<std::uint32_t> questions_in_edges(
    const SignedBipartiteGraph& g, const std::vector<std::uint32_t>& edges) {
  std::vector<std::uint8_t> seen(g.num_questions(), 0);
  for (auto e : edges) seen[g.edge(e).question] = 1;
  std::vector<std::uint32_t> out;
  for (std::uint32_t q = 0; q < g.num_questions(); ++q) {
    if (seen[q]) out.push_back(q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Leakage audit
// ---------------------------------------------------------------------------

// Verifies the split is a partition and, in cold-start mode, that no
// held-question edge can reach train or val.
inline void audit_split(const SignedBipartiteGraph& g, const SplitPlan& plan) {
  std::vector<std::uint8_t> seen(g.num_edges(), 0);
  auto mark = [&seen](const std::vector<std::uint32_t>& ids) {
    for (auto e : ids) {
      if (e >= seen.size() || seen[e]) {
        throw TrainError("split audit: edge sets are not a partition");
      }
      seen[e] = 1;
    }
  };
  mark(plan.train);
  mark(plan.val);
  mark(plan.test);
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw TrainError("split audit: some edges are unassigned");
  }
  if (plan.mode == SplitMode::ColdStart) {
    std::vector<std::uint8_t> held(g.num_questions(), 0);
    for (auto q : plan.held_questions) held.at(q) = 1;
    for (auto e : plan.train) {
      if (held[g.edge(e).question]) {
        throw TrainError("split audit: held-question edge in train");
      }
    }
    for (auto e : plan.val) {
      if (held[g.edge(e).question]) {
        throw TrainError("split audit: held-question edge in val");
      }
    }
  }
}

// Structural check run every epoch: every edge id that feeds message passing
// or supervision must come from the training set.
inline void audit_edge_subset(const std::vector<std::uint32_t>& used,
                              const std::vector<std::uint8_t>& allowed,
                              const char* what) {
  for (auto e : used) {
    if (e >= allowed.size() || !allowed[e]) {
      throw TrainError(std::string("leakage audit: ") + what +
                       " uses edge outside the training set");
    }
  }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochStats {
  std::size_t epoch = 0;
  double total_loss = 0.0;
  double ce_loss = 0.0;
  double cl_loss = 0.0;
  std::optional<double> val_binary_f1;
};

struct TrainResult {
  EncoderState<float> encoder;
  PredictorState<float> predictor;
  TrainConfig config;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  std::optional<double> best_val_f1;
  double w_pos = 1.0;
  double w_neg = 1.0;
};

namespace detail {

template <typename T>
Tensor<T> predict_for_edges(const SignedBipartiteGraph& g,
                            const EncodeResult<T>& enc,
                            PredictorState<T>& predictor,
                            const Tensor<T>& semantic_matrix,
                            const std::vector<std::uint32_t>& edge_ids) {
  std::vector<std::uint32_t> student_idx;
  std::vector<std::uint32_t> question_global_idx;
  std::vector<std::uint32_t> question_idx;
  student_idx.reserve(edge_ids.size());
  question_global_idx.reserve(edge_ids.size());
  question_idx.reserve(edge_ids.size());
  const auto num_students = std::uint32_t(g.num_students());
  for (auto e : edge_ids) {
    const SignedEdge& edge = g.edge(e);
    student_idx.push_back(edge.student);
    question_global_idx.push_back(num_students + edge.question);
    question_idx.push_back(edge.question);
  }
  Tensor<T> student_rows = gather_rows(enc.fused, student_idx);
  Tensor<T> question_rows = gather_rows(enc.fused, question_global_idx);
  Tensor<T> semantic_rows;
  if (predictor.use_semantic) {
    semantic_rows = gather_rows(semantic_matrix, question_idx);
  }
  Tensor<T> fused_q = fuse_questions(question_rows, semantic_rows, predictor);
  return predict_edges(student_rows, fused_q, predictor);
}

inline std::vector<int> edge_labels(const SignedBipartiteGraph& g,
                                    const std::vector<std::uint32_t>& edges) {
  std::vector<int> labels;
  labels.reserve(edges.size());
  for (auto e : edges) {
    labels.push_back(g.edge(e).sign == Sign::Positive ? 1 : 0);
  }
  return labels;
}

}  // namespace detail

template <typename T>
struct EpochLoss {
  Tensor<T> ce;
  Tensor<T> cl;
  Tensor<T> total;
};

// One epoch's joint loss: weighted cross-entropy over the supervision edges
// plus the beta-weighted mean of the combined contrastive loss over the node
// batches. This is the exact expression the trainer differentiates.
template <typename T>
EpochLoss<T> build_epoch_loss(
    const SignedBipartiteGraph& g, const AugmentedView& view1,
    const AugmentedView& view2, EncoderState<T>& encoder,
    PredictorState<T>& predictor, const EncoderConfig& cfg,
    const Tensor<T>& semantic_matrix,
    const std::vector<std::uint32_t>& supervision_edges,
    const std::vector<int>& labels,
    const std::vector<std::vector<std::uint32_t>>& node_batches, double tau,
    double alpha, double beta, double w_pos, double w_neg) {
  EncodeResult<T> enc =
      encode(view1, view2, encoder, cfg, &supervision_edges);
  EpochLoss<T> out;
  Tensor<T> probs = detail::predict_for_edges(g, enc, predictor,
                                              semantic_matrix,
                                              supervision_edges);
  out.ce = ce_loss(probs, labels, w_pos, w_neg);
  Tensor<T> cl_sum;
  for (const auto& nodes : node_batches) {
    ContrastiveBatch<T> batch = make_contrastive_batch(enc, nodes, tau, alpha);
    Tensor<T> cl = combined_loss(batch);
    cl_sum = cl_sum.defined() ? add(cl_sum, cl) : cl;
  }
  if (!cl_sum.defined()) {
    throw TrainError("epoch loss: no contrastive batches");
  }
  out.cl = mul_scalar(cl_sum, 1.0 / double(node_batches.size()));
  out.total = joint_loss(out.ce, out.cl, beta);
  return out;
}

// Forward scoring of an edge set with frozen states; message passing runs
// over `message_edges` with no augmentation.
inline std::vector<double> score_edges(const SignedBipartiteGraph& g,
                                       EncoderState<float>& encoder,
                                       PredictorState<float>& predictor,
                                       const EncoderConfig& cfg,
                                       const SemanticTable* semantics,
                                       const std::vector<std::uint32_t>& message_edges,
                                       const std::vector<std::uint32_t>& eval_edges) {
  NoGradGuard no_grad;
  AugmentedView view = identity_view(g);
  EncodeResult<float> enc = encode(view, view, encoder, cfg, &message_edges);
  Tensor<float> semantic_matrix;
  if (predictor.use_semantic) {
    if (!semantics) throw TrainError("score_edges: semantic table required");
    semantic_matrix = semantics->as_tensor<float>();
  }
  Tensor<float> probs = detail::predict_for_edges(g, enc, predictor,
                                                  semantic_matrix, eval_edges);
  return std::vector<double>(probs.values().begin(), probs.values().end());
}

inline MetricReport evaluate_edges(const SignedBipartiteGraph& g,
                                   EncoderState<float>& encoder,
                                   PredictorState<float>& predictor,
                                   const EncoderConfig& cfg,
                                   const SemanticTable* semantics,
                                   const std::vector<std::uint32_t>& message_edges,
                                   const std::vector<std::uint32_t>& eval_edges,
                                   std::vector<double>* scores_out = nullptr) {
  if (eval_edges.empty()) throw TrainError("evaluate: empty edge set");
  std::vector<double> scores = score_edges(g, encoder, predictor, cfg,
                                           semantics, message_edges, eval_edges);
  if (scores_out) *scores_out = scores;
  return compute_metrics(scores, detail::edge_labels(g, eval_edges));
}

inline TrainResult train(const SignedBipartiteGraph& g, const SplitPlan& split,
                         const TrainConfig& config,
                         const SemanticTable* semantics = nullptr) {
  audit_split(g, split);
  if (split.train.empty()) throw TrainError("train: empty training set");
  if (config.use_semantic && !semantics) {
    throw TrainError("train: semantic toggle is on but no semantic table given");
  }
  const auto [w_pos, w_neg] = class_weights(g, split.train);

  std::mt19937 seeder(static_cast<std::mt19937::result_type>(config.seed));
  std::mt19937 init_rng(seeder());
  std::mt19937 batch_rng(seeder());

  EncoderState<float> encoder = EncoderState<float>::init(
      g.num_students(), g.num_questions(), config.encoder, init_rng);
  PredictorState<float> predictor = PredictorState<float>::init(
      config.encoder.dim, config.use_semantic, init_rng);

  std::vector<Tensor<float>> params = encoder.parameters();
  for (auto& p : predictor.parameters()) params.push_back(p);
  Adam<float> optimizer(params, {config.lr, config.adam_beta1,
                                 config.adam_beta2, config.adam_eps});

  Tensor<float> semantic_matrix;
  if (config.use_semantic) {
    semantic_matrix = semantics->as_tensor<float>();
  }
  const std::vector<int> train_labels = detail::edge_labels(g, split.train);

  std::vector<std::uint8_t> train_mask(g.num_edges(), 0);
  for (auto e : split.train) train_mask[e] = 1;

  std::vector<std::uint32_t> all_nodes(g.num_nodes());
  std::iota(all_nodes.begin(), all_nodes.end(), 0u);

  TrainResult result;
  result.config = config;
  result.w_pos = w_pos;
  result.w_neg = w_neg;

  std::optional<EncoderState<float>> best_encoder;
  std::optional<PredictorState<float>> best_predictor;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    try {
      const std::uint64_t view_seed1 = seeder();
      const std::uint64_t view_seed2 = seeder();
      AugmentedView view1 = augment(g, config.flip_p, view_seed1);
      AugmentedView view2 = augment(g, config.flip_p, view_seed2);

      // Every epoch, prove the message-passing structure stays inside the
      // training split.
      for (Sign sign : {Sign::Positive, Sign::Negative}) {
        audit_edge_subset(
            build_sign_adjacency(view1, sign, &split.train).edge_ids,
            train_mask, "message passing");
      }

      std::shuffle(all_nodes.begin(), all_nodes.end(), batch_rng);
      std::vector<std::vector<std::uint32_t>> node_batches;
      std::size_t begin = 0;
      while (begin < all_nodes.size()) {
        std::size_t end = std::min(begin + config.batch_size, all_nodes.size());
        if (all_nodes.size() - end == 1) {
          end = all_nodes.size();  // merge a trailing 1-node batch
        }
        if (end - begin < 2) break;
        node_batches.emplace_back(all_nodes.begin() + begin,
                                  all_nodes.begin() + end);
        begin = end;
      }
      if (node_batches.empty()) {
        throw TrainError("train: graph too small for a contrastive batch");
      }

      EpochLoss<float> loss = build_epoch_loss(
          g, view1, view2, encoder, predictor, config.encoder, semantic_matrix,
          split.train, train_labels, node_batches, config.tau, config.alpha,
          config.beta, w_pos, w_neg);

      stats.ce_loss = loss.ce.item();
      stats.cl_loss = loss.cl.item();
      stats.total_loss = loss.total.item();

      backward(loss.total);
      optimizer.step();
    } catch (const TensorError& e) {
      throw TrainError("train: numeric failure at epoch " +
                       std::to_string(epoch) + ": " + e.what());
    }

    if (!split.val.empty()) {
      MetricReport val = evaluate_edges(g, encoder, predictor, config.encoder,
                                        semantics, split.train, split.val);
      stats.val_binary_f1 = val.binary_f1;
      if (!result.best_val_f1 || val.binary_f1 > *result.best_val_f1) {
        result.best_val_f1 = val.binary_f1;
        result.best_epoch = epoch;
        best_encoder = encoder.clone();
        best_predictor = predictor.clone();
      }
    } else {
      result.best_epoch = epoch;
    }
    result.history.push_back(stats);
  }

  result.encoder = best_encoder ? std::move(*best_encoder) : encoder;
  result.predictor = best_predictor ? std::move(*best_predictor) : predictor;
  return result;
}

// ---------------------------------------------------------------------------
// Cold start
// ---------------------------------------------------------------------------

struct ColdStartResult {
  SplitPlan split;
  TrainResult trained;
  MetricReport metrics;
  double semantic_coverage = 0.0;  // held questions with semantic embeddings
};

inline ColdStartResult run_cold_start(
    const SignedBipartiteGraph& g, const TrainConfig& config,
    const std::vector<KnowledgePointRecord>& records = {},
    const WordVectorTable& vectors = {}, SplitOptions options = {}) {
  ColdStartResult out;
  out.split = make_split(g, {}, SplitMode::ColdStart, config.seed, options);
  SemanticTable table;
  const SemanticTable* table_ptr = nullptr;
  if (config.use_semantic) {
    table = build_semantic_table(g, records, vectors, config.encoder.dim,
                                 questions_in_edges(g, out.split.train));
    table_ptr = &table;
  }
  out.trained = train(g, out.split, config, table_ptr);
  out.metrics = evaluate_edges(g, out.trained.encoder, out.trained.predictor,
                               config.encoder, table_ptr, out.split.train,
                               out.split.test);
  if (config.use_semantic) {
    out.semantic_coverage = table.coverage(out.split.held_questions);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random-embedding + logistic baseline
// ---------------------------------------------------------------------------

struct BaselineConfig {
  std::size_t dim = 64;
  std::size_t epochs = 300;
  double lr = 0.05;
  std::uint64_t seed = 0;
};

// Concatenated fixed random student/question embeddings classified by
// logistic regression; the sanity anchor every learned model must beat.
inline MetricReport baseline_random_logistic(const SignedBipartiteGraph& g,
                                             const SplitPlan& split,
                                             const BaselineConfig& config,
                                             std::vector<double>* scores_out = nullptr) {
  if (split.train.empty() || split.test.empty()) {
    throw TrainError("baseline: needs train and test edges");
  }
  const auto [w_pos, w_neg] = class_weights(g, split.train);
  std::mt19937 rng(static_cast<std::mt19937::result_type>(config.seed));
  Tensor<float> student_emb =
      Tensor<float>::randn({g.num_students(), config.dim}, rng);
  Tensor<float> question_emb =
      Tensor<float>::randn({g.num_questions(), config.dim}, rng);
  Tensor<float> weight =
      Tensor<float>::zeros({2 * config.dim, std::size_t(1)});
  weight.set_requires_grad(true);
  Tensor<float> bias = Tensor<float>::scalar(0.0f);
  bias.set_requires_grad(true);
  Adam<float> optimizer({weight, bias}, {config.lr});

  auto features = [&](const std::vector<std::uint32_t>& edges) {
    std::vector<std::uint32_t> s_idx, q_idx;
    s_idx.reserve(edges.size());
    q_idx.reserve(edges.size());
    for (auto e : edges) {
      s_idx.push_back(g.edge(e).student);
      q_idx.push_back(g.edge(e).question);
    }
    return concat<float>({gather_rows(student_emb, s_idx),
                          gather_rows(question_emb, q_idx)},
                         1);
  };

  Tensor<float> train_features = features(split.train);
  const std::vector<int> train_labels = detail::edge_labels(g, split.train);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Tensor<float> probs = sigmoid(
        add_scalar_tensor(matmul(train_features, weight), bias));
    Tensor<float> loss = weighted_bce(probs, train_labels, w_pos, w_neg);
    backward(loss);
    optimizer.step();
  }

  NoGradGuard no_grad;
  Tensor<float> probs =
      sigmoid(add_scalar_tensor(matmul(features(split.test), weight), bias));
  std::vector<double> scores(probs.values().begin(), probs.values().end());
  if (scores_out) *scores_out = scores;
  return compute_metrics(scores, detail::edge_labels(g, split.test));
}

// ---------------------------------------------------------------------------
// Run artifacts
// ---------------------------------------------------------------------------

inline void write_history_csv(std::ostream& out,
                              const std::vector<EpochStats>& history) {
  out << "epoch,total_loss,ce_loss,cl_loss,val_binary_f1\n";
  char buf[160];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,", h.epoch,
                  h.total_loss, h.ce_loss, h.cl_loss);
    out << buf;
    if (h.val_binary_f1) {
      std::snprintf(buf, sizeof(buf), "%.9g", *h.val_binary_f1);
      out << buf;
    }
    out << '\n';
  }
}

inline void write_predictions_csv(std::ostream& out,
                                  const SignedBipartiteGraph& g,
                                  const std::vector<std::uint32_t>& edges,
                                  const std::vector<double>& scores) {
  out << "student_id,question_id,probability,predicted_sign,true_sign\n";
  char buf[64];
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const SignedEdge& e = g.edge(edges[i]);
    std::snprintf(buf, sizeof(buf), "%.6f", scores[i]);
    out << g.student_keys()[e.student] << ',' << g.question_keys()[e.question]
        << ',' << buf << ',' << (predicted_positive(scores[i]) ? 1 : -1)
        << ',' << (e.sign == Sign::Positive ? 1 : -1) << '\n';
  }
}

inline NamedTensors<float> model_named_tensors(TrainResult& result) {
  NamedTensors<float> tensors = result.encoder.named_parameters();
  for (auto& [name, t] : result.predictor.named_parameters()) {
    tensors.emplace_back(name, t);
  }
  return tensors;
}

inline void save_run_artifacts(const std::filesystem::path& dir,
                               const SignedBipartiteGraph& g,
                               TrainResult& result, const SplitPlan& split,
                               const MetricReport& metrics,
                               const std::vector<std::uint32_t>& eval_edges,
                               const std::vector<double>& scores,
                               const SemanticTable* semantics) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    out << train_config_to_json(result.config).dump(2) << '\n';
  }
  save_split((dir / "split.json").string(), split);
  {
    std::ofstream out(dir / "history.csv");
    write_history_csv(out, result.history);
  }
  {
    nlohmann::json j = metrics_to_json(metrics);
    j["best_epoch"] = result.best_epoch;
    if (result.best_val_f1) j["best_val_binary_f1"] = *result.best_val_f1;
    j["class_weights"] = {{"positive", result.w_pos},
                          {"negative", result.w_neg}};
    std::ofstream out(dir / "metrics.json");
    out << j.dump(2) << '\n';
  }
  save_checkpoint((dir / "checkpoint.bin").string(),
                  model_named_tensors(result));
  {
    std::ofstream out(dir / "predictions.csv");
    write_predictions_csv(out, g, eval_edges, scores);
  }
  if (semantics) {
    save_pca((dir / "pca.bin").string(), semantics->pca);
  }
}

inline void restore_model(const std::string& checkpoint_path,
                          EncoderState<float>& encoder,
                          PredictorState<float>& predictor) {
  auto stored = load_checkpoint<float>(checkpoint_path);
  auto restore_all = [&stored](NamedTensors<float> tensors) {
    for (auto& [name, t] : tensors) {
      auto it = stored.find(name);
      if (it == stored.end()) {
        throw CheckpointError("checkpoint: missing tensor " + name);
      }
      restore_values(t, it->second, name);
    }
  };
  restore_all(encoder.named_parameters());
  restore_all(predictor.named_parameters());
}

}  // namespace edgesign
