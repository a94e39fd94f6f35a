// Command-line trainer/evaluator for sign prediction on signed bipartite
// student-question graphs.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "edgesign/edgesign.hpp"
#include "edgesign/http_client.hpp"

namespace fs = std::filesystem;
using namespace edgesign;

namespace {

struct DataOptions {
  std::string edges_path;
  std::string vectors_path;
  std::string kp_cache_dir;
  std::string kp_manual_path;
  std::string corpus_path;
};

void add_train_flags(CLI::App* cmd, TrainConfig& config) {
  cmd->add_option("--epochs", config.epochs, "training epochs");
  cmd->add_option("--alpha", config.alpha, "intra-view loss weight");
  cmd->add_option("--beta", config.beta, "contrastive loss weight");
  cmd->add_option("--flip-p", config.flip_p, "augmentation flip probability");
  cmd->add_option("--tau", config.tau, "contrastive temperature");
  cmd->add_option("--batch-size", config.batch_size, "contrastive batch size");
  cmd->add_option("--lr", config.lr, "Adam learning rate");
  cmd->add_option("--seed", config.seed, "random seed");
  cmd->add_option("--dim", config.encoder.dim, "embedding dimension");
  cmd->add_option("--layers", config.encoder.layers, "GAT layers per stack");
  cmd->add_flag("--semantic,!--no-semantic", config.use_semantic,
                "fuse semantic question embeddings");
}

void add_data_flags(CLI::App* cmd, DataOptions& data, bool need_edges = true) {
  auto* opt = cmd->add_option("--edges", data.edges_path, "edge log CSV");
  if (need_edges) opt->required();
  cmd->add_option("--vectors", data.vectors_path,
                  "word vectors (GloVe text format)");
  cmd->add_option("--kp-cache", data.kp_cache_dir,
                  "knowledge-point cache directory");
  cmd->add_option("--kp-manual", data.kp_manual_path,
                  "manual knowledge points (JSONL)");
  cmd->add_option("--corpus", data.corpus_path, "MCQ corpus (JSONL)");
}

// Knowledge points come from the manual file and/or the extraction cache
// (cache entries require the corpus to recover prompt hashes per question).
std::vector<KnowledgePointRecord> load_knowledge_points(
    const DataOptions& data, const LlmConfig& llm) {
  std::vector<KnowledgePointRecord> records;
  if (!data.kp_manual_path.empty()) {
    records = read_manual_kp_file(data.kp_manual_path);
  }
  if (!data.kp_cache_dir.empty()) {
    if (data.corpus_path.empty()) {
      throw SemanticsError("--kp-cache requires --corpus to locate entries");
    }
    KnowledgePointCache cache{fs::path(data.kp_cache_dir)};
    ExtractionContext ctx;
    ctx.cache = &cache;
    ctx.config = llm;
    for (const Mcq& mcq : read_mcq_corpus_file(data.corpus_path)) {
      try {
        records.push_back(extract_knowledge_points(mcq, ctx));
      } catch (const ExtractionError&) {
        // question simply has no cached extraction; it stays uncovered
      }
    }
  }
  return records;
}

struct PreparedSemantics {
  WordVectorTable vectors;
  std::vector<KnowledgePointRecord> records;
};

PreparedSemantics load_semantics(const DataOptions& data,
                                 const LlmConfig& llm) {
  PreparedSemantics out;
  if (data.vectors_path.empty()) {
    throw SemanticsError(
        "semantic toggle is on: --vectors and knowledge points "
        "(--kp-manual or --kp-cache) are required");
  }
  out.vectors = WordVectorTable::load_file(data.vectors_path);
  out.records = load_knowledge_points(data, llm);
  if (out.records.empty()) {
    throw SemanticsError("no knowledge points found for semantic embeddings");
  }
  return out;
}

int cmd_prepare(const DataOptions& data, const std::string& out_dir) {
  auto records = read_edge_csv_file(data.edges_path);
  SignedBipartiteGraph g = build_graph(records);
  nlohmann::json stats{
      {"students", g.num_students()},
      {"questions", g.num_questions()},
      {"edges", g.num_edges()},
      {"positive_ratio", positive_ratio(g)},
      {"discarded_duplicates", g.discarded_duplicates()},
  };
  if (!data.corpus_path.empty()) {
    auto corpus = read_mcq_corpus_file(data.corpus_path);
    std::size_t matched = 0;
    std::unordered_set<std::string> keys(g.question_keys().begin(),
                                         g.question_keys().end());
    for (const Mcq& mcq : corpus) matched += keys.count(mcq.question_key);
    stats["corpus_questions"] = corpus.size();
    stats["corpus_matched"] = matched;
  }
  std::cout << stats.dump(2) << '\n';
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream edges(fs::path(out_dir) / "edges.csv");
    write_edge_csv(edges, g);
    std::ofstream stats_out(fs::path(out_dir) / "stats.json");
    stats_out << stats.dump(2) << '\n';
  }
  return 0;
}

int cmd_extract(const DataOptions& data, LlmConfig llm, bool offline) {
  if (data.corpus_path.empty() || data.kp_cache_dir.empty()) {
    throw SemanticsError("extract requires --corpus and --kp-cache");
  }
  auto corpus = read_mcq_corpus_file(data.corpus_path);
  KnowledgePointCache cache{fs::path(data.kp_cache_dir)};
  std::optional<HttpChatClient> client;
  if (!offline) {
    if (const char* key = std::getenv("EDGESIGN_API_KEY")) llm.api_key = key;
    client.emplace(llm);
  }
  ExtractionContext ctx;
  ctx.client = client ? &*client : nullptr;
  ctx.cache = &cache;
  ctx.config = llm;
  std::size_t ok = 0, cached = 0, failed = 0;
  for (const Mcq& mcq : corpus) {
    try {
      auto rec = extract_knowledge_points(mcq, ctx);
      (rec.source == KpSource::Cache ? cached : ok) += 1;
      std::cout << mcq.question_key << ": " << rec.points.size()
                << " points (" << kp_source_name(rec.source) << ")\n";
    } catch (const ExtractionError& e) {
      ++failed;
      std::cerr << mcq.question_key << ": " << e.what() << '\n';
    }
  }
  std::cout << "extracted " << ok << ", cache hits " << cached << ", failed "
            << failed << '\n';
  return failed == 0 ? 0 : 1;
}

int cmd_synth(const SynthConfig& cfg, const std::string& out_dir) {
  SyntheticData data = generate_synthetic(cfg);
  write_synthetic_files(out_dir, data);
  SignedBipartiteGraph g = build_graph(data.records);
  std::cout << nlohmann::json{{"students", g.num_students()},
                              {"questions", g.num_questions()},
                              {"edges", g.num_edges()},
                              {"positive_ratio", positive_ratio(g)},
                              {"out_dir", out_dir}}
                   .dump(2)
            << '\n';
  return 0;
}

struct RunOutput {
  TrainResult result;
  MetricReport metrics;
  SplitPlan split;
  std::vector<double> test_scores;
  std::optional<SemanticTable> semantics;
};

RunOutput run_training(const SignedBipartiteGraph& g, const SplitPlan& split,
                       const TrainConfig& config, const DataOptions& data,
                       const LlmConfig& llm) {
  RunOutput out;
  out.split = split;
  const SemanticTable* table_ptr = nullptr;
  if (config.use_semantic) {
    PreparedSemantics sem = load_semantics(data, llm);
    out.semantics = build_semantic_table(g, sem.records, sem.vectors,
                                         config.encoder.dim,
                                         questions_in_edges(g, split.train));
    table_ptr = &*out.semantics;
  }
  out.result = train(g, split, config, table_ptr);
  out.metrics =
      evaluate_edges(g, out.result.encoder, out.result.predictor,
                     config.encoder, table_ptr, split.train, split.test,
                     &out.test_scores);
  return out;
}

int report_run(const SignedBipartiteGraph& g, RunOutput& run,
               const std::string& out_dir) {
  std::cout << metrics_table(run.metrics);
  if (!out_dir.empty()) {
    save_run_artifacts(out_dir, g, run.result, run.split, run.metrics,
                       run.split.test, run.test_scores,
                       run.semantics ? &*run.semantics : nullptr);
    std::cout << "artifacts written to " << out_dir << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sign prediction on signed bipartite student-question graphs"};
  app.require_subcommand(1);

  DataOptions data;
  TrainConfig config;
  LlmConfig llm;
  SplitFractions fractions;
  std::string out_dir;
  std::string split_mode = "standard";

  auto* prepare = app.add_subcommand("prepare", "validate an edge log + corpus");
  add_data_flags(prepare, data);
  prepare->add_option("--out", out_dir, "write normalized copies here");

  auto* extract =
      app.add_subcommand("extract", "extract knowledge points with caching");
  add_data_flags(extract, data, /*need_edges=*/false);
  bool offline = false;
  extract->add_flag("--offline", offline, "cache only, no network");
  extract->add_option("--endpoint", llm.base_url, "chat endpoint base URL");
  extract->add_option("--model", llm.model, "model name");
  extract->add_option("--temperature", llm.temperature, "sampling temperature");
  extract->add_option("--retries", llm.max_retries, "parse retries");
  extract->add_flag("--debug-log", llm.debug_log, "log request/response bodies");

  SynthConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "generate planted synthetic data");
  synth->add_option("--students", synth_cfg.num_students, "student count");
  synth->add_option("--questions", synth_cfg.num_questions, "question count");
  synth->add_option("--density", synth_cfg.density, "edge density");
  synth->add_option("--noise", synth_cfg.noise, "label noise");
  synth->add_option("--kp-signal", synth_cfg.kp_signal,
                    "topic-difficulty signal strength");
  synth->add_option("--topics", synth_cfg.num_topics, "latent topics");
  synth->add_option("--seed", synth_cfg.seed, "random seed");
  synth->add_option("--out", out_dir, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train and evaluate a model");
  add_data_flags(train_cmd, data);
  add_train_flags(train_cmd, config);
  train_cmd->add_option("--split", split_mode, "standard or coldstart");
  train_cmd->add_option("--train-frac", fractions.train, "train fraction");
  train_cmd->add_option("--val-frac", fractions.val, "validation fraction");
  train_cmd->add_option("--test-frac", fractions.test, "test fraction");
  train_cmd->add_option("--out", out_dir, "run artifact directory");

  auto* eval_cmd =
      app.add_subcommand("eval", "re-evaluate a saved run on its test split");
  std::string run_dir;
  eval_cmd->add_option("--run", run_dir, "run artifact directory")->required();
  add_data_flags(eval_cmd, data);

  auto* coldstart =
      app.add_subcommand("coldstart", "cold-start protocol (held questions)");
  add_data_flags(coldstart, data);
  add_train_flags(coldstart, config);
  coldstart->add_option("--out", out_dir, "run artifact directory");

  auto* sweep = app.add_subcommand("sweep", "multi-seed training runs");
  add_data_flags(sweep, data);
  add_train_flags(sweep, config);
  sweep->add_option("--split", split_mode, "standard or coldstart");
  std::size_t num_seeds = 10;
  std::size_t jobs = 1;
  sweep->add_option("--runs", num_seeds, "number of seeds");
  sweep->add_option("--jobs", jobs, "parallel runs");
  sweep->add_option("--out", out_dir, "summary output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) return cmd_prepare(data, out_dir);
    if (extract->parsed()) return cmd_extract(data, llm, offline);
    if (synth->parsed()) return cmd_synth(synth_cfg, out_dir);

    if (train_cmd->parsed()) {
      SignedBipartiteGraph g = build_graph(read_edge_csv_file(data.edges_path));
      SplitPlan split =
          split_mode == "coldstart"
              ? make_split(g, fractions, SplitMode::ColdStart, config.seed)
              : make_split(g, fractions, SplitMode::Standard, config.seed);
      RunOutput run = run_training(g, split, config, data, llm);
      return report_run(g, run, out_dir);
    }

    if (coldstart->parsed()) {
      SignedBipartiteGraph g = build_graph(read_edge_csv_file(data.edges_path));
      std::vector<KnowledgePointRecord> records;
      WordVectorTable vectors;
      if (config.use_semantic) {
        PreparedSemantics sem = load_semantics(data, llm);
        records = std::move(sem.records);
        vectors = std::move(sem.vectors);
      }
      ColdStartResult cold = run_cold_start(g, config, records, vectors);
      std::cout << metrics_table(cold.metrics);
      std::cout << "held questions          " << cold.split.held_questions.size()
                << '\n';
      std::cout << "semantic coverage(held) " << cold.semantic_coverage << '\n';
      if (!out_dir.empty()) {
        std::optional<SemanticTable> table;
        if (config.use_semantic) {
          table = build_semantic_table(g, records, vectors, config.encoder.dim,
                                       questions_in_edges(g, cold.split.train));
        }
        std::vector<double> scores = score_edges(
            g, cold.trained.encoder, cold.trained.predictor, config.encoder,
            table ? &*table : nullptr, cold.split.train, cold.split.test);
        save_run_artifacts(out_dir, g, cold.trained, cold.split, cold.metrics,
                           cold.split.test, scores,
                           table ? &*table : nullptr);
        std::cout << "artifacts written to " << out_dir << '\n';
      }
      return 0;
    }

    if (eval_cmd->parsed()) {
      SignedBipartiteGraph g = build_graph(read_edge_csv_file(data.edges_path));
      std::ifstream cfg_in(fs::path(run_dir) / "config.json");
      if (!cfg_in) throw TrainError("eval: missing config.json in " + run_dir);
      nlohmann::json cfg_json;
      cfg_in >> cfg_json;
      TrainConfig run_config = train_config_from_json(cfg_json);
      SplitPlan split = load_split((fs::path(run_dir) / "split.json").string());
      std::mt19937 rng(0);
      EncoderState<float> encoder = EncoderState<float>::init(
          g.num_students(), g.num_questions(), run_config.encoder, rng);
      PredictorState<float> predictor = PredictorState<float>::init(
          run_config.encoder.dim, run_config.use_semantic, rng);
      restore_model((fs::path(run_dir) / "checkpoint.bin").string(), encoder,
                    predictor);
      std::optional<SemanticTable> table;
      if (run_config.use_semantic) {
        PreparedSemantics sem = load_semantics(data, llm);
        table = build_semantic_table(g, sem.records, sem.vectors,
                                     run_config.encoder.dim,
                                     questions_in_edges(g, split.train));
      }
      MetricReport metrics = evaluate_edges(
          g, encoder, predictor, run_config.encoder,
          table ? &*table : nullptr, split.train, split.test);
      std::cout << metrics_table(metrics);
      return 0;
    }

    if (sweep->parsed()) {
      SignedBipartiteGraph g = build_graph(read_edge_csv_file(data.edges_path));
      std::optional<PreparedSemantics> sem;
      if (config.use_semantic) sem = load_semantics(data, llm);
      auto run_one = [&](std::size_t idx) -> MetricReport {
        TrainConfig run_config = config;
        run_config.seed = config.seed + idx;
        SplitPlan split = split_mode == "coldstart"
                              ? make_split(g, fractions, SplitMode::ColdStart,
                                           run_config.seed)
                              : make_split(g, fractions, SplitMode::Standard,
                                           run_config.seed);
        SemanticTable table;
        const SemanticTable* table_ptr = nullptr;
        if (run_config.use_semantic) {
          table = build_semantic_table(g, sem->records, sem->vectors,
                                       run_config.encoder.dim,
                                       questions_in_edges(g, split.train));
          table_ptr = &table;
        }
        TrainResult result = train(g, split, run_config, table_ptr);
        return evaluate_edges(g, result.encoder, result.predictor,
                              run_config.encoder, table_ptr, split.train,
                              split.test);
      };
      std::vector<MetricReport> reports(num_seeds);
      if (jobs <= 1) {
        for (std::size_t i = 0; i < num_seeds; ++i) reports[i] = run_one(i);
      } else {
        std::vector<std::future<MetricReport>> futures;
        for (std::size_t i = 0; i < num_seeds; ++i) {
          futures.push_back(
              std::async(std::launch::async, [&run_one, i] { return run_one(i); }));
          if (futures.size() == jobs || i + 1 == num_seeds) {
            for (std::size_t k = 0; k < futures.size(); ++k) {
              reports[i + 1 - futures.size() + k] = futures[k].get();
            }
            futures.clear();
          }
        }
      }
      auto mean_std = [&reports](auto getter) {
        double mean = 0.0;
        for (const auto& r : reports) mean += getter(r);
        mean /= double(reports.size());
        double var = 0.0;
        for (const auto& r : reports) {
          const double d = getter(r) - mean;
          var += d * d;
        }
        var = reports.size() > 1 ? var / double(reports.size() - 1) : 0.0;
        return std::pair<double, double>(mean, std::sqrt(var));
      };
      nlohmann::json summary;
      summary["runs"] = nlohmann::json::array();
      for (std::size_t i = 0; i < reports.size(); ++i) {
        nlohmann::json j = metrics_to_json(reports[i]);
        j["seed"] = config.seed + i;
        summary["runs"].push_back(j);
      }
      auto [f1_mean, f1_std] =
          mean_std([](const MetricReport& r) { return r.binary_f1; });
      auto [micro_mean, micro_std] =
          mean_std([](const MetricReport& r) { return r.micro_f1; });
      auto [macro_mean, macro_std] =
          mean_std([](const MetricReport& r) { return r.macro_f1; });
      auto [auc_mean, auc_std] =
          mean_std([](const MetricReport& r) { return r.auc.value_or(0.5); });
      summary["binary_f1"] = {{"mean", f1_mean}, {"std", f1_std}};
      summary["micro_f1"] = {{"mean", micro_mean}, {"std", micro_std}};
      summary["macro_f1"] = {{"mean", macro_mean}, {"std", macro_std}};
      summary["auc"] = {{"mean", auc_mean}, {"std", auc_std}};
      std::printf("binary-F1 %.4f +/- %.4f over %zu runs\n", f1_mean, f1_std,
                  reports.size());
      std::printf("micro-F1  %.4f +/- %.4f\n", micro_mean, micro_std);
      std::printf("macro-F1  %.4f +/- %.4f\n", macro_mean, macro_std);
      std::printf("AUC       %.4f +/- %.4f\n", auc_mean, auc_std);
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream out(fs::path(out_dir) / "sweep.json");
        out << summary.dump(2) << '\n';
        std::cout << "summary written to " << out_dir << "/sweep.json\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
