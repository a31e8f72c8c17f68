#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "leap/cli.hpp"
#include "leap/kernels.hpp"

namespace fs = std::filesystem;

namespace leap {

namespace {

struct LoadedData {
  Vocabulary vocab;
  std::vector<Document> docs;
};

std::vector<Document> encode_all(const std::vector<RawDocument>& raw, const Vocabulary& v) {
  std::vector<Document> docs;
  docs.reserve(raw.size());
  for (const RawDocument& r : raw) docs.push_back(encode(r, v));
  return docs;
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << body;
}

std::string snapshot_path_for(const RunConfig& cfg, const std::string& command) {
  return cfg.out_dir + "/config_resolved_" + command + ".cfg";
}

void write_snapshot(const RunConfig& cfg, const std::string& command) {
  fs::create_directories(cfg.out_dir);
  write_text(snapshot_path_for(cfg, command), cfg.snapshot());
}

Checkpoint load_and_check(const RunConfig& cfg, const std::string& checkpoint_path) {
  const std::string path =
      checkpoint_path.empty() ? cfg.out_dir + "/checkpoint.bin" : checkpoint_path;
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
  Checkpoint ck;
  try {
    ck = load_checkpoint(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  // explicit model keys must agree with the stored config
  auto conflict = [&](const char* key, long want, long got) {
    if (cfg.explicit_keys.count(key) && want != got)
      throw ConfigError("config: key '" + std::string(key) + "' (" + std::to_string(want) +
                        ") conflicts with checkpoint (" + std::to_string(got) + ")");
  };
  conflict("hidden", cfg.model.hidden, ck.config.hidden);
  conflict("emb_dim", cfg.model.emb_dim, ck.config.emb_dim);
  conflict("rev_hidden", cfg.model.rev_hidden, ck.config.rev_hidden);
  conflict("mlp_hidden", cfg.model.mlp_hidden, ck.config.mlp_hidden);
  conflict("conv_filters", cfg.model.filters_per_width, ck.config.filters_per_width);
  conflict("num_classes", cfg.num_classes, ck.config.num_classes);
  return ck;
}

std::vector<Document> load_test_docs(const RunConfig& cfg, const Checkpoint& ck) {
  std::vector<RawDocument> raw;
  try {
    raw = load_corpus_csv(cfg.test_csv, ck.config.num_classes);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  if (raw.empty()) throw ConfigError("test corpus is empty: " + cfg.test_csv);
  return encode_all(raw, ck.vocab);
}

}  // namespace

TrainOutputs run_train(const RunConfig& cfg_in, bool quiet) {
  RunConfig cfg = cfg_in;
  cfg.validate("train");
  kern::set_threads(cfg.threads);
  cfg.train.seed = cfg.seed;
  cfg.model.skip_pathway = cfg.mode == "leap";
  cfg.train.schedule.enabled = cfg.mode == "plain_lstm_schedule";
  if (cfg.mode != "leap") cfg.train.lambda = 0.0;

  std::vector<RawDocument> raw;
  try {
    raw = load_corpus_csv(cfg.train_csv, cfg.num_classes);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  if (raw.size() < 2) throw ConfigError("training corpus needs at least 2 documents");

  Vocabulary vocab = build_vocab(raw, cfg.min_freq);
  std::vector<Document> all = encode_all(raw, vocab);

  // seeded dev split
  std::vector<int> order(all.size());
  for (size_t i = 0; i < all.size(); ++i) order[i] = static_cast<int>(i);
  Rng split_rng(cfg.seed, stream::dev_split);
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[i], order[split_rng.uniform_int(i + 1)]);
  const int n_dev =
      std::max(1, static_cast<int>(all.size() * cfg.dev_fraction + 0.5));
  std::vector<Document> dev, train_docs;
  for (size_t i = 0; i < order.size(); ++i)
    (static_cast<int>(i) < n_dev ? dev : train_docs).push_back(all[order[i]]);

  cfg.model.num_classes = cfg.num_classes;
  cfg.model.vocab_size = vocab.size();
  cfg.model.validate();

  Rng init_rng(cfg.seed, stream::param_init);
  LeapParams params = LeapParams::init(cfg.model, init_rng);
  if (!cfg.embeddings.empty()) {
    Rng emb_rng(cfg.seed, stream::emb_init);
    params.embedding = load_embeddings(cfg.embeddings, vocab, cfg.model.emb_dim, emb_rng);
  }

  write_snapshot(cfg, "train");
  TrainOutputs out;
  out.snapshot_path = snapshot_path_for(cfg, "train");
  out.checkpoint_path = cfg.out_dir + "/checkpoint.bin";
  out.history_path = cfg.out_dir + "/history.jsonl";

  std::ofstream history(out.history_path, std::ios::trunc);
  if (!history) throw std::runtime_error("cannot open " + out.history_path);

  FitSinks sinks;
  sinks.history = &history;
  sinks.on_best = [&](const LeapParams& best, int) {
    save_checkpoint(out.checkpoint_path, cfg.model, best, vocab);
  };
  if (!quiet)
    sinks.on_epoch = [&](int epoch, const EpochStats& es, const Metrics& dm) {
      std::printf("epoch %d: loss=%.4f acc=%.4f soft_skip=%.4f", epoch, es.mean_loss,
                  es.train.accuracy, es.soft_skip_rate);
      if (cfg.train.schedule.enabled) std::printf(" mask_p=%.2f", es.mask_p);
      std::printf(" dev_acc=%.4f dev_skip=%.4f (%.1fs)\n", dm.accuracy, dm.skip_rate,
                  es.train.wall_s);
      std::fflush(stdout);
    };

  FitResult fr = fit(std::move(params), cfg.model, train_docs, dev, cfg.train, sinks);
  out.best_dev_accuracy = fr.best_dev_accuracy;
  out.best_epoch = fr.best_epoch;
  out.epochs_run = fr.epochs_run;
  if (!quiet)
    std::printf("best dev accuracy %.4f at epoch %d; checkpoint: %s\n", fr.best_dev_accuracy,
                fr.best_epoch, out.checkpoint_path.c_str());
  return out;
}

EvalOutputs run_eval(const RunConfig& cfg_in, const std::string& checkpoint_path, bool quiet) {
  RunConfig cfg = cfg_in;
  cfg.validate("eval");
  kern::set_threads(cfg.threads);
  Checkpoint ck = load_and_check(cfg, checkpoint_path);
  std::vector<Document> docs = load_test_docs(cfg, ck);

  EvalOutputs out;
  out.metrics = evaluate(ck.params, ck.config, docs);
  write_snapshot(cfg, "eval");
  out.metrics_path = cfg.out_dir + "/metrics.json";

  nlohmann::json j{{"version", 1},
                   {"documents", docs.size()},
                   {"accuracy", out.metrics.accuracy},
                   {"accuracy_pct", out.metrics.accuracy * 100.0},
                   {"skip_rate", out.metrics.skip_rate},
                   {"skip_rate_pct", out.metrics.skip_rate * 100.0},
                   {"mean_ce", out.metrics.mean_ce},
                   {"cell_updates", out.metrics.updates},
                   {"tokens", out.metrics.tokens},
                   {"wall_s", out.metrics.wall_s}};
  write_text(out.metrics_path, j.dump(2) + "\n");
  if (!quiet)
    std::printf("accuracy %.2f  skip %.2f  time %.3fs  (%ld updates / %ld tokens)\n",
                out.metrics.accuracy * 100.0, out.metrics.skip_rate * 100.0,
                out.metrics.wall_s, out.metrics.updates, out.metrics.tokens);
  return out;
}

BenchReport run_bench(const RunConfig& cfg_in, const std::string& checkpoint_path,
                      bool quiet) {
  RunConfig cfg = cfg_in;
  cfg.validate("bench");
  kern::set_threads(cfg.threads);
  Checkpoint ck = load_and_check(cfg, checkpoint_path);
  std::vector<Document> docs = load_test_docs(cfg, ck);

  BenchReport rep =
      benchmark_inference(ck.params, ck.config, docs, cfg.bench_repetitions,
                          cfg.bench_options());
  write_snapshot(cfg, "bench");
  export_bench_json(rep, cfg.out_dir + "/bench.json");
  export_bench_tsv(rep, cfg.out_dir + "/bench.tsv");
  if (!quiet)
    std::printf("speedup %.2fx  update_ratio %.4f  skip %.2f  model %.4fs baseline %.4fs\n",
                rep.speedup, rep.model.update_ratio, rep.model.skip_rate * 100.0,
                rep.model.median_s, rep.baseline.median_s);
  return rep;
}

KeepRateTable run_analyze(const RunConfig& cfg_in, const std::string& checkpoint_path,
                          bool quiet) {
  RunConfig cfg = cfg_in;
  cfg.validate("analyze");
  kern::set_threads(cfg.threads);
  Checkpoint ck = load_and_check(cfg, checkpoint_path);
  std::vector<Document> docs = load_test_docs(cfg, ck);

  KeepRateTable table = keep_rate_table(ck.params, ck.config, docs, ck.vocab,
                                        cfg.analyze_top_n, cfg.analyze_min_appear);
  write_snapshot(cfg, "analyze");
  export_keep_rate_tsv(table, cfg.out_dir + "/keep_rates.tsv");
  export_keep_rate_json(table, cfg.out_dir + "/keep_rates.json");

  // seeded sample of rendered cases
  fs::create_directories(cfg.out_dir + "/cases");
  Rng rng(cfg.seed, stream::sample_cases);
  std::string html = "<!doctype html><meta charset=\"utf-8\">\n";
  for (int i = 0; i < cfg.analyze_cases && !docs.empty(); ++i) {
    const Document& d = docs[rng.uniform_int(static_cast<int>(docs.size()))];
    InferResult r = forward_infer(ck.params, ck.config, d);
    write_text(cfg.out_dir + "/cases/case_" + std::to_string(i) + ".txt",
               render_case(d, ck.vocab, r.trace, CaseFormat::text) + "\n");
    html += render_case(d, ck.vocab, r.trace, CaseFormat::html) + "\n";
  }
  write_text(cfg.out_dir + "/cases/cases.html", html);

  if (!quiet) {
    std::printf("top keep-rate words per class (rate kept/appeared):\n");
    int last_cls = -2;
    for (const KeepRateRow& r : table.per_class) {
      if (r.cls != last_cls) {
        std::printf("class %d:\n", r.cls);
        last_cls = r.cls;
      }
      std::printf("  %-20s %.4f (%ld/%ld)\n", r.word.c_str(), r.keep_rate, r.kept,
                  r.appeared);
    }
  }
  return table;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Leap-LSTM text classifier: train, evaluate, benchmark, analyze"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed_flag;
  std::optional<int> threads_flag;
  std::optional<std::string> out_flag;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value config file")->required();
    cmd->add_option("--set", overrides, "override a config key (key=value), repeatable");
    cmd->add_option("--seed", seed_flag, "override seed");
    cmd->add_option("--threads", threads_flag, "override worker thread count");
    cmd->add_option("--out", out_flag, "override output directory");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd);
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file");
  CLI::App* bench_cmd = app.add_subcommand("bench", "benchmark inference speed");
  add_common(bench_cmd);
  bench_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file");
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "keep-rate tables and cases");
  add_common(analyze_cmd);
  analyze_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    RunConfig cfg = RunConfig::from_file(config_path, overrides);
    if (seed_flag) {
      cfg.seed = *seed_flag;
      cfg.explicit_keys.insert("seed");
    }
    if (threads_flag) {
      cfg.threads = *threads_flag;
      cfg.explicit_keys.insert("threads");
    }
    if (out_flag) {
      cfg.out_dir = *out_flag;
      cfg.explicit_keys.insert("out_dir");
    }
    if (train_cmd->parsed()) run_train(cfg);
    if (eval_cmd->parsed()) run_eval(cfg, checkpoint_path);
    if (bench_cmd->parsed()) run_bench(cfg, checkpoint_path);
    if (analyze_cmd->parsed()) run_analyze(cfg, checkpoint_path);
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace leap
