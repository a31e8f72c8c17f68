#pragma once

#include <string>

#include "leap/bench.hpp"
#include "leap/checkpoint.hpp"
#include "leap/config.hpp"
#include "leap/train.hpp"

namespace leap {

struct TrainOutputs {
  double best_dev_accuracy = 0;
  int best_epoch = -1;
  int epochs_run = 0;
  std::string checkpoint_path, history_path, snapshot_path;
};

struct EvalOutputs {
  Metrics metrics;
  std::string metrics_path;
};

// Subcommand bodies; throw ConfigError for validation failures (exit 2) and
// other exceptions for runtime failures (exit 1).
TrainOutputs run_train(const RunConfig& cfg, bool quiet = false);
EvalOutputs run_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                     bool quiet = false);
BenchReport run_bench(const RunConfig& cfg, const std::string& checkpoint_path,
                      bool quiet = false);
KeepRateTable run_analyze(const RunConfig& cfg, const std::string& checkpoint_path,
                          bool quiet = false);

int cli_main(int argc, char** argv);

}  // namespace leap
