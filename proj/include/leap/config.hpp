#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "leap/model.hpp"
#include "leap/train.hpp"

namespace leap {

// Configuration or validation failure; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key = value run configuration. Unknown keys are errors; command-line
// --set key=value pairs override file values.
struct RunConfig {
  std::string mode = "leap";  // leap | plain_lstm | plain_lstm_schedule
  std::string train_csv, test_csv, embeddings;
  std::string out_dir = "out";
  int num_classes = 0;
  int min_freq = 2;
  double dev_fraction = 0.1;
  int threads = 1;
  uint64_t seed = 1;
  LeapConfig model;
  TrainConfig train;
  int bench_repetitions = 5;
  std::string bench_policy = "model";  // model | keep_all | skip_all | keep_every_nth
  int bench_nth = 10;
  int analyze_top_n = 5;
  long analyze_min_appear = 10;
  int analyze_cases = 5;

  std::set<std::string> explicit_keys;  // set via file or --set

  static RunConfig from_file(const std::string& path,
                             const std::vector<std::string>& overrides);
  static RunConfig from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

  void apply(const std::string& key, const std::string& value);
  // Mode coherence, ranges, and path existence for the given subcommand.
  void validate(const std::string& command) const;
  std::string snapshot() const;  // resolved flat key=value text, sorted keys

  InferOptions bench_options() const;
};

}  // namespace leap
