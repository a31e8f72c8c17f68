#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "leap/config.hpp"

namespace leap {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_int(key, item));
  }
  if (out.empty()) throw ConfigError("config: key '" + key + "' expects a comma list");
  return out;
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  explicit_keys.insert(key);
  if (key == "mode") mode = value;
  else if (key == "train_csv") train_csv = value;
  else if (key == "test_csv") test_csv = value;
  else if (key == "embeddings") embeddings = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "num_classes") num_classes = parse_int(key, value);
  else if (key == "min_freq") min_freq = parse_int(key, value);
  else if (key == "dev_fraction") dev_fraction = parse_double(key, value);
  else if (key == "threads") threads = parse_int(key, value);
  else if (key == "seed") seed = static_cast<uint64_t>(parse_long(key, value));
  else if (key == "hidden") model.hidden = parse_int(key, value);
  else if (key == "emb_dim") model.emb_dim = parse_int(key, value);
  else if (key == "rev_hidden") model.rev_hidden = parse_int(key, value);
  else if (key == "mlp_hidden") model.mlp_hidden = parse_int(key, value);
  else if (key == "kernel_widths") model.kernel_widths = parse_int_list(key, value);
  else if (key == "conv_filters") model.filters_per_width = parse_int(key, value);
  else if (key == "use_cnn") model.use_cnn = parse_bool(key, value);
  else if (key == "use_rnn_r") model.use_rnn_r = parse_bool(key, value);
  else if (key == "use_follow") model.use_follow = parse_bool(key, value);
  else if (key == "use_preceding") model.use_preceding = parse_bool(key, value);
  else if (key == "use_current") model.use_current = parse_bool(key, value);
  else if (key == "lambda") train.lambda = parse_double(key, value);
  else if (key == "r_target") train.r_target = parse_double(key, value);
  else if (key == "tau") train.tau = parse_double(key, value);
  else if (key == "lr") train.lr = parse_double(key, value);
  else if (key == "batch_size") train.batch_size = parse_int(key, value);
  else if (key == "max_epochs") train.max_epochs = parse_int(key, value);
  else if (key == "patience") train.patience = parse_int(key, value);
  else if (key == "clip_norm") train.clip_norm = parse_double(key, value);
  else if (key == "schedule_r_m") train.schedule.r_m = parse_double(key, value);
  else if (key == "schedule_beta") train.schedule.beta = parse_double(key, value);
  else if (key == "schedule_index_base") train.schedule.index_base = parse_int(key, value);
  else if (key == "bench_repetitions") bench_repetitions = parse_int(key, value);
  else if (key == "bench_policy") bench_policy = value;
  else if (key == "bench_nth") bench_nth = parse_int(key, value);
  else if (key == "analyze_top_n") analyze_top_n = parse_int(key, value);
  else if (key == "analyze_min_appear") analyze_min_appear = parse_long(key, value);
  else if (key == "analyze_cases") analyze_cases = parse_int(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  RunConfig cfg;
  for (const auto& [k, v] : pairs) cfg.apply(k, v);
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path,
                               const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file '" + path + "'");
  RunConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) +
                        " is not 'key = value': '" + line + "'");
    cfg.apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  for (const std::string& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: --set expects key=value, got '" + ov + "'");
    cfg.apply(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::validate(const std::string& command) const {
  if (mode != "leap" && mode != "plain_lstm" && mode != "plain_lstm_schedule")
    throw ConfigError("config: mode must be leap, plain_lstm or plain_lstm_schedule, got '" +
                      mode + "'");
  if (mode != "leap") {
    for (const char* key : {"lambda", "r_target", "tau", "use_cnn", "use_rnn_r", "use_follow",
                            "use_preceding", "use_current"})
      if (explicit_keys.count(key))
        throw ConfigError("config: key '" + std::string(key) + "' is incompatible with mode " +
                          mode);
  }
  if (mode != "plain_lstm_schedule") {
    for (const char* key : {"schedule_r_m", "schedule_beta", "schedule_index_base"})
      if (explicit_keys.count(key))
        throw ConfigError("config: key '" + std::string(key) + "' is incompatible with mode " +
                          mode);
  }
  if (num_classes < 2) throw ConfigError("config: key 'num_classes' must be >= 2");
  if (dev_fraction <= 0 || dev_fraction >= 1)
    throw ConfigError("config: key 'dev_fraction' must be in (0,1)");
  if (threads < 1) throw ConfigError("config: key 'threads' must be >= 1");
  if (train.lambda < 0) throw ConfigError("config: key 'lambda' must be >= 0");
  if (train.r_target < 0 || train.r_target > 1)
    throw ConfigError("config: key 'r_target' must be in [0,1]");
  if (train.tau <= 0) throw ConfigError("config: key 'tau' must be positive");
  if (train.batch_size < 1) throw ConfigError("config: key 'batch_size' must be >= 1");
  if (train.max_epochs < 1) throw ConfigError("config: key 'max_epochs' must be >= 1");
  if (train.patience < 1) throw ConfigError("config: key 'patience' must be >= 1");
  if (train.schedule.r_m < 0 || train.schedule.r_m > 1)
    throw ConfigError("config: key 'schedule_r_m' must be in [0,1]");
  if (train.schedule.beta < 0) throw ConfigError("config: key 'schedule_beta' must be >= 0");
  if (train.schedule.index_base != 0 && train.schedule.index_base != 1)
    throw ConfigError("config: key 'schedule_index_base' must be 0 or 1");
  if (min_freq < 1) throw ConfigError("config: key 'min_freq' must be >= 1");

  auto require_file = [](const std::string& key, const std::string& path) {
    if (path.empty()) throw ConfigError("config: key '" + key + "' is required");
    if (!std::filesystem::exists(path))
      throw ConfigError("config: key '" + key + "': file not found: " + path);
  };
  if (command == "train") {
    require_file("train_csv", train_csv);
    if (!embeddings.empty()) require_file("embeddings", embeddings);
  }
  if (command == "eval" || command == "bench" || command == "analyze")
    require_file("test_csv", test_csv);
  if (command == "bench") {
    if (bench_repetitions < 3)
      throw ConfigError("config: key 'bench_repetitions' must be >= 3");
    if (bench_policy != "model" && bench_policy != "keep_all" && bench_policy != "skip_all" &&
        bench_policy != "keep_every_nth")
      throw ConfigError("config: key 'bench_policy' must be one of model, keep_all, "
                        "skip_all, keep_every_nth");
    if (bench_policy == "keep_every_nth" && bench_nth < 1)
      throw ConfigError("config: key 'bench_nth' must be >= 1");
  }
  if (command == "analyze") {
    if (analyze_top_n < 1) throw ConfigError("config: key 'analyze_top_n' must be >= 1");
    if (analyze_min_appear < 1)
      throw ConfigError("config: key 'analyze_min_appear' must be >= 1");
    if (analyze_cases < 0) throw ConfigError("config: key 'analyze_cases' must be >= 0");
  }
}

std::string RunConfig::snapshot() const {
  std::map<std::string, std::string> kv;
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  kv["mode"] = mode;
  kv["train_csv"] = train_csv;
  kv["test_csv"] = test_csv;
  kv["embeddings"] = embeddings;
  kv["out_dir"] = out_dir;
  kv["num_classes"] = std::to_string(num_classes);
  kv["min_freq"] = std::to_string(min_freq);
  kv["dev_fraction"] = num(dev_fraction);
  kv["threads"] = std::to_string(threads);
  kv["seed"] = std::to_string(seed);
  kv["hidden"] = std::to_string(model.hidden);
  kv["emb_dim"] = std::to_string(model.emb_dim);
  kv["rev_hidden"] = std::to_string(model.rev_hidden);
  kv["mlp_hidden"] = std::to_string(model.mlp_hidden);
  std::string widths;
  for (int w : model.kernel_widths) widths += (widths.empty() ? "" : ",") + std::to_string(w);
  kv["kernel_widths"] = widths;
  kv["conv_filters"] = std::to_string(model.filters_per_width);
  kv["use_cnn"] = model.use_cnn ? "true" : "false";
  kv["use_rnn_r"] = model.use_rnn_r ? "true" : "false";
  kv["use_follow"] = model.use_follow ? "true" : "false";
  kv["use_preceding"] = model.use_preceding ? "true" : "false";
  kv["use_current"] = model.use_current ? "true" : "false";
  kv["lambda"] = num(train.lambda);
  kv["r_target"] = num(train.r_target);
  kv["tau"] = num(train.tau);
  kv["lr"] = num(train.lr);
  kv["batch_size"] = std::to_string(train.batch_size);
  kv["max_epochs"] = std::to_string(train.max_epochs);
  kv["patience"] = std::to_string(train.patience);
  kv["clip_norm"] = num(train.clip_norm);
  kv["schedule_r_m"] = num(train.schedule.r_m);
  kv["schedule_beta"] = num(train.schedule.beta);
  kv["schedule_index_base"] = std::to_string(train.schedule.index_base);
  kv["bench_repetitions"] = std::to_string(bench_repetitions);
  kv["bench_policy"] = bench_policy;
  kv["bench_nth"] = std::to_string(bench_nth);
  kv["analyze_top_n"] = std::to_string(analyze_top_n);
  kv["analyze_min_appear"] = std::to_string(analyze_min_appear);
  kv["analyze_cases"] = std::to_string(analyze_cases);

  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
  return out.str();
}

InferOptions RunConfig::bench_options() const {
  InferOptions opt;
  if (bench_policy == "keep_all") opt.policy = DecisionPolicy::keep_all;
  else if (bench_policy == "skip_all") opt.policy = DecisionPolicy::skip_all;
  else if (bench_policy == "keep_every_nth") opt.policy = DecisionPolicy::keep_every_nth;
  else opt.policy = DecisionPolicy::model;
  opt.nth = bench_nth;
  return opt;
}

}  // namespace leap
