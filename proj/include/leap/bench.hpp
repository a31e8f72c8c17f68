#pragma once

#include <string>
#include <vector>

#include "leap/model.hpp"
#include "leap/text.hpp"

namespace leap {

struct BenchSide {
  double median_s = 0;
  std::vector<double> runs_s;
  double docs_per_s = 0;
  double mean_latency_ms = 0;
  long updates = 0;
  long tokens = 0;
  double update_ratio = 0;
  double skip_rate = 0;
};

struct BenchReport {
  int version = 1;
  int repetitions = 0;
  int num_docs = 0;
  BenchSide model;     // skip-enabled model under the given policy
  BenchSide baseline;  // plain LSTM of the same dimensions
  double speedup = 0;  // baseline median / model median
};

// Median-of-repetitions wall-clock comparison on identical documents, one
// warm-up pass excluded, single-threaded timing. Also reports the
// hardware-independent update ratio (executed cell updates / tokens).
BenchReport benchmark_inference(const LeapParams& params, const LeapConfig& cfg,
                                const std::vector<Document>& docs, int repetitions,
                                const InferOptions& policy = {});

struct KeepRateRow {
  std::string word;
  int32_t word_id = 0;
  int cls = -1;  // -1 in the global table
  double keep_rate = 0;
  long kept = 0;
  long appeared = 0;
};

struct KeepRateTable {
  int version = 1;
  int top_n = 0;
  long min_appear = 0;
  std::vector<KeepRateRow> per_class;  // grouped by class, ranked
  std::vector<KeepRateRow> global;
};

// Aggregates hard-decision traces into per-word keep rates, per class and
// globally; words appearing fewer than min_appear times are dropped and the
// top_n per group are ranked by keep rate, then appearance count.
KeepRateTable keep_rate_table(const LeapParams& params, const LeapConfig& cfg,
                              const std::vector<Document>& docs, const Vocabulary& vocab,
                              int top_n, long min_appear);

enum class CaseFormat { ansi, html, text };

// Rendering of one document's keep/skip trace: kept words highlighted,
// skipped words de-emphasized (struck through in text mode).
std::string render_case(const Document& doc, const Vocabulary& vocab, const SkipTrace& trace,
                        CaseFormat format);

void export_bench_json(const BenchReport& report, const std::string& path);
BenchReport import_bench_json(const std::string& path);
void export_bench_tsv(const BenchReport& report, const std::string& path);

void export_keep_rate_json(const KeepRateTable& table, const std::string& path);
KeepRateTable import_keep_rate_json(const std::string& path);
// Columns: word, class, keep_rate (6 decimals), kept, appeared.
void export_keep_rate_tsv(const KeepRateTable& table, const std::string& path);

}  // namespace leap
