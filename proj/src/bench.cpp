#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "leap/bench.hpp"
#include "leap/kernels.hpp"

namespace leap {

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

BenchSide run_side(const LeapParams& params, const LeapConfig& cfg,
                   const std::vector<Document>& docs, int repetitions,
                   const InferOptions& opt) {
  BenchSide side;
  for (const Document& d : docs) side.tokens += d.length();

  auto pass = [&]() {
    long updates = 0;
    for (const Document& d : docs) updates += forward_infer(params, cfg, d, opt).updates;
    return updates;
  };

  side.updates = pass();  // warm-up, also fixes the update count
  for (int r = 0; r < repetitions; ++r) {
    const double t0 = now_s();
    const long u = pass();
    side.runs_s.push_back(now_s() - t0);
    if (u != side.updates)
      throw std::logic_error("benchmark_inference: update count varied across runs");
  }
  side.median_s = median(side.runs_s);
  side.docs_per_s = side.median_s > 0 ? docs.size() / side.median_s : 0;
  side.mean_latency_ms = docs.empty() ? 0 : side.median_s * 1000.0 / docs.size();
  side.update_ratio = side.tokens ? static_cast<double>(side.updates) / side.tokens : 0;
  side.skip_rate = 1.0 - side.update_ratio;
  return side;
}

}  // namespace

BenchReport benchmark_inference(const LeapParams& params, const LeapConfig& cfg,
                                const std::vector<Document>& docs, int repetitions,
                                const InferOptions& policy) {
  if (repetitions < 3)
    throw std::invalid_argument("benchmark_inference: repetitions must be >= 3");
  if (docs.empty()) throw std::invalid_argument("benchmark_inference: empty document set");

  // timing runs are single-threaded; restore afterwards
  const int saved_threads = kern::threads();
  kern::set_threads(1);

  BenchReport rep;
  rep.repetitions = repetitions;
  rep.num_docs = static_cast<int>(docs.size());
  rep.model = run_side(params, cfg, docs, repetitions, policy);

  LeapConfig plain = cfg;
  plain.skip_pathway = false;
  rep.baseline = run_side(params, plain, docs, repetitions, {DecisionPolicy::keep_all, 1});

  rep.speedup = rep.model.median_s > 0 ? rep.baseline.median_s / rep.model.median_s : 0;
  kern::set_threads(saved_threads);
  return rep;
}

KeepRateTable keep_rate_table(const LeapParams& params, const LeapConfig& cfg,
                              const std::vector<Document>& docs, const Vocabulary& vocab,
                              int top_n, long min_appear) {
  if (min_appear < 1)
    throw std::invalid_argument("keep_rate_table: min_appear must be >= 1");
  const int n = static_cast<int>(docs.size());
  std::vector<SkipTrace> traces(n);
#pragma omp parallel for schedule(static) if (kern::threads() > 1)
  for (int i = 0; i < n; ++i) traces[i] = forward_infer(params, cfg, docs[i]).trace;

  // (class, word) -> (kept, appeared); class -1 holds the global counts
  std::map<std::pair<int, int32_t>, std::pair<long, long>> counts;
  for (int i = 0; i < n; ++i) {
    const Document& d = docs[i];
    for (int pos = 0; pos < d.length(); ++pos) {
      const int32_t wid = d.tokens[pos];
      if (wid == kPadId) continue;
      const long kept = traces[i].skipped[pos] ? 0 : 1;
      for (int cls : {d.label, -1}) {
        auto& c = counts[{cls, wid}];
        c.first += kept;
        c.second += 1;
      }
    }
  }

  KeepRateTable table;
  table.top_n = top_n;
  table.min_appear = min_appear;

  std::map<int, std::vector<KeepRateRow>> grouped;
  for (const auto& [key, c] : counts) {
    if (c.second < min_appear) continue;
    KeepRateRow row;
    row.cls = key.first;
    row.word_id = key.second;
    row.word = vocab.token_of(key.second);
    row.kept = c.first;
    row.appeared = c.second;
    row.keep_rate = static_cast<double>(c.first) / c.second;
    grouped[key.first].push_back(std::move(row));
  }
  for (auto& [cls, rows] : grouped) {
    std::sort(rows.begin(), rows.end(), [](const KeepRateRow& a, const KeepRateRow& b) {
      if (a.keep_rate != b.keep_rate) return a.keep_rate > b.keep_rate;
      if (a.appeared != b.appeared) return a.appeared > b.appeared;
      return a.word_id < b.word_id;
    });
    if (top_n > 0 && static_cast<int>(rows.size()) > top_n) rows.resize(top_n);
    auto& dst = cls < 0 ? table.global : table.per_class;
    dst.insert(dst.end(), rows.begin(), rows.end());
  }
  return table;
}

namespace {

std::string escape_html(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string render_case(const Document& doc, const Vocabulary& vocab, const SkipTrace& trace,
                        CaseFormat format) {
  if (trace.skipped.size() != doc.tokens.size())
    throw std::invalid_argument("render_case: trace length " +
                                std::to_string(trace.skipped.size()) +
                                " does not match document length " +
                                std::to_string(doc.tokens.size()));
  std::string out;
  if (format == CaseFormat::html) out += "<p class=\"case\">";
  for (size_t i = 0; i < doc.tokens.size(); ++i) {
    if (i) out.push_back(' ');
    const std::string word = vocab.token_of(doc.tokens[i]);
    const bool skipped = trace.skipped[i];
    switch (format) {
      case CaseFormat::text:
        out += skipped ? "~~" + word + "~~" : word;
        break;
      case CaseFormat::ansi:
        out += skipped ? "\033[90m" + word + "\033[0m" : "\033[31m" + word + "\033[0m";
        break;
      case CaseFormat::html:
        out += skipped
                   ? "<span style=\"color:#999\">" + escape_html(word) + "</span>"
                   : "<span style=\"color:#c00;font-weight:bold\">" + escape_html(word) +
                         "</span>";
        break;
    }
  }
  if (format == CaseFormat::html) out += "</p>";
  return out;
}

namespace {

nlohmann::json side_json(const BenchSide& s) {
  return {{"median_s", s.median_s},       {"runs_s", s.runs_s},
          {"docs_per_s", s.docs_per_s},   {"mean_latency_ms", s.mean_latency_ms},
          {"updates", s.updates},         {"tokens", s.tokens},
          {"update_ratio", s.update_ratio}, {"skip_rate", s.skip_rate}};
}

BenchSide side_from_json(const nlohmann::json& j) {
  BenchSide s;
  s.median_s = j.at("median_s");
  s.runs_s = j.at("runs_s").get<std::vector<double>>();
  s.docs_per_s = j.at("docs_per_s");
  s.mean_latency_ms = j.at("mean_latency_ms");
  s.updates = j.at("updates");
  s.tokens = j.at("tokens");
  s.update_ratio = j.at("update_ratio");
  s.skip_rate = j.at("skip_rate");
  return s;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("export: cannot open " + path);
  out << body;
  if (!out) throw std::runtime_error("export: write failed for " + path);
}

}  // namespace

void export_bench_json(const BenchReport& report, const std::string& path) {
  nlohmann::json j{{"version", report.version},
                   {"repetitions", report.repetitions},
                   {"num_docs", report.num_docs},
                   {"model", side_json(report.model)},
                   {"baseline", side_json(report.baseline)},
                   {"speedup", report.speedup}};
  write_file(path, j.dump(2) + "\n");
}

BenchReport import_bench_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("import_bench_json: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  BenchReport r;
  r.version = j.at("version");
  r.repetitions = j.at("repetitions");
  r.num_docs = j.at("num_docs");
  r.model = side_from_json(j.at("model"));
  r.baseline = side_from_json(j.at("baseline"));
  r.speedup = j.at("speedup");
  return r;
}

void export_bench_tsv(const BenchReport& report, const std::string& path) {
  std::ostringstream out;
  out << "key\tvalue\n";
  out << "version\t" << report.version << "\n";
  out << "repetitions\t" << report.repetitions << "\n";
  out << "num_docs\t" << report.num_docs << "\n";
  out << "speedup\t" << report.speedup << "\n";
  for (const auto& [name, s] : {std::pair<const char*, const BenchSide&>{"model", report.model},
                                {"baseline", report.baseline}}) {
    out << name << ".median_s\t" << s.median_s << "\n";
    out << name << ".docs_per_s\t" << s.docs_per_s << "\n";
    out << name << ".mean_latency_ms\t" << s.mean_latency_ms << "\n";
    out << name << ".updates\t" << s.updates << "\n";
    out << name << ".tokens\t" << s.tokens << "\n";
    out << name << ".update_ratio\t" << s.update_ratio << "\n";
    out << name << ".skip_rate\t" << s.skip_rate << "\n";
  }
  write_file(path, out.str());
}

namespace {

nlohmann::json row_json(const KeepRateRow& r) {
  return {{"word", r.word},   {"word_id", r.word_id},   {"class", r.cls},
          {"keep_rate", r.keep_rate}, {"kept", r.kept}, {"appeared", r.appeared}};
}

KeepRateRow row_from_json(const nlohmann::json& j) {
  KeepRateRow r;
  r.word = j.at("word");
  r.word_id = j.at("word_id");
  r.cls = j.at("class");
  r.keep_rate = j.at("keep_rate");
  r.kept = j.at("kept");
  r.appeared = j.at("appeared");
  return r;
}

}  // namespace

void export_keep_rate_json(const KeepRateTable& table, const std::string& path) {
  nlohmann::json per = nlohmann::json::array(), glob = nlohmann::json::array();
  for (const auto& r : table.per_class) per.push_back(row_json(r));
  for (const auto& r : table.global) glob.push_back(row_json(r));
  nlohmann::json j{{"version", table.version},
                   {"top_n", table.top_n},
                   {"min_appear", table.min_appear},
                   {"per_class", per},
                   {"global", glob}};
  write_file(path, j.dump(2) + "\n");
}

KeepRateTable import_keep_rate_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("import_keep_rate_json: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  KeepRateTable t;
  t.version = j.at("version");
  t.top_n = j.at("top_n");
  t.min_appear = j.at("min_appear");
  for (const auto& r : j.at("per_class")) t.per_class.push_back(row_from_json(r));
  for (const auto& r : j.at("global")) t.global.push_back(row_from_json(r));
  return t;
}

void export_keep_rate_tsv(const KeepRateTable& table, const std::string& path) {
  std::ostringstream out;
  out << "word\tclass\tkeep_rate\tkept\tappeared\n";
  char buf[32];
  auto emit = [&](const KeepRateRow& r) {
    std::snprintf(buf, sizeof buf, "%.6f", r.keep_rate);
    out << r.word << "\t" << r.cls << "\t" << buf << "\t" << r.kept << "\t" << r.appeared
        << "\n";
  };
  for (const auto& r : table.per_class) emit(r);
  for (const auto& r : table.global) emit(r);
  write_file(path, out.str());
}

}  // namespace leap
