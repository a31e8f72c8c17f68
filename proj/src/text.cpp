#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "leap/text.hpp"

namespace leap {

Vocabulary::Vocabulary() {
  id_to_token_ = {"<pad>", "<unk>"};
  token_to_id_ = {{"<pad>", kPadId}, {"<unk>", kUnkId}};
}

int32_t Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const int32_t id = static_cast<int32_t>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(token);
  return id;
}

int32_t Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int32_t id) const {
  return id_to_token_.at(static_cast<size_t>(id));
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (c < 128 && !std::isalnum(c)) {
      flush();
      out.push_back(std::string(1, static_cast<char>(c)));
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

Vocabulary build_vocab(const std::vector<RawDocument>& corpus, int min_freq) {
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::unordered_map<std::string, long> freq;
  std::unordered_map<std::string, long> first_seen;
  long pos = 0;
  for (const RawDocument& d : corpus)
    for (const std::string& tok : d.tokens) {
      auto [it, inserted] = freq.try_emplace(tok, 0);
      it->second++;
      if (inserted) first_seen.emplace(tok, pos);
      ++pos;
    }
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : freq)
    if (n >= min_freq) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return first_seen.at(a.first) < first_seen.at(b.first);
  });
  Vocabulary v;
  for (auto& [tok, n] : kept) v.add(tok);
  return v;
}

Document encode(const RawDocument& doc, const Vocabulary& vocab) {
  Document d;
  d.label = doc.label;
  d.tokens.reserve(doc.tokens.size());
  for (const std::string& tok : doc.tokens) d.tokens.push_back(vocab.id_of(tok));
  return d;
}

namespace {

// One CSV record; fields are optionally double-quoted with "" escapes.
// Returns false at end of stream.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, long& line_no) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;
  std::string cur;
  bool quoted = false, any = false;
  while (true) {
    if (c == EOF) break;
    any = true;
    if (quoted) {
      if (c == '"') {
        const int next = in.get();
        if (next == '"') {
          cur.push_back('"');
        } else {
          quoted = false;
          c = next;
          continue;
        }
      } else {
        if (c == '\n') ++line_no;
        cur.push_back(static_cast<char>(c));
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\n') {
      ++line_no;
      break;
    } else if (c != '\r') {
      cur.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  if (!any) return false;
  fields.push_back(std::move(cur));
  return true;
}

}  // namespace

std::vector<RawDocument> load_corpus_csv(const std::string& path, int num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_corpus_csv: cannot open " + path);
  std::vector<RawDocument> docs;
  std::vector<std::string> fields;
  long line_no = 1, row = 0;
  while (true) {
    const long row_line = line_no;
    if (!read_csv_record(in, fields, line_no)) break;
    ++row;
    if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
    if (fields.size() < 2)
      throw std::runtime_error("load_corpus_csv: row " + std::to_string(row) + " (line " +
                               std::to_string(row_line) + "): expected class and text fields");
    int cls = 0;
    try {
      size_t used = 0;
      cls = std::stoi(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::runtime_error("load_corpus_csv: row " + std::to_string(row) +
                               ": malformed class field '" + fields[0] + "'");
    }
    if (cls < 1 || cls > num_classes)
      throw std::runtime_error("load_corpus_csv: row " + std::to_string(row) + ": class " +
                               std::to_string(cls) + " outside [1," +
                               std::to_string(num_classes) + "]");
    std::string text;
    for (size_t i = 1; i < fields.size(); ++i) {
      if (i > 1) text.push_back(' ');
      text += fields[i];
    }
    RawDocument d;
    d.label = cls - 1;
    d.tokens = tokenize(text);
    if (d.tokens.empty())
      throw std::runtime_error("load_corpus_csv: row " + std::to_string(row) +
                               ": empty document text");
    docs.push_back(std::move(d));
  }
  return docs;
}

Tensor random_embeddings(const Vocabulary& vocab, int dim, Rng& rng) {
  Tensor e = Tensor::zeros({vocab.size(), dim});
  for (int i = kPadId + 1; i < vocab.size(); ++i)
    for (int j = 0; j < dim; ++j) e.at(i, j) = rng.uniform(-0.05, 0.05);
  return e;
}

Tensor load_embeddings(const std::string& path, const Vocabulary& vocab, int dim, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_embeddings: cannot open " + path);
  // Random init first; file rows then overwrite. Keeps the draw order (and
  // therefore every miss row) independent of file order.
  Tensor e = random_embeddings(vocab, dim, rng);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    const int32_t id = vocab.id_of(tok);
    const bool wanted = id != kUnkId || tok == vocab.token_of(kUnkId);
    double val = 0;
    int count = 0;
    std::vector<double> vals;
    vals.reserve(dim);
    while (ls >> val) {
      ++count;
      if (count <= dim) vals.push_back(val);
    }
    if (count != dim)
      throw std::runtime_error("load_embeddings: token '" + tok + "' has " +
                               std::to_string(count) + " values, expected " +
                               std::to_string(dim));
    if (!wanted || id == kPadId) continue;
    for (int j = 0; j < dim; ++j) e.at(id, j) = vals[j];
  }
  return e;
}

double schedule_mask_prob(double r_m, double beta, int epoch, int index_base) {
  const double p = r_m - (epoch + index_base) * beta;
  // snap rounding residue (e.g. 0.45 - 3*0.15) to an exact zero so the
  // unmasked epochs are identity transforms
  return p < 1e-9 ? 0.0 : p;
}

Document schedule_mask(const Document& doc, double p, Rng& rng) {
  if (p <= 0.0) return doc;
  Document out;
  out.label = doc.label;
  out.tokens.reserve(doc.tokens.size());
  for (int32_t id : doc.tokens)
    if (!rng.bernoulli(p)) out.tokens.push_back(id);
  if (out.tokens.empty() && !doc.tokens.empty())
    out.tokens.push_back(doc.tokens[rng.uniform_int(doc.length())]);
  return out;
}

Document Batch::doc(int b) const {
  Document d;
  d.label = labels[b];
  d.tokens.assign(row(b), row(b) + lengths[b]);
  return d;
}

long Batch::token_count() const {
  long n = 0;
  for (int l : lengths) n += l;
  return n;
}

std::vector<Batch> make_batches(const std::vector<Document>& docs, int batch_size,
                                uint64_t shuffle_seed) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::vector<int> order(docs.size());
  for (size_t i = 0; i < docs.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(shuffle_seed, stream::shuffle);
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(i + 1)]);

  std::vector<Batch> batches;
  for (size_t start = 0; start < order.size(); start += batch_size) {
    const int bsz = static_cast<int>(std::min<size_t>(batch_size, order.size() - start));
    Batch b;
    b.size = bsz;
    for (int i = 0; i < bsz; ++i)
      b.max_len = std::max(b.max_len, docs[order[start + i]].length());
    b.ids.assign(static_cast<long>(bsz) * b.max_len, kPadId);
    for (int i = 0; i < bsz; ++i) {
      const Document& d = docs[order[start + i]];
      b.lengths.push_back(d.length());
      b.labels.push_back(d.label);
      std::copy(d.tokens.begin(), d.tokens.end(), b.ids.begin() + static_cast<long>(i) * b.max_len);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace leap
