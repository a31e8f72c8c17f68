#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "leap/rng.hpp"
#include "leap/tensor.hpp"

namespace leap {

constexpr int32_t kPadId = 0;
constexpr int32_t kUnkId = 1;

struct RawDocument {
  std::vector<std::string> tokens;
  int label = 0;  // 0-based class index
};

struct Document {
  std::vector<int32_t> tokens;
  int label = 0;
  int length() const { return static_cast<int>(tokens.size()); }
};

class Vocabulary {
 public:
  Vocabulary();
  int32_t add(const std::string& token);          // returns existing id if present
  int32_t id_of(const std::string& token) const;  // kUnkId when missing
  const std::string& token_of(int32_t id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::unordered_map<std::string, int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Lowercases, splits on whitespace, and breaks punctuation characters off
// as single-character tokens. Empty input gives an empty list.
std::vector<std::string> tokenize(const std::string& text);

// Tokens with frequency >= min_freq, ids assigned in descending-frequency
// order starting at 2; frequency ties broken by first occurrence.
Vocabulary build_vocab(const std::vector<RawDocument>& corpus, int min_freq);

Document encode(const RawDocument& doc, const Vocabulary& vocab);

// Quoted CSV rows: class label (1-based), then one or more text fields
// which are joined with a space and tokenized. Throws with the offending
// row number on malformed input or a class outside [1, num_classes].
std::vector<RawDocument> load_corpus_csv(const std::string& path, int num_classes);

// Whitespace-separated embedding text: token then dim reals per line.
// Vocab rows found in the file are copied; missing rows are drawn uniform
// in [-0.05, 0.05]; the PAD row is zero.
Tensor load_embeddings(const std::string& path, const Vocabulary& vocab, int dim, Rng& rng);

// Random-only initialization following the same conventions.
Tensor random_embeddings(const Vocabulary& vocab, int dim, Rng& rng);

// Per-epoch word deletion for schedule training: drop each token with
// probability max(0, r_m - i*beta); a document never loses all tokens.
double schedule_mask_prob(double r_m, double beta, int epoch, int index_base);
Document schedule_mask(const Document& doc, double p, Rng& rng);

struct Batch {
  std::vector<int32_t> ids;  // [size x max_len], PAD-filled
  std::vector<int> lengths;
  std::vector<int32_t> labels;
  int size = 0, max_len = 0;

  const int32_t* row(int b) const { return ids.data() + static_cast<long>(b) * max_len; }
  Document doc(int b) const;
  long token_count() const;  // non-PAD tokens
};

std::vector<Batch> make_batches(const std::vector<Document>& docs, int batch_size,
                                uint64_t shuffle_seed);

}  // namespace leap
