#pragma once

#include <string>
#include <vector>

#include "leap/model.hpp"
#include "leap/text.hpp"
#include "leap/train.hpp"

// Planted-keyword classification task: every document is uniform noise
// except for 1-3 occurrences of class-specific keyword tokens.
namespace leap::testing {

struct SyntheticTask {
  int classes = 2;
  int vocab_words = 200;  // token ids 2 .. vocab_words+1
  int doc_len = 100;
  int keywords_per_class = 3;
  int max_planted = 3;

  int vocab_size() const { return vocab_words + 2; }
  std::vector<int32_t> keyword_ids(int cls) const;
  bool is_keyword(int32_t id) const;
  std::vector<Document> generate(int count, uint64_t seed) const;

  // Tokens named "w<id>"; lets the same task round-trip through the CSV
  // pipeline.
  Vocabulary vocabulary() const;
  void write_csv(const std::vector<Document>& docs, const std::string& path) const;

  LeapConfig model_config(bool skip_pathway) const;
};

}  // namespace leap::testing
