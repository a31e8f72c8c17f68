#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "leap/tape.hpp"
#include "leap/text.hpp"

namespace leap {

struct LeapConfig {
  int hidden = 300;        // h, main LSTM state
  int emb_dim = 300;       // d
  int rev_hidden = 20;     // h', reverse LSTM state
  int mlp_hidden = 20;     // s, skip-MLP hidden layer
  std::vector<int> kernel_widths{3, 4, 5};
  int filters_per_width = 60;
  int num_classes = 0;
  int vocab_size = 0;
  bool skip_pathway = true;  // false: plain LSTM classifier

  // Feature-removal switches for the skip decision. They zero the feature
  // slice; parameter shapes do not change.
  bool use_cnn = true;
  bool use_rnn_r = true;
  bool use_follow = true;
  bool use_preceding = true;
  bool use_current = true;

  int conv_dim() const { return filters_per_width * static_cast<int>(kernel_widths.size()); }
  int follow_dim() const { return rev_hidden + conv_dim(); }          // f
  int precede_dim() const { return hidden; }                          // p, reuses h_{t-1}
  int mlp_in_dim() const { return emb_dim + precede_dim() + follow_dim(); }

  void validate() const;
};

struct LeapParams {
  Tensor embedding;            // [V x d]
  Tensor lstm_w, lstm_b;       // [4h x (d+h)], [4h]; gate rows i,f,o,g
  Tensor rev_w, rev_b;         // [4h' x (d+h')], [4h']
  std::vector<Tensor> conv_w;  // per width [w, d, F]
  std::vector<Tensor> conv_b;  // per width [F]
  Tensor mlp_w1, mlp_b1;       // [s x (d+p+f)], [s]
  Tensor mlp_w2, mlp_b2;       // [2 x s], [2]
  Tensor h_end;                // [f], learned end-of-sequence feature
  Tensor cls_w;                // [k x h]

  static LeapParams init(const LeapConfig& cfg, Rng& rng);
  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;
  long param_count() const;
};

// Hard keep/skip record of one inference pass over one document.
struct SkipTrace {
  std::vector<std::array<real, 2>> pi;  // [keep, skip] per token
  std::vector<uint8_t> skipped;
  long kept() const;
  double skip_rate() const;
};

// ---- tape-building blocks (training path) ----

struct BoundParams {
  const LeapConfig* cfg = nullptr;
  ValueId embedding{-1}, lstm_w{-1}, lstm_b{-1}, rev_w{-1}, rev_b{-1};
  std::vector<ValueId> conv_w, conv_b;
  ValueId mlp_w1{-1}, mlp_b1{-1}, mlp_w2{-1}, mlp_b2{-1}, h_end{-1}, cls_w{-1};
  std::vector<std::pair<std::string, ValueId>> ordered;  // matches for_each order
};

BoundParams bind_params(Tape& tape, const LeapParams& params, const LeapConfig& cfg);

// One LSTM cell update; returns (h, c).
std::pair<ValueId, ValueId> lstm_step(Tape& t, ValueId x, ValueId h_prev, ValueId c_prev,
                                      ValueId w, ValueId b, int hidden);

// Per-position n-gram features of the embedded sequence, all widths
// concatenated, relu applied; [T x conv_dim].
ValueId conv_features(Tape& t, ValueId embedded, const BoundParams& p);

// Reverse-LSTM states; result[t] encodes x_{t:T-1} (0-based).
std::vector<ValueId> reverse_encode(Tape& t, const std::vector<ValueId>& x_rows,
                                    const BoundParams& p);

// Lookahead feature for 0-based position t: [rev[t+1]; conv[t+1]] before the
// last token, the learned end vector at the last token.
ValueId follow_features(Tape& t, int pos, int t_len, ValueId conv,
                        const std::vector<ValueId>& rev, const BoundParams& p);

// pi_t = softmax(W2 relu(W1 [x; f_pre; f_fol] + b1) + b2); index 0 keeps.
ValueId skip_distribution(Tape& t, ValueId x, ValueId f_pre, ValueId f_fol,
                          const BoundParams& p);

ValueId classify(Tape& t, ValueId h_last, ValueId cls_w);

struct TrainTrace {
  std::vector<real> pi_skip;  // pi_t[1]
  std::vector<real> y_skip;   // sampled soft decision [y_t]_1
};

struct ForwardTrain {
  ValueId class_probs{-1};     // [B x k]
  ValueId soft_skip_rate{-1};  // scalar; constant 0 when the pathway is off
  std::vector<TrainTrace> traces;
  long total_tokens = 0;
};

// Soft-decision forward pass over a batch on one tape. Every non-PAD token
// draws a gumbel-softmax sample and mixes both branches; PAD positions are
// never visited (documents are walked at true length).
ForwardTrain forward_train(Tape& t, const BoundParams& p, const Batch& batch, real tau,
                           Rng& rng);

// ---- inference path (no tape) ----

enum class DecisionPolicy { model, keep_all, skip_all, keep_every_nth };

struct InferOptions {
  DecisionPolicy policy = DecisionPolicy::model;
  int nth = 1;  // keep positions with t % nth == 0
};

struct InferResult {
  std::vector<real> class_probs;
  std::vector<real> h_last;  // final hidden state
  SkipTrace trace;
  long updates = 0;  // executed main-cell steps; equals kept tokens
  int predicted = -1;
};

InferResult forward_infer(const LeapParams& params, const LeapConfig& cfg,
                          const Document& doc, const InferOptions& opt = {});

}  // namespace leap
