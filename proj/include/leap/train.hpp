#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "leap/model.hpp"

namespace leap {

struct ScheduleConfig {
  bool enabled = false;
  real r_m = 0.45;
  real beta = 0.15;
  int index_base = 0;  // 0: first epoch masks at r_m; 1: first epoch at r_m - beta
};

struct TrainConfig {
  real lambda = 0.0;   // skip-rate penalty weight
  real r_target = 0.0; // desired skip rate
  real tau = 0.1;      // gumbel temperature, held constant
  real lr = 0.001;
  int batch_size = 32;
  int max_epochs = 10;
  int patience = 3;
  uint64_t seed = 1;
  real clip_norm = 0.0;  // 0 disables gradient clipping
  ScheduleConfig schedule;
};

struct AdamState {
  static constexpr real beta1 = 0.9;
  static constexpr real beta2 = 0.999;
  static constexpr real eps = 1e-8;
  std::vector<Tensor> m, v;  // aligned with LeapParams::for_each order
  long step = 0;

  static AdamState init(LeapParams& params);
};

struct Metrics {
  double accuracy = 0;
  double mean_ce = 0;
  double skip_rate = 0;
  double wall_s = 0;
  long updates = 0;
  long tokens = 0;
};

// L = L_c + lambda * (r_target - r)^2 built on the tape; class_probs and
// soft rate come from forward_train.
ValueId loss(Tape& t, ValueId class_probs, const std::vector<int32_t>& labels,
             ValueId soft_skip_rate, const TrainConfig& cfg);

// Bias-corrected Adam over every parameter group. grads entries may be
// empty (unreachable parameters); non-finite gradients raise an error
// naming the group.
void adam_step(LeapParams& params, const std::vector<const Tensor*>& grads,
               AdamState& state, real lr, real clip_norm = 0.0);

struct EpochStats {
  Metrics train;
  double soft_skip_rate = 0;
  double mask_p = 0;  // schedule-mode deletion probability this epoch
  double mean_loss = 0;
};

// One optimization pass over the training documents. In schedule mode the
// documents are re-masked with this epoch's probability before batching and
// the skip pathway must already be disabled in the model config.
EpochStats train_epoch(LeapParams& params, const LeapConfig& cfg,
                       const std::vector<Document>& docs, const TrainConfig& tcfg,
                       AdamState& adam, int epoch);

// Hard-decision evaluation over a document set (parallel across documents,
// deterministic aggregation in document order).
Metrics evaluate(const LeapParams& params, const LeapConfig& cfg,
                 const std::vector<Document>& docs);

struct FitResult {
  LeapParams best_params;
  double best_dev_accuracy = 0;
  int best_epoch = -1;
  int epochs_run = 0;
  std::vector<std::string> history;  // one JSON object per epoch
};

struct FitSinks {
  std::ostream* history = nullptr;  // JSON lines appended per epoch
  std::function<void(int, const EpochStats&, const Metrics&)> on_epoch;
  std::function<void(const LeapParams&, int)> on_best;  // checkpoint writer
};

// Epoch loop with dev-set early stopping: keeps the best dev accuracy,
// stops after `patience` epochs without improvement.
FitResult fit(LeapParams params, const LeapConfig& cfg, const std::vector<Document>& train,
              const std::vector<Document>& dev, const TrainConfig& tcfg,
              const FitSinks& sinks = {});

}  // namespace leap
