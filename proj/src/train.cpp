#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "leap/kernels.hpp"
#include "leap/train.hpp"

namespace leap {

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

AdamState AdamState::init(LeapParams& params) {
  AdamState s;
  params.for_each([&](const std::string&, Tensor& t) {
    Tensor z;
    z.rank = t.rank;
    z.dim = t.dim;
    z.v.assign(t.v.size(), 0.0);
    s.m.push_back(z);
    s.v.push_back(std::move(z));
  });
  return s;
}

ValueId loss(Tape& t, ValueId class_probs, const std::vector<int32_t>& labels,
             ValueId soft_skip_rate, const TrainConfig& cfg) {
  ValueId ce = t.cross_entropy(class_probs, labels);
  if (cfg.lambda == 0.0) return ce;
  ValueId diff = t.affine(soft_skip_rate, -1.0, cfg.r_target);  // r_target - r
  ValueId penalty = t.scale(t.mul(diff, diff), cfg.lambda);
  return t.add(ce, penalty);
}

void adam_step(LeapParams& params, const std::vector<const Tensor*>& grads,
               AdamState& state, real lr, real clip_norm) {
  state.step += 1;
  const real bc1 = 1.0 - std::pow(AdamState::beta1, static_cast<real>(state.step));
  const real bc2 = 1.0 - std::pow(AdamState::beta2, static_cast<real>(state.step));

  real scale = 1.0;
  if (clip_norm > 0) {
    real sq = 0;
    for (const Tensor* g : grads)
      if (g && !g->empty())
        for (real v : g->v) sq += v * v;
    const real norm = std::sqrt(sq);
    if (norm > clip_norm) scale = clip_norm / norm;
  }

  size_t gi = 0;
  params.for_each([&](const std::string& name, Tensor& p) {
    if (gi >= grads.size())
      throw std::invalid_argument("adam_step: gradient list shorter than parameter list");
    const Tensor* g = grads[gi];
    Tensor& m = state.m[gi];
    Tensor& v = state.v[gi];
    ++gi;
    if (g && !g->empty()) {
      if (g->numel() != p.numel())
        throw std::invalid_argument("adam_step: gradient shape mismatch for " + name);
      if (!g->all_finite())
        throw std::runtime_error("adam_step: non-finite gradient in parameter group " + name);
    }
    for (long i = 0; i < p.numel(); ++i) {
      const real gv = (g && !g->empty()) ? g->v[i] * scale : 0.0;
      m.v[i] = AdamState::beta1 * m.v[i] + (1 - AdamState::beta1) * gv;
      v.v[i] = AdamState::beta2 * v.v[i] + (1 - AdamState::beta2) * gv * gv;
      const real mhat = m.v[i] / bc1;
      const real vhat = v.v[i] / bc2;
      p.v[i] -= lr * mhat / (std::sqrt(vhat) + AdamState::eps);
    }
  });
}

EpochStats train_epoch(LeapParams& params, const LeapConfig& cfg,
                       const std::vector<Document>& docs, const TrainConfig& tcfg,
                       AdamState& adam, int epoch) {
  EpochStats stats;
  const double t0 = now_s();

  const std::vector<Document>* use_docs = &docs;
  std::vector<Document> masked;
  if (tcfg.schedule.enabled) {
    stats.mask_p = schedule_mask_prob(tcfg.schedule.r_m, tcfg.schedule.beta, epoch,
                                      tcfg.schedule.index_base);
    if (stats.mask_p > 0) {
      Rng rng(tcfg.seed, stream::schedule_mask, static_cast<uint64_t>(epoch));
      masked.reserve(docs.size());
      for (const Document& d : docs) masked.push_back(schedule_mask(d, stats.mask_p, rng));
      use_docs = &masked;
    }
  }

  const uint64_t shuffle_seed =
      mix64(mix64(tcfg.seed) ^ stream::shuffle) + static_cast<uint64_t>(epoch);
  std::vector<Batch> batches = make_batches(*use_docs, tcfg.batch_size, shuffle_seed);

  long correct = 0, seen = 0, tokens = 0;
  double ce_sum = 0, loss_sum = 0, soft_skip_sum = 0;
  Tape tape;
  for (size_t bi = 0; bi < batches.size(); ++bi) {
    const Batch& batch = batches[bi];
    tape.clear();
    BoundParams bound = bind_params(tape, params, cfg);
    Rng grng(tcfg.seed, stream::gumbel,
             (static_cast<uint64_t>(epoch) << 32) ^ static_cast<uint64_t>(bi));
    ForwardTrain fwd = forward_train(tape, bound, batch, tcfg.tau, grng);
    ValueId total = loss(tape, fwd.class_probs, batch.labels, fwd.soft_skip_rate, tcfg);

    const real loss_val = tape.val(total).item();
    if (!std::isfinite(loss_val))
      throw std::runtime_error("train_epoch: non-finite loss in batch " + std::to_string(bi));
    tape.backward(total);

    std::vector<const Tensor*> grads;
    grads.reserve(bound.ordered.size());
    for (const auto& [name, id] : bound.ordered) grads.push_back(&tape.grad(id));
    adam_step(params, grads, adam, tcfg.lr, tcfg.clip_norm);

    // batch metrics from the soft forward pass
    const Tensor& probs = tape.val(fwd.class_probs);
    for (int b = 0; b < batch.size; ++b) {
      int arg = 0;
      for (int j = 1; j < probs.cols(); ++j)
        if (probs.at(b, j) > probs.at(b, arg)) arg = j;
      if (arg == batch.labels[b]) ++correct;
      ce_sum -= std::log(std::max(probs.at(b, batch.labels[b]), kProbFloor));
      ++seen;
    }
    loss_sum += loss_val * batch.size;
    soft_skip_sum += tape.val(fwd.soft_skip_rate).item() * fwd.total_tokens;
    tokens += fwd.total_tokens;
  }

  stats.train.accuracy = seen ? static_cast<double>(correct) / seen : 0;
  stats.train.mean_ce = seen ? ce_sum / seen : 0;
  stats.train.tokens = tokens;
  stats.mean_loss = seen ? loss_sum / seen : 0;
  stats.soft_skip_rate = tokens ? soft_skip_sum / tokens : 0;
  stats.train.skip_rate = stats.soft_skip_rate;
  stats.train.wall_s = now_s() - t0;
  return stats;
}

Metrics evaluate(const LeapParams& params, const LeapConfig& cfg,
                 const std::vector<Document>& docs) {
  Metrics m;
  const double t0 = now_s();
  const int n = static_cast<int>(docs.size());
  std::vector<int> predicted(n);
  std::vector<long> updates(n), lengths(n);
  std::vector<double> ce(n);

#pragma omp parallel for schedule(static) if (kern::threads() > 1)
  for (int i = 0; i < n; ++i) {
    InferResult r = forward_infer(params, cfg, docs[i]);
    predicted[i] = r.predicted;
    updates[i] = r.updates;
    lengths[i] = docs[i].length();
    ce[i] = -std::log(std::max(r.class_probs[docs[i].label], kProbFloor));
    if (r.updates != r.trace.kept())
      throw std::logic_error("evaluate: update counter disagrees with kept tokens");
  }

  long correct = 0;
  for (int i = 0; i < n; ++i) {
    if (predicted[i] == docs[i].label) ++correct;
    m.updates += updates[i];
    m.tokens += lengths[i];
    m.mean_ce += ce[i];
  }
  m.accuracy = n ? static_cast<double>(correct) / n : 0;
  m.mean_ce = n ? m.mean_ce / n : 0;
  m.skip_rate = m.tokens ? 1.0 - static_cast<double>(m.updates) / m.tokens : 0;
  m.wall_s = now_s() - t0;
  return m;
}

FitResult fit(LeapParams params, const LeapConfig& cfg, const std::vector<Document>& train,
              const std::vector<Document>& dev, const TrainConfig& tcfg,
              const FitSinks& sinks) {
  if (dev.empty()) throw std::invalid_argument("fit: empty dev set");
  if (train.empty()) throw std::invalid_argument("fit: empty training set");

  FitResult res;
  AdamState adam = AdamState::init(params);
  int since_best = 0;
  for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    EpochStats es = train_epoch(params, cfg, train, tcfg, adam, epoch);
    Metrics dm = evaluate(params, cfg, dev);
    res.epochs_run = epoch + 1;

    std::ostringstream line;
    line.precision(17);
    line << "{\"epoch\":" << epoch << ",\"train_loss\":" << es.mean_loss
         << ",\"train_ce\":" << es.train.mean_ce << ",\"train_acc\":" << es.train.accuracy
         << ",\"soft_skip_rate\":" << es.soft_skip_rate;
    if (tcfg.schedule.enabled) line << ",\"mask_p\":" << es.mask_p;
    line << ",\"dev_acc\":" << dm.accuracy << ",\"dev_skip_rate\":" << dm.skip_rate << "}";
    res.history.push_back(line.str());
    if (sinks.history) {
      (*sinks.history) << line.str() << "\n";
      sinks.history->flush();
    }
    if (sinks.on_epoch) sinks.on_epoch(epoch, es, dm);

    if (res.best_epoch < 0 || dm.accuracy > res.best_dev_accuracy) {
      res.best_dev_accuracy = dm.accuracy;
      res.best_epoch = epoch;
      res.best_params = params;
      since_best = 0;
      if (sinks.on_best) sinks.on_best(params, epoch);
    } else {
      ++since_best;
      if (since_best >= tcfg.patience) break;
    }
  }
  return res;
}

}  // namespace leap
