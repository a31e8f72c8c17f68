#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <tuple>

#include "leap/kernels.hpp"
#include "leap/model.hpp"

namespace leap {

void LeapConfig::validate() const {
  auto pos = [](int v, const char* name) {
    if (v <= 0) throw std::invalid_argument(std::string("config: ") + name + " must be positive");
  };
  pos(hidden, "hidden");
  pos(emb_dim, "emb_dim");
  if (num_classes < 2) throw std::invalid_argument("config: num_classes must be >= 2");
  if (vocab_size < 2) throw std::invalid_argument("config: vocab_size must be >= 2");
  if (skip_pathway) {
    pos(rev_hidden, "rev_hidden");
    pos(mlp_hidden, "mlp_hidden");
    pos(filters_per_width, "filters_per_width");
    if (kernel_widths.empty())
      throw std::invalid_argument("config: kernel_widths must be non-empty");
    for (int w : kernel_widths) pos(w, "kernel_widths");
    if (mlp_hidden >= hidden || mlp_hidden >= emb_dim)
      throw std::invalid_argument("config: mlp_hidden must be small (< hidden and < emb_dim)");
  }
}

namespace {

Tensor uniform_init(std::initializer_list<int> shape, Rng& rng) {
  Tensor t = Tensor::zeros(shape);
  for (real& v : t.v) v = rng.uniform(-0.05, 0.05);
  return t;
}

}  // namespace

LeapParams LeapParams::init(const LeapConfig& cfg, Rng& rng) {
  cfg.validate();
  LeapParams p;
  p.embedding = Tensor::zeros({cfg.vocab_size, cfg.emb_dim});
  for (int i = kPadId + 1; i < cfg.vocab_size; ++i)
    for (int j = 0; j < cfg.emb_dim; ++j) p.embedding.at(i, j) = rng.uniform(-0.05, 0.05);

  p.lstm_w = uniform_init({4 * cfg.hidden, cfg.emb_dim + cfg.hidden}, rng);
  p.lstm_b = Tensor::zeros({4 * cfg.hidden});
  if (cfg.skip_pathway) {
    p.rev_w = uniform_init({4 * cfg.rev_hidden, cfg.emb_dim + cfg.rev_hidden}, rng);
    p.rev_b = Tensor::zeros({4 * cfg.rev_hidden});
    for (int w : cfg.kernel_widths) {
      p.conv_w.push_back(uniform_init({w, cfg.emb_dim, cfg.filters_per_width}, rng));
      p.conv_b.push_back(Tensor::zeros({cfg.filters_per_width}));
    }
    p.mlp_w1 = uniform_init({cfg.mlp_hidden, cfg.mlp_in_dim()}, rng);
    p.mlp_b1 = Tensor::zeros({cfg.mlp_hidden});
    p.mlp_w2 = uniform_init({2, cfg.mlp_hidden}, rng);
    p.mlp_b2 = Tensor::zeros({2});
    p.h_end = Tensor::zeros({cfg.follow_dim()});
  }
  p.cls_w = uniform_init({cfg.num_classes, cfg.hidden}, rng);
  return p;
}

void LeapParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
  auto visit = [&](const std::string& name, Tensor& t) {
    if (!t.empty()) fn(name, t);
  };
  visit("embedding", embedding);
  visit("lstm_w", lstm_w);
  visit("lstm_b", lstm_b);
  visit("rev_w", rev_w);
  visit("rev_b", rev_b);
  for (size_t i = 0; i < conv_w.size(); ++i) {
    visit("conv_w" + std::to_string(conv_w[i].dim[0]), conv_w[i]);
    visit("conv_b" + std::to_string(conv_w[i].dim[0]), conv_b[i]);
  }
  visit("mlp_w1", mlp_w1);
  visit("mlp_b1", mlp_b1);
  visit("mlp_w2", mlp_w2);
  visit("mlp_b2", mlp_b2);
  visit("h_end", h_end);
  visit("cls_w", cls_w);
}

void LeapParams::for_each(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<LeapParams*>(this)->for_each(
      [&](const std::string& name, Tensor& t) { fn(name, t); });
}

long LeapParams::param_count() const {
  long n = 0;
  for_each([&](const std::string&, const Tensor& t) { n += t.numel(); });
  return n;
}

long SkipTrace::kept() const {
  long n = 0;
  for (uint8_t s : skipped) n += s ? 0 : 1;
  return n;
}

double SkipTrace::skip_rate() const {
  if (skipped.empty()) return 0.0;
  return static_cast<double>(skipped.size() - kept()) / skipped.size();
}

BoundParams bind_params(Tape& tape, const LeapParams& params, const LeapConfig& cfg) {
  BoundParams b;
  b.cfg = &cfg;
  auto& mut = const_cast<LeapParams&>(params);
  mut.for_each([&](const std::string& name, Tensor& t) {
    const ValueId id = tape.leaf(&t);
    b.ordered.emplace_back(name, id);
    if (name == "embedding") b.embedding = id;
    else if (name == "lstm_w") b.lstm_w = id;
    else if (name == "lstm_b") b.lstm_b = id;
    else if (name == "rev_w") b.rev_w = id;
    else if (name == "rev_b") b.rev_b = id;
    else if (name == "mlp_w1") b.mlp_w1 = id;
    else if (name == "mlp_b1") b.mlp_b1 = id;
    else if (name == "mlp_w2") b.mlp_w2 = id;
    else if (name == "mlp_b2") b.mlp_b2 = id;
    else if (name == "h_end") b.h_end = id;
    else if (name == "cls_w") b.cls_w = id;
    else if (name.rfind("conv_w", 0) == 0) b.conv_w.push_back(id);
    else if (name.rfind("conv_b", 0) == 0) b.conv_b.push_back(id);
  });
  return b;
}

std::pair<ValueId, ValueId> lstm_step(Tape& t, ValueId x, ValueId h_prev, ValueId c_prev,
                                      ValueId w, ValueId b, int hidden) {
  ValueId xh = t.concat({x, h_prev}, 0);
  ValueId z = t.add(t.matvec(w, xh), b);
  ValueId gi = t.activation(t.slice(z, 0, hidden), Act::sigmoid);
  ValueId gf = t.activation(t.slice(z, hidden, 2 * hidden), Act::sigmoid);
  ValueId go = t.activation(t.slice(z, 2 * hidden, 3 * hidden), Act::sigmoid);
  ValueId gg = t.activation(t.slice(z, 3 * hidden, 4 * hidden), Act::tanh);
  ValueId c = t.add(t.mul(gf, c_prev), t.mul(gi, gg));
  ValueId h = t.mul(go, t.activation(c, Act::tanh));
  return {h, c};
}

ValueId conv_features(Tape& t, ValueId embedded, const BoundParams& p) {
  std::vector<ValueId> parts;
  for (size_t i = 0; i < p.conv_w.size(); ++i)
    parts.push_back(t.add_rowvec(t.conv1d(embedded, p.conv_w[i]), p.conv_b[i]));
  return t.activation(parts.size() == 1 ? parts[0] : t.concat(parts, 1), Act::relu);
}

std::vector<ValueId> reverse_encode(Tape& t, const std::vector<ValueId>& x_rows,
                                    const BoundParams& p) {
  const int hp = p.cfg->rev_hidden;
  const int T = static_cast<int>(x_rows.size());
  std::vector<ValueId> out(T);
  ValueId h = t.constant(Tensor::zeros({hp}));
  ValueId c = t.constant(Tensor::zeros({hp}));
  for (int pos = T - 1; pos >= 0; --pos) {
    std::tie(h, c) = lstm_step(t, x_rows[pos], h, c, p.rev_w, p.rev_b, hp);
    out[pos] = h;
  }
  return out;
}

ValueId follow_features(Tape& t, int pos, int t_len, ValueId conv,
                        const std::vector<ValueId>& rev, const BoundParams& p) {
  const LeapConfig& cfg = *p.cfg;
  if (pos < 0 || pos >= t_len)
    throw std::invalid_argument("follow_features: position " + std::to_string(pos) +
                                " out of range [0," + std::to_string(t_len) + ")");
  if (!cfg.use_follow) return t.constant(Tensor::zeros({cfg.follow_dim()}));
  if (pos == t_len - 1) return p.h_end;
  ValueId rev_part = cfg.use_rnn_r ? rev[pos + 1]
                                   : t.constant(Tensor::zeros({cfg.rev_hidden}));
  ValueId conv_part = cfg.use_cnn ? t.row(conv, pos + 1)
                                  : t.constant(Tensor::zeros({cfg.conv_dim()}));
  return t.concat({rev_part, conv_part}, 0);
}

ValueId skip_distribution(Tape& t, ValueId x, ValueId f_pre, ValueId f_fol,
                          const BoundParams& p) {
  const LeapConfig& cfg = *p.cfg;
  ValueId xin = cfg.use_current ? x : t.constant(Tensor::zeros({cfg.emb_dim}));
  ValueId pin = cfg.use_preceding ? f_pre : t.constant(Tensor::zeros({cfg.precede_dim()}));
  ValueId cat = t.concat({xin, pin, f_fol}, 0);
  ValueId s = t.activation(t.add(t.matvec(p.mlp_w1, cat), p.mlp_b1), Act::relu);
  return t.softmax(t.add(t.matvec(p.mlp_w2, s), p.mlp_b2));
}

ValueId classify(Tape& t, ValueId h_last, ValueId cls_w) {
  return t.softmax(t.matvec(cls_w, h_last));
}

ForwardTrain forward_train(Tape& t, const BoundParams& p, const Batch& batch, real tau,
                           Rng& rng) {
  const LeapConfig& cfg = *p.cfg;
  if (cfg.skip_pathway && tau <= 0)
    throw std::invalid_argument("forward_train: tau must be positive");

  ForwardTrain out;
  out.total_tokens = batch.token_count();
  ValueId zero_h = t.constant(Tensor::zeros({cfg.hidden}));
  ValueId r_sum = t.constant(Tensor::scalar(0.0));
  std::vector<ValueId> prob_rows;

  for (int bdoc = 0; bdoc < batch.size; ++bdoc) {
    const int T = batch.lengths[bdoc];
    if (T == 0) throw std::invalid_argument("forward_train: empty document in batch");
    std::vector<int32_t> ids(batch.row(bdoc), batch.row(bdoc) + T);
    ValueId embedded = t.embed(p.embedding, ids);
    std::vector<ValueId> x_rows(T);
    for (int pos = 0; pos < T; ++pos) x_rows[pos] = t.row(embedded, pos);

    ValueId conv = -1;
    std::vector<ValueId> rev;
    if (cfg.skip_pathway && cfg.use_follow) {
      if (cfg.use_cnn) conv = conv_features(t, embedded, p);
      if (cfg.use_rnn_r) rev = reverse_encode(t, x_rows, p);
    }

    TrainTrace trace;
    ValueId h = zero_h, c = zero_h;
    for (int pos = 0; pos < T; ++pos) {
      auto [h_new, c_new] = lstm_step(t, x_rows[pos], h, c, p.lstm_w, p.lstm_b, cfg.hidden);
      if (cfg.skip_pathway) {
        ValueId f_fol = follow_features(t, pos, T, conv, rev, p);
        ValueId pi = skip_distribution(t, x_rows[pos], h, f_fol, p);
        ValueId y = t.gumbel_softmax(pi, tau, sample_gumbel(rng, 2));
        ValueId y_keep = t.slice(y, 0, 1);
        ValueId y_skip = t.slice(y, 1, 2);
        ValueId h_mix = t.add(t.scale_by(h_new, y_keep), t.scale_by(h, y_skip));
        ValueId c_mix = t.add(t.scale_by(c_new, y_keep), t.scale_by(c, y_skip));
        r_sum = t.add(r_sum, y_skip);
        trace.pi_skip.push_back(t.val(pi).v[1]);
        trace.y_skip.push_back(t.val(y).v[1]);
        h = h_mix;
        c = c_mix;
      } else {
        h = h_new;
        c = c_new;
      }
    }
    prob_rows.push_back(classify(t, h, p.cls_w));
    out.traces.push_back(std::move(trace));
  }

  out.class_probs = t.stack_rows(prob_rows);
  out.soft_skip_rate = cfg.skip_pathway
                           ? t.scale(r_sum, 1.0 / static_cast<real>(out.total_tokens))
                           : t.constant(Tensor::scalar(0.0));
  return out;
}

// ---- raw inference ----

namespace {

struct CellScratch {
  std::vector<real> xh, z;
};

void lstm_cell(const Tensor& w, const Tensor& b, const real* x, int d, real* h, real* c,
               int hidden, CellScratch& s) {
  s.xh.resize(d + hidden);
  std::memcpy(s.xh.data(), x, sizeof(real) * d);
  std::memcpy(s.xh.data() + d, h, sizeof(real) * hidden);
  s.z.resize(4 * hidden);
  kern::gemm_nn(false, 4 * hidden, 1, d + hidden, w.data(), s.xh.data(), s.z.data());
  for (int i = 0; i < 4 * hidden; ++i) s.z[i] += b.v[i];
  const real* zi = s.z.data();
  const real* zf = zi + hidden;
  const real* zo = zf + hidden;
  const real* zg = zo + hidden;
  for (int j = 0; j < hidden; ++j) {
    const real gi = 1.0 / (1.0 + std::exp(-zi[j]));
    const real gf = 1.0 / (1.0 + std::exp(-zf[j]));
    const real go = 1.0 / (1.0 + std::exp(-zo[j]));
    const real gg = std::tanh(zg[j]);
    c[j] = gf * c[j] + gi * gg;
    h[j] = go * std::tanh(c[j]);
  }
}

}  // namespace

InferResult forward_infer(const LeapParams& params, const LeapConfig& cfg,
                          const Document& doc, const InferOptions& opt) {
  const int T = doc.length();
  if (T == 0) throw std::invalid_argument("forward_infer: empty document");
  const int d = cfg.emb_dim, hid = cfg.hidden;

  // embedding rows
  std::vector<real> x(static_cast<long>(T) * d);
  for (int pos = 0; pos < T; ++pos) {
    const int32_t id = doc.tokens[pos];
    if (id < 0 || id >= cfg.vocab_size)
      throw std::invalid_argument("forward_infer: token id " + std::to_string(id) +
                                  " outside vocabulary of size " +
                                  std::to_string(cfg.vocab_size));
    std::memcpy(x.data() + static_cast<long>(pos) * d,
                params.embedding.data() + static_cast<long>(id) * d, sizeof(real) * d);
  }

  const bool skipping = cfg.skip_pathway;
  const int fdim = cfg.follow_dim();

  // lookahead encoders run over every position regardless of skipping
  std::vector<std::vector<real>> conv;  // per width [T x F]
  if (skipping && cfg.use_follow && cfg.use_cnn) {
    for (size_t wi = 0; wi < params.conv_w.size(); ++wi) {
      const Tensor& cw = params.conv_w[wi];
      const int f = cw.dim[2];
      std::vector<real> m(static_cast<long>(T) * f);
      kern::conv1d_fwd(T, d, cw.dim[0], f, x.data(), cw.data(), m.data());
      const Tensor& cb = params.conv_b[wi];
      for (int pos = 0; pos < T; ++pos)
        for (int q = 0; q < f; ++q) {
          real& v = m[static_cast<long>(pos) * f + q];
          v += cb.v[q];
          if (v < 0) v = 0;
        }
      conv.push_back(std::move(m));
    }
  }

  std::vector<real> rev;  // [T x h']
  if (skipping && cfg.use_follow && cfg.use_rnn_r) {
    const int hp = cfg.rev_hidden;
    rev.assign(static_cast<long>(T) * hp, 0.0);
    std::vector<real> rh(hp, 0.0), rc(hp, 0.0);
    CellScratch rs;
    for (int pos = T - 1; pos >= 0; --pos) {
      lstm_cell(params.rev_w, params.rev_b, x.data() + static_cast<long>(pos) * d, d,
                rh.data(), rc.data(), hp, rs);
      std::memcpy(rev.data() + static_cast<long>(pos) * hp, rh.data(), sizeof(real) * hp);
    }
  }

  InferResult res;
  std::vector<real> h(hid, 0.0), c(hid, 0.0);
  CellScratch cs;
  std::vector<real> mlp_in(cfg.mlp_in_dim());
  std::vector<real> s_hidden(cfg.mlp_hidden), logits2(2);

  for (int pos = 0; pos < T; ++pos) {
    std::array<real, 2> pi{1.0, 0.0};
    if (skipping) {
      real* dst = mlp_in.data();
      const real* xr = x.data() + static_cast<long>(pos) * d;
      if (cfg.use_current)
        std::memcpy(dst, xr, sizeof(real) * d);
      else
        std::memset(dst, 0, sizeof(real) * d);
      dst += d;
      if (cfg.use_preceding)
        std::memcpy(dst, h.data(), sizeof(real) * hid);
      else
        std::memset(dst, 0, sizeof(real) * hid);
      dst += hid;
      if (!cfg.use_follow) {
        std::memset(dst, 0, sizeof(real) * fdim);
      } else if (pos == T - 1) {
        std::memcpy(dst, params.h_end.data(), sizeof(real) * fdim);
      } else {
        if (cfg.use_rnn_r)
          std::memcpy(dst, rev.data() + static_cast<long>(pos + 1) * cfg.rev_hidden,
                      sizeof(real) * cfg.rev_hidden);
        else
          std::memset(dst, 0, sizeof(real) * cfg.rev_hidden);
        real* cdst = dst + cfg.rev_hidden;
        if (cfg.use_cnn) {
          for (const auto& m : conv) {
            const int f = static_cast<int>(m.size()) / T;
            std::memcpy(cdst, m.data() + static_cast<long>(pos + 1) * f, sizeof(real) * f);
            cdst += f;
          }
        } else {
          std::memset(cdst, 0, sizeof(real) * cfg.conv_dim());
        }
      }
      kern::gemm_nn(false, cfg.mlp_hidden, 1, cfg.mlp_in_dim(), params.mlp_w1.data(),
                    mlp_in.data(), s_hidden.data());
      for (int j = 0; j < cfg.mlp_hidden; ++j) {
        s_hidden[j] += params.mlp_b1.v[j];
        if (s_hidden[j] < 0) s_hidden[j] = 0;
      }
      kern::gemm_nn(false, 2, 1, cfg.mlp_hidden, params.mlp_w2.data(), s_hidden.data(),
                    logits2.data());
      logits2[0] += params.mlp_b2.v[0];
      logits2[1] += params.mlp_b2.v[1];
      kern::softmax_rows(1, 2, logits2.data(), pi.data());
    }

    bool skip = false;
    switch (opt.policy) {
      case DecisionPolicy::model: skip = skipping && pi[1] > pi[0]; break;
      case DecisionPolicy::keep_all: skip = false; break;
      case DecisionPolicy::skip_all: skip = true; break;
      case DecisionPolicy::keep_every_nth: skip = (pos % std::max(1, opt.nth)) != 0; break;
    }
    if (!skip) {
      lstm_cell(params.lstm_w, params.lstm_b, x.data() + static_cast<long>(pos) * d, d,
                h.data(), c.data(), hid, cs);
      ++res.updates;
    }
    res.trace.pi.push_back(pi);
    res.trace.skipped.push_back(skip ? 1 : 0);
  }

  res.h_last = h;
  const int k = cfg.num_classes;
  res.class_probs.resize(k);
  std::vector<real> cls_logits(k);
  kern::gemm_nn(false, k, 1, hid, params.cls_w.data(), h.data(), cls_logits.data());
  kern::softmax_rows(1, k, cls_logits.data(), res.class_probs.data());
  res.predicted = static_cast<int>(std::max_element(res.class_probs.begin(),
                                                    res.class_probs.end()) -
                                   res.class_probs.begin());
  return res;
}

}  // namespace leap
