#include "tokrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "tokrl/errors.hpp"
#include "tokrl/parallel.hpp"

namespace tokrl {

namespace {

void validate_config(const PolicyConfig& cfg) {
  require(cfg.embed_dim >= 1 && cfg.hidden_dim >= 1, "model dims must be >= 1");
  require(cfg.max_len >= 2, "max_len must be >= 2");
  require(cfg.vocab_size > kNumReserved, "vocab_size must exceed the reserved ids");
}

std::vector<double> softmax(const std::vector<double>& z) {
  double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double zsum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - zmax);
    zsum += p[i];
  }
  for (double& x : p) x /= zsum;
  return p;
}

double log_softmax_at(const std::vector<double>& z, int k) {
  double zmax = *std::max_element(z.begin(), z.end());
  double zsum = 0.0;
  for (double x : z) zsum += std::exp(x - zmax);
  return z[k] - zmax - std::log(zsum);
}

int argmax(const std::vector<double>& z) {
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

// Plain (untaped) forward state for sampling, decoding and evaluation.
struct Forward {
  const PolicyConfig& cfg;
  const ParamSet& t;
  std::vector<std::vector<double>> enc;
  std::vector<std::vector<double>> keys;
  std::vector<double> s;
  std::vector<double> logits;
  double value = 0.0;

  explicit Forward(const PolicyParams& p) : cfg(p.cfg), t(p.t) {}

  void encode(const std::vector<int>& src) {
    require(!src.empty(), "source token sequence is empty");
    const int h = cfg.hidden_dim;
    enc.assign(src.size(), {});
    keys.assign(src.size(), {});
    std::vector<double> zero(h, 0.0);
    const double* prev = zero.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
      require(src[i] >= 0 && src[i] < cfg.vocab_size,
              "source id out of range: " + std::to_string(src[i]));
      auto& hi = enc[i];
      hi.assign(t.enc_b.v.begin(), t.enc_b.v.end());
      matvec_acc(t.enc_w, t.src_embed.row(src[i]), hi.data());
      matvec_acc(t.enc_u, prev, hi.data());
      for (double& x : hi) x = std::tanh(x);
      auto& ki = keys[i];
      ki.assign(t.att_b.v.begin(), t.att_b.v.end());
      matvec_acc(t.att_uk, hi.data(), ki.data());
      prev = hi.data();
    }
    s.assign(t.init_b.v.begin(), t.init_b.v.end());
    matvec_acc(t.init_w, enc.back().data(), s.data());
    for (double& x : s) x = std::tanh(x);
  }

  // Consumes one decoder input id; refreshes s, logits and value.
  void step(int input_id) {
    require(input_id >= 0 && input_id < cfg.vocab_size,
            "decoder input id out of range: " + std::to_string(input_id));
    const int h = cfg.hidden_dim;
    std::vector<double> ns(t.dec_b.v.begin(), t.dec_b.v.end());
    matvec_acc(t.dec_w, t.tgt_embed.row(input_id), ns.data());
    matvec_acc(t.dec_u, s.data(), ns.data());
    for (double& x : ns) x = std::tanh(x);
    s.swap(ns);

    std::vector<double> wq_q(h, 0.0);
    matvec_acc(t.att_wq, s.data(), wq_q.data());
    std::vector<double> scores(enc.size());
    for (std::size_t i = 0; i < enc.size(); ++i) {
      double z = 0.0;
      for (int j = 0; j < h; ++j) z += t.att_v.v[j] * std::tanh(wq_q[j] + keys[i][j]);
      scores[i] = z;
    }
    double zmax = *std::max_element(scores.begin(), scores.end());
    double zsum = 0.0;
    for (double& z : scores) {
      z = std::exp(z - zmax);
      zsum += z;
    }
    std::vector<double> context(h, 0.0);
    for (std::size_t i = 0; i < enc.size(); ++i) {
      double a = scores[i] / zsum;
      for (int j = 0; j < h; ++j) context[j] += a * enc[i][j];
    }
    logits.assign(t.out_b.v.begin(), t.out_b.v.end());
    for (int r = 0; r < t.out_w.rows; ++r) {
      const double* wr = t.out_w.row(r);
      double acc = logits[r];
      for (int j = 0; j < h; ++j) acc += wr[j] * s[j];
      for (int j = 0; j < h; ++j) acc += wr[h + j] * context[j];
      logits[r] = acc;
    }
    value = t.value_b.v[0];
    for (int j = 0; j < h; ++j) value += t.value_w.v[j] * s[j];
  }
};

}  // namespace

std::vector<std::pair<const char*, Tensor*>> ParamSet::named() {
  return {{"src_embed", &src_embed}, {"tgt_embed", &tgt_embed}, {"enc_w", &enc_w},
          {"enc_u", &enc_u},         {"enc_b", &enc_b},         {"dec_w", &dec_w},
          {"dec_u", &dec_u},         {"dec_b", &dec_b},         {"init_w", &init_w},
          {"init_b", &init_b},       {"att_wq", &att_wq},       {"att_uk", &att_uk},
          {"att_b", &att_b},         {"att_v", &att_v},         {"out_w", &out_w},
          {"out_b", &out_b},         {"value_w", &value_w},     {"value_b", &value_b}};
}

std::vector<std::pair<const char*, const Tensor*>> ParamSet::named() const {
  auto mutable_named = const_cast<ParamSet*>(this)->named();
  std::vector<std::pair<const char*, const Tensor*>> out;
  out.reserve(mutable_named.size());
  for (auto& [name, tensor] : mutable_named) out.emplace_back(name, tensor);
  return out;
}

void ParamSet::zero() {
  for (auto& [name, tensor] : named()) tensor->zero();
}

void ParamSet::add(const ParamSet& other) { add_scaled(other, 1.0); }

void ParamSet::add_scaled(const ParamSet& other, double scale) {
  auto mine = named();
  auto theirs = other.named();
  for (std::size_t i = 0; i < mine.size(); ++i) {
    require(mine[i].second->size() == theirs[i].second->size(), "param set shapes disagree");
    double* a = mine[i].second->v.data();
    const double* b = theirs[i].second->v.data();
    for (std::size_t k = 0; k < mine[i].second->size(); ++k) a[k] += scale * b[k];
  }
}

bool ParamSet::all_finite() const {
  for (auto& [name, tensor] : named())
    for (double x : tensor->v)
      if (!std::isfinite(x)) return false;
  return true;
}

ParamSet make_param_set(const PolicyConfig& cfg) {
  validate_config(cfg);
  const int v = cfg.vocab_size, e = cfg.embed_dim, h = cfg.hidden_dim;
  ParamSet t;
  t.src_embed = Tensor(v, e);
  t.tgt_embed = Tensor(v, e);
  t.enc_w = Tensor(h, e);
  t.enc_u = Tensor(h, h);
  t.enc_b = Tensor(h, 1);
  t.dec_w = Tensor(h, e);
  t.dec_u = Tensor(h, h);
  t.dec_b = Tensor(h, 1);
  t.init_w = Tensor(h, h);
  t.init_b = Tensor(h, 1);
  t.att_wq = Tensor(h, h);
  t.att_uk = Tensor(h, h);
  t.att_b = Tensor(h, 1);
  t.att_v = Tensor(h, 1);
  t.out_w = Tensor(v, 2 * h);
  t.out_b = Tensor(v, 1);
  t.value_w = Tensor(h, 1);
  t.value_b = Tensor(1, 1);
  return t;
}

std::size_t param_count(const PolicyConfig& cfg) {
  ParamSet t = make_param_set(cfg);
  std::size_t n = 0;
  for (auto& [name, tensor] : t.named()) n += tensor->size();
  return n;
}

PolicyParams init_policy(const PolicyConfig& cfg) {
  PolicyParams p{cfg, make_param_set(cfg)};
  Rng rng(cfg.seed);
  for (auto& [name, tensor] : p.t.named()) {
    int fan_in = tensor->cols > 1 ? tensor->cols : tensor->rows;
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : tensor->v) x = rng.uniform(-bound, bound);
  }
  return p;
}

void save_policy(const PolicyParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open checkpoint for writing: " + path);
  const char magic[8] = {'T', 'K', 'R', 'L', 'P', 'O', 'L', '1'};
  out.write(magic, 8);
  auto w32 = [&](std::int32_t x) { out.write(reinterpret_cast<const char*>(&x), 4); };
  w32(params.cfg.embed_dim);
  w32(params.cfg.hidden_dim);
  w32(params.cfg.vocab_size);
  w32(params.cfg.max_len);
  std::uint64_t seed = params.cfg.seed;
  out.write(reinterpret_cast<const char*>(&seed), 8);
  auto named = params.t.named();
  w32(static_cast<std::int32_t>(named.size()));
  for (auto& [name, tensor] : named) {
    auto len = static_cast<std::int32_t>(std::strlen(name));
    w32(len);
    out.write(name, len);
    w32(tensor->rows);
    w32(tensor->cols);
    out.write(reinterpret_cast<const char*>(tensor->v.data()),
              static_cast<std::streamsize>(tensor->v.size() * sizeof(double)));
  }
  require(out.good(), "failed writing checkpoint: " + path);
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, "TKRLPOL1", 8) == 0,
          "not a policy checkpoint: " + path);
  auto r32 = [&]() {
    std::int32_t x = 0;
    in.read(reinterpret_cast<char*>(&x), 4);
    return x;
  };
  PolicyConfig cfg;
  cfg.embed_dim = r32();
  cfg.hidden_dim = r32();
  cfg.vocab_size = r32();
  cfg.max_len = r32();
  in.read(reinterpret_cast<char*>(&cfg.seed), 8);
  require(in.good(), "truncated checkpoint header: " + path);
  PolicyParams p{cfg, make_param_set(cfg)};
  auto named = p.t.named();
  int count = r32();
  require(count == static_cast<int>(named.size()), "checkpoint tensor count mismatch: " + path);
  for (auto& [name, tensor] : named) {
    int len = r32();
    std::string stored(static_cast<std::size_t>(std::max(0, len)), '\0');
    in.read(stored.data(), len);
    require(in.good() && stored == name, "checkpoint tensor order mismatch: " + path);
    int rows = r32(), cols = r32();
    require(rows == tensor->rows && cols == tensor->cols,
            "checkpoint tensor shape mismatch for " + stored + ": " + path);
    in.read(reinterpret_cast<char*>(tensor->v.data()),
            static_cast<std::streamsize>(tensor->v.size() * sizeof(double)));
    require(in.good(), "truncated checkpoint tensor " + stored + ": " + path);
  }
  return p;
}

std::vector<double> step_distribution(const PolicyParams& params, const std::vector<int>& src,
                                      const std::vector<int>& prefix) {
  validate_config(params.cfg);
  require(static_cast<int>(prefix.size()) < params.cfg.max_len,
          "prefix length must stay below max_len");
  Forward f(params);
  f.encode(src);
  f.step(kBosId);
  for (int id : prefix) f.step(id);
  return softmax(f.logits);
}

EpisodeOutput sample_episode(const PolicyParams& params, const std::vector<int>& src, Rng& rng,
                             int max_len) {
  validate_config(params.cfg);
  require(max_len >= 1, "max_len must be >= 1");
  Forward f(params);
  f.encode(src);
  EpisodeOutput ep;
  int input = kBosId;
  for (int t = 0; t < max_len; ++t) {
    f.step(input);
    std::vector<double> p = softmax(f.logits);
    double u = rng.uniform();
    int picked = static_cast<int>(p.size()) - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) {
        picked = static_cast<int>(i);
        break;
      }
    }
    ep.tokens.push_back(picked);
    ep.log_probs.push_back(log_softmax_at(f.logits, picked));
    ep.values.push_back(f.value);
    if (picked == kEosId) {
      ep.terminated_by_eos = true;
      break;
    }
    input = picked;
  }
  return ep;
}

std::vector<int> greedy_decode(const PolicyParams& params, const std::vector<int>& src,
                               int max_len) {
  validate_config(params.cfg);
  require(max_len >= 1, "max_len must be >= 1");
  Forward f(params);
  f.encode(src);
  std::vector<int> out;
  int input = kBosId;
  for (int t = 0; t < max_len; ++t) {
    f.step(input);
    int picked = argmax(f.logits);
    out.push_back(picked);
    if (picked == kEosId) break;
    input = picked;
  }
  return out;
}

TapedEpisode taped_forward(Tape& tape, const PolicyParams& params, ParamSet* grads,
                           const std::vector<int>& src, const std::vector<int>& inputs,
                           const std::vector<int>& targets) {
  validate_config(params.cfg);
  require(!src.empty(), "source token sequence is empty");
  require(inputs.size() == targets.size() && !inputs.empty(),
          "decoder inputs and targets must be equal-length and non-empty");
  const ParamSet& t = params.t;
  auto g = [&](Tensor ParamSet::*field) -> Tensor* {
    return grads == nullptr ? nullptr : &(grads->*field);
  };
  const int h = params.cfg.hidden_dim;
  const int n = static_cast<int>(src.size());

  // Embeds first so encoder-state and key node ids form consecutive blocks.
  std::vector<int> emb(src.size());
  for (std::size_t i = 0; i < src.size(); ++i)
    emb[i] = tape.embed(t.src_embed, g(&ParamSet::src_embed), src[i]);
  int prev = tape.constant(std::vector<double>(h, 0.0));
  int first_enc = -1;
  for (std::size_t i = 0; i < src.size(); ++i) {
    prev = tape.rnn_cell(t.enc_w, g(&ParamSet::enc_w), emb[i], &t.enc_u, g(&ParamSet::enc_u),
                         prev, t.enc_b, g(&ParamSet::enc_b));
    if (i == 0) first_enc = prev;
  }
  int first_key = -1;
  for (int i = 0; i < n; ++i) {
    int k = tape.affine(t.att_uk, g(&ParamSet::att_uk), first_enc + i, t.att_b,
                        g(&ParamSet::att_b));
    if (i == 0) first_key = k;
  }
  int s = tape.rnn_cell(t.init_w, g(&ParamSet::init_w), first_enc + n - 1, nullptr, nullptr, -1,
                        t.init_b, g(&ParamSet::init_b));

  TapedEpisode out;
  out.logp_nodes.reserve(inputs.size());
  out.value_nodes.reserve(inputs.size());
  for (std::size_t step = 0; step < inputs.size(); ++step) {
    int e = tape.embed(t.tgt_embed, g(&ParamSet::tgt_embed), inputs[step]);
    s = tape.rnn_cell(t.dec_w, g(&ParamSet::dec_w), e, &t.dec_u, g(&ParamSet::dec_u), s, t.dec_b,
                      g(&ParamSet::dec_b));
    int ctx = tape.attention(t.att_wq, g(&ParamSet::att_wq), t.att_v, g(&ParamSet::att_v), s,
                             first_key, first_enc, n);
    int cat = tape.concat2(s, ctx);
    int logits = tape.affine(t.out_w, g(&ParamSet::out_w), cat, t.out_b, g(&ParamSet::out_b));
    out.logp_nodes.push_back(tape.log_softmax_pick(logits, targets[step]));
    out.value_nodes.push_back(
        tape.dot_scalar(t.value_w, g(&ParamSet::value_w), s, t.value_b, g(&ParamSet::value_b)));
  }
  return out;
}

Adam::Adam(const PolicyConfig& cfg, const AdamConfig& acfg)
    : cfg_(acfg), m_(make_param_set(cfg)), v_(make_param_set(cfg)) {
  require(acfg.lr > 0 && acfg.beta1 >= 0 && acfg.beta1 < 1 && acfg.beta2 >= 0 && acfg.beta2 < 1 &&
              acfg.eps > 0,
          "invalid optimizer configuration");
}

void Adam::update(ParamSet& params, const ParamSet& grads) { update(params, grads, cfg_.lr); }

void Adam::update(ParamSet& params, const ParamSet& grads, double lr) {
  ++step_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  auto ps = params.named();
  auto gs = grads.named();
  auto ms = m_.named();
  auto vs = v_.named();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    Tensor& p = *ps[k].second;
    const Tensor& gt = *gs[k].second;
    Tensor& m = *ms[k].second;
    Tensor& vv = *vs[k].second;
    require(p.size() == gt.size(), "gradient shape disagrees with parameters");
    for (std::size_t i = 0; i < p.size(); ++i) {
      double gi = gt.v[i];
      m.v[i] = cfg_.beta1 * m.v[i] + (1.0 - cfg_.beta1) * gi;
      vv.v[i] = cfg_.beta2 * vv.v[i] + (1.0 - cfg_.beta2) * gi * gi;
      double mhat = m.v[i] / bc1;
      double vhat = vv.v[i] / bc2;
      p.v[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

EncodedPair encode_pair(const Vocabulary& vocab, const std::string& src, const std::string& ref) {
  EncodedPair out;
  out.src = tokenize(vocab, src).piece_ids();
  out.tgt = tokenize(vocab, ref).piece_ids();
  out.tgt.push_back(kEosId);
  return out;
}

double mle_loss(const PolicyParams& params, const std::vector<EncodedPair>& batch,
                ParamSet* grads) {
  validate_config(params.cfg);
  require(!batch.empty(), "mle_loss: empty batch");
  long long total_tokens = 0;
  for (const auto& p : batch) total_tokens += static_cast<long long>(p.tgt.size());
  require(total_tokens > 0, "mle_loss: batch has no target tokens");

  std::vector<double> losses(batch.size(), 0.0);
  std::vector<ParamSet> buffers;
  if (grads != nullptr) buffers.assign(batch.size(), make_param_set(params.cfg));
  parallel_for(batch.size(), [&](std::size_t i) {
    const auto& pair = batch[i];
    std::vector<int> inputs(pair.tgt.size());
    inputs[0] = kBosId;
    std::copy(pair.tgt.begin(), pair.tgt.end() - 1, inputs.begin() + 1);
    Tape tape;
    ParamSet* sink = grads != nullptr ? &buffers[i] : nullptr;
    TapedEpisode ep = taped_forward(tape, params, sink, pair.src, inputs, pair.tgt);
    std::vector<double> coeffs(ep.logp_nodes.size(), -1.0 / static_cast<double>(total_tokens));
    int loss_node = tape.weighted_sum(ep.logp_nodes, coeffs);
    losses[i] = tape.value(loss_node);
    if (sink != nullptr) tape.backward(loss_node);
  });
  double loss = 0.0;
  for (double l : losses) loss += l;
  if (!std::isfinite(loss)) throw NumericError("mle loss is not finite");
  if (grads != nullptr) {
    for (const auto& b : buffers) grads->add(b);
    if (!grads->all_finite()) throw NumericError("mle gradients are not finite");
  }
  return loss;
}

MleTrainer::MleTrainer(PolicyParams& params, const MleConfig& cfg)
    : params_(params), cfg_(cfg), adam_(params.cfg, cfg.adam), lr_(cfg.adam.lr) {
  require(cfg.batch_size >= 1, "batch_size must be >= 1");
  require(cfg.lr_decay > 0 && cfg.lr_decay <= 1, "lr_decay must lie in (0, 1]");
  require(cfg.max_epochs >= 1, "max_epochs must be >= 1");
  require(cfg.patience >= 0, "patience must be >= 0");
}

double MleTrainer::step(const std::vector<EncodedPair>& batch) {
  ParamSet grads = make_param_set(params_.cfg);
  double loss = mle_loss(params_, batch, &grads);
  adam_.update(params_.t, grads, lr_);
  return loss;
}

std::vector<double> MleTrainer::train(const std::vector<EncodedPair>& train_set,
                                      const std::vector<EncodedPair>& dev_set) {
  require(!train_set.empty() && !dev_set.empty(), "mle training needs train and dev pairs");
  std::vector<double> dev_losses;
  ParamSet best = params_.t;
  double best_dev = std::numeric_limits<double>::infinity();
  int bad = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(cfg_.batch_size);
  for (int epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
    Rng rng(derive_seed(cfg_.seed, ++epoch_));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      std::vector<EncodedPair> batch;
      std::size_t stop = std::min(order.size(), start + batch_size);
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) batch.push_back(train_set[order[k]]);
      step(batch);
    }
    double dev = mle_loss(params_, dev_set, nullptr);
    dev_losses.push_back(dev);
    if (dev < best_dev - 1e-12) {
      best_dev = dev;
      best = params_.t;
      bad = 0;
    } else if (++bad > cfg_.patience) {
      break;
    }
    lr_ *= cfg_.lr_decay;
  }
  params_.t = best;
  return dev_losses;
}

}  // namespace tokrl
