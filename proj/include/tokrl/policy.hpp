#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tokrl/rng.hpp"
#include "tokrl/tape.hpp"
#include "tokrl/tensor.hpp"
#include "tokrl/textcore.hpp"

namespace tokrl {

struct PolicyConfig {
  int embed_dim = 64;
  int hidden_dim = 128;
  int vocab_size = 0;
  int max_len = 128;
  std::uint64_t seed = 0;
};

// Every trainable tensor, named; the same shape set serves as parameter,
// gradient, and optimizer-moment storage.
struct ParamSet {
  Tensor src_embed, tgt_embed;          // V x E
  Tensor enc_w, enc_u, enc_b;           // H x E, H x H, H x 1
  Tensor dec_w, dec_u, dec_b;
  Tensor init_w, init_b;                // decoder start state from the last encoder state
  Tensor att_wq, att_uk, att_b, att_v;  // additive attention
  Tensor out_w, out_b;                  // V x 2H (on [state; context]), V x 1
  Tensor value_w, value_b;              // H x 1, 1 x 1; feeds only the value estimate

  std::vector<std::pair<const char*, Tensor*>> named();
  std::vector<std::pair<const char*, const Tensor*>> named() const;
  void zero();
  void add(const ParamSet& other);
  void add_scaled(const ParamSet& other, double scale);
  bool all_finite() const;
};

ParamSet make_param_set(const PolicyConfig& cfg);
std::size_t param_count(const PolicyConfig& cfg);

struct PolicyParams {
  PolicyConfig cfg;
  ParamSet t;
};

// Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], fan_in = cols
// for matrices and rows for column vectors.
PolicyParams init_policy(const PolicyConfig& cfg);

// Binary checkpoint: config header plus named tensors; bit-stable round trip.
void save_policy(const PolicyParams& params, const std::string& path);
PolicyParams load_policy(const std::string& path);

struct EpisodeOutput {
  std::vector<int> tokens;        // sampled ids, EOS included when emitted
  std::vector<double> log_probs;  // log p(token_t | prefix, src) at sampling time
  std::vector<double> values;     // value estimate of the state token_t was drawn from
  bool terminated_by_eos = false;
};

std::vector<double> step_distribution(const PolicyParams& params, const std::vector<int>& src,
                                      const std::vector<int>& prefix);
EpisodeOutput sample_episode(const PolicyParams& params, const std::vector<int>& src, Rng& rng,
                             int max_len);
std::vector<int> greedy_decode(const PolicyParams& params, const std::vector<int>& src,
                               int max_len);

// Teacher-forced pass on a tape; inputs[t] conditions step t, targets[t] is
// scored.  Objectives combine the returned scalar node ids on the same tape.
// grads may be null to build a value-only tape.
struct TapedEpisode {
  std::vector<int> logp_nodes;
  std::vector<int> value_nodes;
};
TapedEpisode taped_forward(Tape& tape, const PolicyParams& params, ParamSet* grads,
                           const std::vector<int>& src, const std::vector<int>& inputs,
                           const std::vector<int>& targets);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const PolicyConfig& cfg, const AdamConfig& acfg);
  void update(ParamSet& params, const ParamSet& grads);
  void update(ParamSet& params, const ParamSet& grads, double lr);

 private:
  AdamConfig cfg_;
  ParamSet m_;
  ParamSet v_;
  long long step_ = 0;
};

struct EncodedPair {
  std::vector<int> src;  // source piece ids
  std::vector<int> tgt;  // target piece ids with EOS appended
};
EncodedPair encode_pair(const Vocabulary& vocab, const std::string& src, const std::string& ref);

// Mean teacher-forced negative log-likelihood per token over the batch;
// accumulates into grads when non-null.
double mle_loss(const PolicyParams& params, const std::vector<EncodedPair>& batch,
                ParamSet* grads);

struct MleConfig {
  AdamConfig adam;
  double lr_decay = 1.0;  // multiplied into the rate after each epoch
  int batch_size = 16;
  int max_epochs = 50;
  int patience = 5;  // epochs without dev improvement before stopping
  std::uint64_t seed = 1;
};

class MleTrainer {
 public:
  MleTrainer(PolicyParams& params, const MleConfig& cfg);
  // One optimizer update; returns the pre-update batch loss.
  double step(const std::vector<EncodedPair>& batch);
  // Shuffled epochs with decay and early stopping; restores the best
  // parameters and returns per-epoch dev losses.
  std::vector<double> train(const std::vector<EncodedPair>& train_set,
                            const std::vector<EncodedPair>& dev_set);

 private:
  PolicyParams& params_;
  MleConfig cfg_;
  Adam adam_;
  double lr_;
  std::uint64_t epoch_ = 0;
};

}  // namespace tokrl
