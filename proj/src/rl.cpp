#include "tokrl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tokrl/errors.hpp"
#include "tokrl/parallel.hpp"

namespace tokrl {

RlAlgo parse_rl_algo(const std::string& name) {
  if (name == "reinforce") return RlAlgo::reinforce;
  if (name == "ppo") return RlAlgo::ppo;
  throw ValidationError("unknown rl algorithm '" + name + "'");
}

RlGranularity parse_granularity(const std::string& name) {
  if (name == "sentence") return RlGranularity::sentence;
  if (name == "token") return RlGranularity::token;
  throw ValidationError("unknown granularity '" + name + "'");
}

RewardSource parse_reward_source(const std::string& name) {
  if (name == "oracle-mqm") return RewardSource::oracle_mqm;
  if (name == "bleu") return RewardSource::bleu;
  if (name == "partial-bleu") return RewardSource::partial_bleu;
  throw ValidationError("unknown reward source '" + name + "'");
}

void validate_rl_config(const RlConfig& cfg) {
  require(cfg.lr > 0, "lr must be > 0");
  require(cfg.gamma > 0 && cfg.gamma <= 1, "gamma must lie in (0, 1]");
  require(cfg.gae_lambda >= 0 && cfg.gae_lambda <= 1, "gae_lambda must lie in [0, 1]");
  require(cfg.clip_epsilon > 0 && cfg.clip_epsilon < 1, "clip_epsilon must lie in (0, 1)");
  require(cfg.ppo_epochs >= 1, "ppo_epochs must be >= 1");
  require(cfg.minibatch_size >= 1, "minibatch_size must be >= 1");
  require(cfg.kl_init_coef >= 0, "kl_init_coef must be >= 0");
  require(cfg.kl_target > 0, "kl_target must be > 0");
  require(cfg.max_episodes >= 1, "max_episodes must be >= 1");
  require(cfg.rollout_episodes >= 1, "rollout_episodes must be >= 1");
  require(cfg.value_coef >= 0, "value_coef must be >= 0");
}

RlEnv make_rl_env(const Vocabulary& vocab, const std::vector<ParallelPair>& pairs) {
  require(!pairs.empty(), "empty corpus");
  RlEnv env;
  env.vocab = &vocab;
  env.src_ids.reserve(pairs.size());
  env.refs.reserve(pairs.size());
  for (const auto& p : pairs) {
    env.src_ids.push_back(tokenize(vocab, p.src).piece_ids());
    env.refs.push_back(p.ref);
  }
  return env;
}

double trajectory_reward(const Trajectory& traj) {
  if (traj.rewards.granularity == Granularity::sentence) return traj.rewards.rewards.at(0);
  double s = 0.0;
  for (double r : traj.rewards.rewards) s += r;
  return s;
}

namespace {

// Per-step rewards for GAE and returns; sentence granularity places its
// scalar at the terminal step.
std::vector<double> step_rewards(const Trajectory& traj) {
  std::size_t len = traj.episode.tokens.size();
  if (traj.rewards.granularity == Granularity::token) {
    require(traj.rewards.rewards.size() == len, "token reward length disagrees with episode");
    return traj.rewards.rewards;
  }
  require(traj.rewards.rewards.size() == 1, "sentence reward must be a single scalar");
  std::vector<double> r(len, 0.0);
  r.back() = traj.rewards.rewards[0];
  return r;
}

std::vector<int> decoder_inputs(const std::vector<int>& tokens) {
  std::vector<int> inputs(tokens.size());
  inputs[0] = kBosId;
  std::copy(tokens.begin(), tokens.end() - 1, inputs.begin() + 1);
  return inputs;
}

double grad_l2(const ParamSet& grads) {
  double sq = 0.0;
  for (const auto& [name, tensor] : grads.named())
    for (double g : tensor->v) sq += g * g;
  return std::sqrt(sq);
}

}  // namespace

std::vector<Trajectory> collect_trajectories(const PolicyParams& params, const RlEnv& env,
                                             const RewardSpec& reward, const RlConfig& cfg,
                                             int n, Rng& rng) {
  validate_rl_config(cfg);
  require(n >= 1, "episode count must be >= 1");
  require(env.vocab != nullptr && !env.src_ids.empty(), "sampling environment is empty");
  require(!(cfg.granularity == RlGranularity::sentence &&
            reward.source == RewardSource::partial_bleu),
          "partial-bleu rewards require token granularity");
  require(reward.source != RewardSource::oracle_mqm || reward.annotator != nullptr,
          "oracle-mqm rewards need an annotator");

  std::uint64_t base = rng.u64();
  std::vector<Trajectory> trajs(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    Rng r(derive_seed(base, i));
    auto pidx = static_cast<int>(r.uniform_int(env.src_ids.size()));
    Trajectory t;
    t.pair_index = pidx;
    t.src = env.src_ids[pidx];
    t.episode = sample_episode(params, t.src, r, params.cfg.max_len);
    t.old_log_probs = t.episode.log_probs;

    const auto& toks = t.episode.tokens;
    TokenizedText rendered = render_tokenized(*env.vocab, toks);
    const std::string& ref = env.refs[pidx];

    if (reward.source == RewardSource::oracle_mqm) {
      SpanAnnotation ann = reward.annotator->annotate(rendered.text, ref);
      if (cfg.granularity == RlGranularity::sentence) {
        t.rewards.granularity = Granularity::sentence;
        t.rewards.rewards = {sentence_reward_from_spans(rendered, ann.spans, reward.map)};
      } else {
        TokenRewardVector word_level = map_spans_to_token_rewards(rendered, ann.spans, reward.map);
        // Stopping is an action like any other: emitting EOS while reference
        // content is still missing carries the worst omission marker's
        // severity (zero-width spans mark deletions and touch no word token).
        Severity eos_sev = Severity::correct;
        for (const ErrorSpan& s : ann.spans)
          if (s.start == s.end && static_cast<int>(s.severity) > static_cast<int>(eos_sev))
            eos_sev = s.severity;
        t.rewards.granularity = Granularity::token;
        t.rewards.rewards.resize(toks.size());
        std::size_t k = 0;
        for (std::size_t s = 0; s < toks.size(); ++s) {
          if (toks[s] == kEosId) {
            t.rewards.rewards[s] = severity_weight(reward.map, eos_sev);
          } else if (toks[s] == kPadId || toks[s] == kBosId) {
            // Degenerate control tokens never render; treat as critical.
            t.rewards.rewards[s] = reward.map.w_critical;
          } else {
            t.rewards.rewards[s] = word_level.rewards[k++];
          }
        }
      }
    } else if (reward.source == RewardSource::bleu) {
      double b = sentence_bleu(rendered.text, ref) / 100.0;
      if (cfg.granularity == RlGranularity::sentence) {
        t.rewards.granularity = Granularity::sentence;
        t.rewards.rewards = {b};
      } else {
        t.rewards.granularity = Granularity::token;
        t.rewards.rewards.assign(toks.size(), 0.0);
        t.rewards.rewards.back() = b;
      }
    } else {
      std::vector<double> words = partial_bleu_word_rewards(split_whitespace(rendered.text),
                                                            split_whitespace(ref));
      TokenRewardVector word_level = broadcast_word_rewards(words, rendered);
      t.rewards.granularity = Granularity::token;
      t.rewards.rewards.assign(toks.size(), 0.0);
      std::size_t k = 0;
      for (std::size_t s = 0; s < toks.size(); ++s) {
        if (toks[s] == kEosId || toks[s] == kPadId || toks[s] == kBosId) continue;
        t.rewards.rewards[s] = word_level.rewards[k++] / 100.0;
      }
    }
    trajs[i] = std::move(t);
  });
  return trajs;
}

std::vector<double> compute_gae(const std::vector<double>& rewards,
                                const std::vector<double>& values, double gamma, double lambda) {
  require(rewards.size() == values.size(), "rewards and values must be equal length");
  require(gamma > 0 && gamma <= 1, "gamma must lie in (0, 1]");
  require(lambda >= 0 && lambda <= 1, "lambda must lie in [0, 1]");
  std::vector<double> adv(rewards.size(), 0.0);
  double next_adv = 0.0;
  double next_value = 0.0;  // terminal value is 0
  for (auto t = static_cast<long long>(rewards.size()) - 1; t >= 0; --t) {
    double delta = rewards[t] + gamma * next_value - values[t];
    next_adv = delta + gamma * lambda * next_adv;
    adv[t] = next_adv;
    next_value = values[t];
  }
  return adv;
}

void prepare_ppo(std::vector<Trajectory>& trajectories, const RlConfig& cfg) {
  validate_rl_config(cfg);
  require(!trajectories.empty(), "prepare_ppo: empty batch");
  for (auto& tr : trajectories) {
    std::vector<double> r = step_rewards(tr);
    tr.advantages = compute_gae(r, tr.episode.values, cfg.gamma, cfg.gae_lambda);
    tr.returns.assign(r.size(), 0.0);
    double acc = 0.0;
    for (auto t = static_cast<long long>(r.size()) - 1; t >= 0; --t) {
      acc = r[t] + cfg.gamma * acc;
      tr.returns[t] = acc;
    }
  }
  // Whiten advantages across the whole batch.
  double sum = 0.0;
  long long n = 0;
  for (const auto& tr : trajectories)
    for (double a : tr.advantages) { sum += a; ++n; }
  double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (const auto& tr : trajectories)
    for (double a : tr.advantages) var += (a - mean) * (a - mean);
  double std_dev = std::sqrt(var / static_cast<double>(n));
  for (auto& tr : trajectories)
    for (double& a : tr.advantages) a = (a - mean) / (std_dev + 1e-8);
}

std::vector<double> replay_log_probs(const PolicyParams& params, const std::vector<int>& src,
                                     const std::vector<int>& tokens) {
  require(!tokens.empty(), "cannot replay an empty episode");
  Tape tape;
  TapedEpisode te = taped_forward(tape, params, nullptr, src, decoder_inputs(tokens), tokens);
  std::vector<double> out(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) out[t] = tape.value(te.logp_nodes[t]);
  return out;
}

std::vector<double> measure_ratios(const PolicyParams& params,
                                   const std::vector<Trajectory>& trajectories) {
  std::vector<double> ratios;
  for (const auto& tr : trajectories) {
    std::vector<double> lp = replay_log_probs(params, tr.src, tr.episode.tokens);
    for (std::size_t t = 0; t < lp.size(); ++t)
      ratios.push_back(std::exp(lp[t] - tr.old_log_probs[t]));
  }
  return ratios;
}

double reinforce_loss(const PolicyParams& params, const std::vector<Trajectory>& trajectories,
                      const RlConfig& cfg, ParamSet* grads) {
  validate_rl_config(cfg);
  require(!trajectories.empty(), "reinforce_loss: empty batch");
  long long total = 0;
  // Shape checks stay outside the parallel loop: worker lambdas must not throw.
  for (const auto& tr : trajectories) {
    total += static_cast<long long>(tr.episode.tokens.size());
    if (cfg.granularity == RlGranularity::sentence) {
      require(tr.rewards.granularity == Granularity::sentence && tr.rewards.rewards.size() == 1,
              "sentence reinforce needs a single scalar reward");
    } else {
      require(tr.rewards.granularity == Granularity::token &&
                  tr.rewards.rewards.size() == tr.episode.tokens.size(),
              "token reinforce needs per-step rewards");
    }
  }

  std::vector<double> losses(trajectories.size(), 0.0);
  std::vector<ParamSet> buffers;
  if (grads != nullptr) buffers.assign(trajectories.size(), make_param_set(params.cfg));
  parallel_for(trajectories.size(), [&](std::size_t i) {
    const Trajectory& tr = trajectories[i];
    std::size_t len = tr.episode.tokens.size();
    std::vector<double> w(len, 0.0);
    if (cfg.granularity == RlGranularity::sentence) {
      std::fill(w.begin(), w.end(), tr.rewards.rewards[0]);
    } else {
      if (cfg.token_reward_mode == TokenRewardMode::instantaneous) {
        w = tr.rewards.rewards;
      } else {
        // Reward-to-go with the discount anchored at the episode start:
        // w_t = sum_{l >= t} gamma^l r_l.
        std::vector<double> disc(len);
        double g = 1.0;
        for (std::size_t t = 0; t < len; ++t) {
          disc[t] = g * tr.rewards.rewards[t];
          g *= cfg.gamma;
        }
        double acc = 0.0;
        for (auto t = static_cast<long long>(len) - 1; t >= 0; --t) {
          acc += disc[t];
          w[t] = acc;
        }
      }
    }
    Tape tape;
    ParamSet* sink = grads != nullptr ? &buffers[i] : nullptr;
    TapedEpisode te =
        taped_forward(tape, params, sink, tr.src, decoder_inputs(tr.episode.tokens),
                      tr.episode.tokens);
    std::vector<double> coeffs(len);
    for (std::size_t t = 0; t < len; ++t) coeffs[t] = -w[t] / static_cast<double>(total);
    int loss_node = tape.weighted_sum(te.logp_nodes, coeffs);
    losses[i] = tape.value(loss_node);
    if (sink != nullptr) tape.backward(loss_node);
  });
  double loss = 0.0;
  for (double l : losses) loss += l;
  if (!std::isfinite(loss)) throw NumericError("reinforce loss is not finite");
  if (grads != nullptr) {
    for (const auto& b : buffers) grads->add(b);
    if (!grads->all_finite()) throw NumericError("reinforce gradients are not finite");
  }
  return loss;
}

double ppo_loss(const PolicyParams& params, const std::vector<Trajectory>& trajectories,
                const RlConfig& cfg, double kl_coef, ParamSet* grads, PpoLossParts* parts,
                std::vector<int>* dropped_out) {
  validate_rl_config(cfg);
  require(!trajectories.empty(), "ppo_loss: empty batch");
  for (const auto& tr : trajectories)
    require(tr.advantages.size() == tr.episode.tokens.size() &&
                tr.returns.size() == tr.episode.tokens.size(),
            "ppo_loss requires prepared advantages and returns");

  std::size_t n = trajectories.size();
  std::vector<double> losses(n, 0.0), policy_parts(n, 0.0), value_parts(n, 0.0), kl_parts(n, 0.0);
  std::vector<long long> clip_hits(n, 0), counts(n, 0);
  std::vector<char> dropped(n, 0);
  std::vector<ParamSet> buffers;
  if (grads != nullptr) buffers.assign(n, make_param_set(params.cfg));

  parallel_for(n, [&](std::size_t i) {
    const Trajectory& tr = trajectories[i];
    const auto& toks = tr.episode.tokens;
    Tape tape;
    ParamSet* sink = grads != nullptr ? &buffers[i] : nullptr;
    TapedEpisode te = taped_forward(tape, params, sink, tr.src, decoder_inputs(toks), toks);
    for (std::size_t t = 0; t < toks.size(); ++t) {
      if (std::abs(tape.value(te.logp_nodes[t]) - tr.old_log_probs[t]) > 50.0) {
        dropped[i] = 1;
        return;
      }
    }
    std::vector<int> ids;
    std::vector<double> coeffs;
    ids.reserve(toks.size() * 3);
    coeffs.reserve(toks.size() * 3);
    double kl_const = 0.0;
    for (std::size_t t = 0; t < toks.size(); ++t) {
      double lp = tape.value(te.logp_nodes[t]);
      double old = tr.old_log_probs[t];
      double rho = std::exp(lp - old);
      if (std::abs(rho - 1.0) > cfg.clip_epsilon) ++clip_hits[i];
      int surrogate = tape.ppo_token(te.logp_nodes[t], old, tr.advantages[t], cfg.clip_epsilon);
      ids.push_back(surrogate);
      coeffs.push_back(-1.0);
      int vloss = tape.mse_half(te.value_nodes[t], tr.returns[t]);
      ids.push_back(vloss);
      coeffs.push_back(cfg.value_coef);
      if (kl_coef != 0.0) {
        ids.push_back(te.logp_nodes[t]);
        coeffs.push_back(-kl_coef);
        kl_const += kl_coef * old;
      }
      policy_parts[i] -= tape.value(surrogate);
      value_parts[i] += tape.value(vloss);
      kl_parts[i] += old - lp;
    }
    int loss_node = tape.weighted_sum(std::move(ids), std::move(coeffs));
    losses[i] = tape.value(loss_node) + kl_const;
    counts[i] = static_cast<long long>(toks.size());
    if (sink != nullptr) tape.backward(loss_node);
  });

  long long total = 0;
  int drop_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dropped[i]) {
      ++drop_count;
      if (dropped_out != nullptr) dropped_out->push_back(static_cast<int>(i));
    } else {
      total += counts[i];
    }
  }
  if (parts != nullptr) {
    *parts = {};
    parts->dropped = drop_count;
    parts->tokens = total;
  }
  if (total == 0) return 0.0;

  double loss = 0.0, psum = 0.0, vsum = 0.0, ksum = 0.0;
  long long hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dropped[i]) continue;
    loss += losses[i];
    psum += policy_parts[i];
    vsum += value_parts[i];
    ksum += kl_parts[i];
    hits += clip_hits[i];
  }
  loss /= static_cast<double>(total);
  if (!std::isfinite(loss)) throw NumericError("ppo loss is not finite");
  if (grads != nullptr) {
    for (std::size_t i = 0; i < n; ++i)
      if (!dropped[i]) grads->add_scaled(buffers[i], 1.0 / static_cast<double>(total));
    if (!grads->all_finite()) throw NumericError("ppo gradients are not finite");
  }
  if (parts != nullptr) {
    parts->policy_loss = psum / static_cast<double>(total);
    parts->value_loss = vsum / static_cast<double>(total);
    parts->kl = ksum / static_cast<double>(total);
    parts->clip_fraction = static_cast<double>(hits) / static_cast<double>(total);
  }
  return loss;
}

ReinforceStats reinforce_update(PolicyParams& params, const std::vector<Trajectory>& trajectories,
                                const RlConfig& cfg, Adam& adam) {
  ParamSet grads = make_param_set(params.cfg);
  ReinforceStats st;
  st.loss = reinforce_loss(params, trajectories, cfg, &grads);
  st.grad_norm = grad_l2(grads);
  double mr = 0.0;
  for (const auto& tr : trajectories) mr += trajectory_reward(tr);
  st.mean_reward = mr / static_cast<double>(trajectories.size());
  adam.update(params.t, grads, cfg.lr);
  return st;
}

PpoStats ppo_update(PolicyParams& params, std::vector<Trajectory>& trajectories,
                    const RlConfig& cfg, Adam& adam, KlController* controller, Rng& rng) {
  validate_rl_config(cfg);
  require(!trajectories.empty(), "ppo_update: empty batch");
  double beta = cfg.kl_mode == KlMode::off
                    ? 0.0
                    : (controller != nullptr ? controller->coef : cfg.kl_init_coef);

  std::vector<char> dead(trajectories.size(), 0);
  PpoStats stats;
  double policy_weighted = 0.0, value_weighted = 0.0, kl_weighted = 0.0, clip_weighted = 0.0;
  long long all_tokens = 0, last_epoch_tokens = 0;

  std::vector<std::size_t> order(trajectories.size());
  const auto mb = static_cast<std::size_t>(cfg.minibatch_size);
  for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    bool last = epoch == cfg.ppo_epochs - 1;
    order.clear();
    for (std::size_t i = 0; i < trajectories.size(); ++i)
      if (!dead[i]) order.push_back(i);
    if (order.empty()) break;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      std::size_t stop = std::min(order.size(), start + mb);
      std::vector<Trajectory> chunk;
      chunk.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) chunk.push_back(trajectories[order[k]]);
      ParamSet grads = make_param_set(params.cfg);
      PpoLossParts parts;
      std::vector<int> dropped_local;
      ppo_loss(params, chunk, cfg, beta, &grads, &parts, &dropped_local);
      for (int rel : dropped_local) {
        std::size_t abs_index = order[start + static_cast<std::size_t>(rel)];
        if (!dead[abs_index]) {
          dead[abs_index] = 1;
          ++stats.dropped;
        }
      }
      if (parts.tokens == 0) continue;
      adam.update(params.t, grads, cfg.lr);
      auto w = static_cast<double>(parts.tokens);
      policy_weighted += parts.policy_loss * w;
      value_weighted += parts.value_loss * w;
      clip_weighted += parts.clip_fraction * w;
      all_tokens += parts.tokens;
      if (last) {
        kl_weighted += parts.kl * w;
        last_epoch_tokens += parts.tokens;
      }
    }
  }
  if (all_tokens > 0) {
    stats.policy_loss = policy_weighted / static_cast<double>(all_tokens);
    stats.value_loss = value_weighted / static_cast<double>(all_tokens);
    stats.clip_fraction = clip_weighted / static_cast<double>(all_tokens);
  }
  if (last_epoch_tokens > 0) stats.kl = kl_weighted / static_cast<double>(last_epoch_tokens);
  if (controller != nullptr && cfg.kl_mode == KlMode::adaptive) {
    if (stats.kl > cfg.kl_target * 1.5) controller->coef *= 2.0;
    else if (stats.kl < cfg.kl_target / 1.5) controller->coef *= 0.5;
  }
  return stats;
}

void write_train_log(const std::vector<RlLogRow>& rows, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open train log for writing: " + path);
  out << "step,episodes,mean_reward,policy_loss,value_loss,kl,clip_fraction\n";
  out.precision(17);
  for (const auto& r : rows)
    out << r.step << ',' << r.episodes << ',' << r.mean_reward << ',' << r.policy_loss << ','
        << r.value_loss << ',' << r.kl << ',' << r.clip_fraction << '\n';
  require(out.good(), "failed writing train log: " + path);
}

std::vector<RlLogRow> read_train_log(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open train log: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "empty train log: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "step,episodes,mean_reward,policy_loss,value_loss,kl,clip_fraction",
          "unexpected train log header: " + path);
  std::vector<RlLogRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    require(fields.size() == 7,
            path + ":" + std::to_string(lineno) + ": expected 7 comma-separated fields");
    try {
      RlLogRow r;
      r.step = std::stoi(fields[0]);
      r.episodes = std::stoll(fields[1]);
      r.mean_reward = std::stod(fields[2]);
      r.policy_loss = std::stod(fields[3]);
      r.value_loss = std::stod(fields[4]);
      r.kl = std::stod(fields[5]);
      r.clip_fraction = std::stod(fields[6]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": malformed train log row");
    }
  }
  return rows;
}

std::vector<RlLogRow> train_rl(PolicyParams& params, const RlEnv& env, const RewardSpec& reward,
                               const RlConfig& cfg) {
  validate_rl_config(cfg);
  require(env.vocab != nullptr && !env.src_ids.empty(), "empty corpus");
  AdamConfig acfg;
  acfg.lr = cfg.lr;
  Adam adam(params.cfg, acfg);
  KlController controller{cfg.kl_init_coef};
  Rng master(cfg.seed);
  std::vector<RlLogRow> rows;
  long long done = 0;
  int step = 0;
  while (done < cfg.max_episodes) {
    int n = static_cast<int>(
        std::min<long long>(cfg.rollout_episodes, cfg.max_episodes - done));
    Rng collect_rng(master.u64());
    Rng update_rng(master.u64());
    auto trajs = collect_trajectories(params, env, reward, cfg, n, collect_rng);
    done += n;
    ++step;
    RlLogRow row;
    row.step = step;
    row.episodes = done;
    double mr = 0.0;
    for (const auto& tr : trajs) mr += trajectory_reward(tr);
    row.mean_reward = mr / static_cast<double>(trajs.size());
    if (cfg.algo == RlAlgo::reinforce) {
      ReinforceStats st = reinforce_update(params, trajs, cfg, adam);
      row.policy_loss = st.loss;
    } else {
      prepare_ppo(trajs, cfg);
      PpoStats st = ppo_update(params, trajs, cfg, adam,
                               cfg.kl_mode == KlMode::adaptive ? &controller : nullptr,
                               update_rng);
      row.policy_loss = st.policy_loss;
      row.value_loss = st.value_loss;
      row.kl = st.kl;
      row.clip_fraction = st.clip_fraction;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace tokrl
