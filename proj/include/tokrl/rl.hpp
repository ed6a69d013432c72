#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tokrl/annotator.hpp"
#include "tokrl/corpus.hpp"
#include "tokrl/policy.hpp"
#include "tokrl/reward.hpp"
#include "tokrl/rng.hpp"

namespace tokrl {

enum class RlAlgo { reinforce, ppo };
enum class RlGranularity { sentence, token };
enum class RewardSource { oracle_mqm, bleu, partial_bleu };
enum class KlMode { off, adaptive };
enum class TokenRewardMode { reward_to_go, instantaneous };

RlAlgo parse_rl_algo(const std::string& name);
RlGranularity parse_granularity(const std::string& name);
RewardSource parse_reward_source(const std::string& name);

struct RlConfig {
  RlAlgo algo = RlAlgo::ppo;
  RlGranularity granularity = RlGranularity::token;
  double lr = 1e-4;  // paper-scale models use 1.41e-6; raised for the tiny policy
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  int ppo_epochs = 4;
  int minibatch_size = 16;
  KlMode kl_mode = KlMode::off;
  double kl_init_coef = 0.2;
  double kl_target = 6.0;
  int max_episodes = 10000;      // total episodes collected over the run
  int rollout_episodes = 32;     // episodes per collect-update iteration
  double value_coef = 0.5;
  TokenRewardMode token_reward_mode = TokenRewardMode::reward_to_go;
  std::uint64_t seed = 0;
};

void validate_rl_config(const RlConfig& cfg);

// Reward assignment for collected episodes.  The annotator is required for
// oracle_mqm; the severity map is ignored by the BLEU sources.
struct RewardSpec {
  RewardSource source = RewardSource::oracle_mqm;
  SeverityMap map;
  const Annotator* annotator = nullptr;
};

// Sampling environment: per-pair source ids and reference strings.
struct RlEnv {
  const Vocabulary* vocab = nullptr;
  std::vector<std::vector<int>> src_ids;
  std::vector<std::string> refs;
};
RlEnv make_rl_env(const Vocabulary& vocab, const std::vector<ParallelPair>& pairs);

struct Trajectory {
  std::vector<int> src;
  EpisodeOutput episode;
  TokenRewardVector rewards;          // per step (token) or length 1 (sentence)
  std::vector<double> advantages;     // filled by prepare_ppo
  std::vector<double> returns;        // empirical discounted returns (value targets)
  std::vector<double> old_log_probs;  // snapshot at collection time
  int pair_index = 0;
};

// Episode reward as one scalar: the sentence reward, or the token-reward sum.
double trajectory_reward(const Trajectory& traj);

std::vector<Trajectory> collect_trajectories(const PolicyParams& params, const RlEnv& env,
                                             const RewardSpec& reward, const RlConfig& cfg,
                                             int n, Rng& rng);

// delta_t = r_t + gamma V_{t+1} - V_t with terminal V = 0;
// A_t = delta_t + gamma lambda A_{t+1} by backward recursion.
std::vector<double> compute_gae(const std::vector<double>& rewards,
                                const std::vector<double>& values, double gamma, double lambda);

// Fills advantages (GAE, whitened across the batch) and value targets.
// Sentence granularity places its scalar reward at the terminal step first.
void prepare_ppo(std::vector<Trajectory>& trajectories, const RlConfig& cfg);

// Teacher-forced log-probs of an already-sampled token sequence.
std::vector<double> replay_log_probs(const PolicyParams& params, const std::vector<int>& src,
                                     const std::vector<int>& tokens);
// Per-token importance ratios exp(new - old) without updating anything.
std::vector<double> measure_ratios(const PolicyParams& params,
                                   const std::vector<Trajectory>& trajectories);

// Differentiable batch losses (token-count normalized); FD-checkable.
double reinforce_loss(const PolicyParams& params, const std::vector<Trajectory>& trajectories,
                      const RlConfig& cfg, ParamSet* grads);

struct PpoLossParts {
  double policy_loss = 0;  // negated clipped surrogate mean
  double value_loss = 0;   // mean 0.5 (V - return)^2
  double kl = 0;           // mean old - new log-prob (k1 estimator)
  double clip_fraction = 0;
  long long tokens = 0;
  int dropped = 0;  // trajectories excluded for |new - old| log-prob gap > 50
};
// Requires prepare_ppo to have filled advantages and returns.  dropped_out,
// when non-null, receives the indices of dropped trajectories.
double ppo_loss(const PolicyParams& params, const std::vector<Trajectory>& trajectories,
                const RlConfig& cfg, double kl_coef, ParamSet* grads, PpoLossParts* parts,
                std::vector<int>* dropped_out = nullptr);

struct ReinforceStats {
  double loss = 0;
  double mean_reward = 0;
  double grad_norm = 0;
};
ReinforceStats reinforce_update(PolicyParams& params, const std::vector<Trajectory>& trajectories,
                                const RlConfig& cfg, Adam& adam);

struct KlController {
  double coef = 0.2;
};

struct PpoStats {
  double policy_loss = 0;
  double value_loss = 0;
  double kl = 0;  // token-mean over the final epoch
  double clip_fraction = 0;
  int dropped = 0;
};
// Runs ppo_epochs shuffled minibatch passes; adapts controller->coef (when
// non-null) after measuring the final-epoch KL.
PpoStats ppo_update(PolicyParams& params, std::vector<Trajectory>& trajectories,
                    const RlConfig& cfg, Adam& adam, KlController* controller, Rng& rng);

struct RlLogRow {
  int step = 0;
  long long episodes = 0;
  double mean_reward = 0;
  double policy_loss = 0;
  double value_loss = 0;
  double kl = 0;
  double clip_fraction = 0;
};
void write_train_log(const std::vector<RlLogRow>& rows, const std::string& path);
std::vector<RlLogRow> read_train_log(const std::string& path);

// Alternates collection and updates until max_episodes; deterministic given
// cfg.seed.  Returns the per-update log.
std::vector<RlLogRow> train_rl(PolicyParams& params, const RlEnv& env, const RewardSpec& reward,
                               const RlConfig& cfg);

}  // namespace tokrl
