#include <chrono>
#include <cstdio>
#include <vector>

#include "tokrl/corpus.hpp"
#include "tokrl/parallel.hpp"
#include "tokrl/policy.hpp"
#include "tokrl/rl.hpp"
#include "tokrl/textcore.hpp"

using namespace tokrl;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Times f() repeated `reps` times under the given worker count.
template <class F>
double timed(int threads, int reps, F&& f) {
  set_worker_threads(threads);
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  double t = seconds_since(start) / reps;
  set_worker_threads(0);
  return t;
}

bool same_params(const ParamSet& a, const ParamSet& b) {
  auto na = a.named();
  auto nb = b.named();
  for (std::size_t i = 0; i < na.size(); ++i)
    if (na[i].second->v != nb[i].second->v) return false;
  return true;
}

}  // namespace

int main() {
  TaskSpec spec;
  spec.lexicon_size = 120;
  spec.min_len = 4;
  spec.max_len = 16;
  std::vector<ParallelPair> pairs = gen_synthetic(spec, 64, 11);
  std::vector<std::string> texts;
  for (const auto& p : pairs) {
    texts.push_back(p.src);
    texts.push_back(p.ref);
  }
  Vocabulary vocab = build_vocab(texts, 4000);

  PolicyConfig pcfg;
  pcfg.embed_dim = 32;
  pcfg.hidden_dim = 64;
  pcfg.vocab_size = vocab.size();
  pcfg.max_len = 32;
  pcfg.seed = 5;
  PolicyParams params = init_policy(pcfg);
  std::vector<EncodedPair> batch;
  for (const auto& p : pairs) batch.push_back(encode_pair(vocab, p.src, p.ref));

  std::printf("workload: %zu pairs, vocab %d, embed %d, hidden %d, %d hardware threads\n",
              batch.size(), pcfg.vocab_size, pcfg.embed_dim, pcfg.hidden_dim,
              hardware_threads());

  // Gradient batch: the training hot path.
  ParamSet grads_serial = make_param_set(pcfg);
  ParamSet grads_parallel = make_param_set(pcfg);
  double t_serial = timed(1, 3, [&] {
    grads_serial.zero();
    mle_loss(params, batch, &grads_serial);
  });
  double t_parallel = timed(0, 3, [&] {
    grads_parallel.zero();
    mle_loss(params, batch, &grads_parallel);
  });
  std::printf("mle gradient batch   serial %8.3f ms   parallel %8.3f ms   speedup %.2fx   %s\n",
              t_serial * 1e3, t_parallel * 1e3, t_serial / t_parallel,
              same_params(grads_serial, grads_parallel) ? "bitwise equal" : "MISMATCH");

  // Episode collection: the rollout hot path.
  RlEnv env = make_rl_env(vocab, pairs);
  SeverityMap map = severity_map_preset("our");
  Annotator annotator;
  RewardSpec reward{RewardSource::oracle_mqm, map, &annotator};
  RlConfig rcfg;
  rcfg.max_episodes = 64;
  rcfg.rollout_episodes = 64;
  std::vector<Trajectory> out_serial, out_parallel;
  double c_serial = timed(1, 3, [&] {
    Rng rng(17);
    out_serial = collect_trajectories(params, env, reward, rcfg, 64, rng);
  });
  double c_parallel = timed(0, 3, [&] {
    Rng rng(17);
    out_parallel = collect_trajectories(params, env, reward, rcfg, 64, rng);
  });
  bool same = out_serial.size() == out_parallel.size();
  for (std::size_t i = 0; same && i < out_serial.size(); ++i)
    same = out_serial[i].episode.tokens == out_parallel[i].episode.tokens &&
           out_serial[i].rewards.rewards == out_parallel[i].rewards.rewards;
  std::printf("episode collection   serial %8.3f ms   parallel %8.3f ms   speedup %.2fx   %s\n",
              c_serial * 1e3, c_parallel * 1e3, c_serial / c_parallel,
              same ? "bitwise equal" : "MISMATCH");
  return 0;
}
