#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tokrl/corpus.hpp"
#include "tokrl/errors.hpp"
#include "tokrl/eval.hpp"
#include "tokrl/jsonl.hpp"
#include "tokrl/manifest.hpp"
#include "tokrl/metrics.hpp"
#include "tokrl/parallel.hpp"
#include "tokrl/policy.hpp"
#include "tokrl/reward.hpp"
#include "tokrl/rl.hpp"
#include "tokrl/svg.hpp"
#include "tokrl/textcore.hpp"

namespace fs = std::filesystem;
using namespace tokrl;

namespace {

std::string default_out_dir(const std::string& command, std::uint64_t seed) {
  const char* root = std::getenv("TOKRL_OUTPUT_ROOT");
  std::string base = root != nullptr && *root != '\0' ? root : "runs";
  return base + "/" + command + "-seed" + std::to_string(seed);
}

std::string snapshot_of(CLI::App* cmd) {
  return "[" + cmd->get_name() + "]\n" + cmd->config_to_str(true, false);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_bins(const std::string& s) {
  std::vector<std::size_t> bins;
  for (const auto& item : split_csv(s)) {
    try {
      bins.push_back(static_cast<std::size_t>(std::stoull(item)));
    } catch (const std::exception&) {
      throw ValidationError("bad bucket edge '" + item + "'");
    }
  }
  return bins;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::string text = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

SeverityMap resolve_severity_map(const std::string& name_or_path) {
  for (const char* preset : {"bin", "mqm", "rmqm", "our", "rour"})
    if (name_or_path == preset) return severity_map_preset(name_or_path);
  require(fs::exists(name_or_path),
          "severity map '" + name_or_path + "' is neither a preset nor a file");
  return load_severity_map(name_or_path);
}

KlMode parse_kl_mode(const std::string& name) {
  if (name == "off") return KlMode::off;
  if (name == "adaptive") return KlMode::adaptive;
  throw ValidationError("unknown kl mode '" + name + "'");
}

TokenRewardMode parse_token_reward_mode(const std::string& name) {
  if (name == "reward-to-go" || name == "reward_to_go") return TokenRewardMode::reward_to_go;
  if (name == "instantaneous") return TokenRewardMode::instantaneous;
  throw ValidationError("unknown token reward mode '" + name + "'");
}

SynonymTable synonyms_from(const std::string& lexicon_path, int suffix_every,
                           const std::string& suffix) {
  if (lexicon_path.empty()) return {};
  CipherLexicon lex = load_lexicon(lexicon_path);
  TaskSpec spec;
  spec.lexicon_size = static_cast<int>(lex.entries.size());
  spec.suffix.every = suffix_every;
  spec.suffix.suffix = suffix;
  return make_synonym_table(lex, spec);
}

// Options shared by every command that trains with RL.
struct RlCliOpts {
  std::string algo = "ppo";
  std::string granularity = "token";
  std::string reward = "oracle-mqm";
  std::string severity_map = "our";
  double lr = 1e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  int ppo_epochs = 4;
  int minibatch_size = 16;
  std::string kl_mode = "off";
  double kl_init_coef = 0.2;
  double kl_target = 6.0;
  int max_episodes = 10000;
  int rollout_episodes = 32;
  double value_coef = 0.5;
  std::string token_reward_mode = "reward-to-go";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--algo", algo, "rl algorithm: reinforce | ppo");
    cmd->add_option("--granularity", granularity, "reward granularity: sentence | token");
    cmd->add_option("--reward", reward, "reward source: oracle-mqm | bleu | partial-bleu");
    cmd->add_option("--severity-map", severity_map, "preset (bin|mqm|rmqm|our|rour) or file");
    cmd->add_option("--lr", lr, "learning rate");
    cmd->add_option("--gamma", gamma, "discount factor");
    cmd->add_option("--gae-lambda", gae_lambda, "GAE lambda");
    cmd->add_option("--clip-epsilon", clip_epsilon, "ppo ratio clip");
    cmd->add_option("--ppo-epochs", ppo_epochs, "passes per collected batch");
    cmd->add_option("--minibatch-size", minibatch_size, "trajectories per ppo minibatch");
    cmd->add_option("--kl-mode", kl_mode, "kl penalty: off | adaptive");
    cmd->add_option("--kl-init-coef", kl_init_coef, "initial kl coefficient");
    cmd->add_option("--kl-target", kl_target, "adaptive kl target");
    cmd->add_option("--max-episodes", max_episodes, "total episodes to collect");
    cmd->add_option("--rollout-episodes", rollout_episodes, "episodes per update");
    cmd->add_option("--value-coef", value_coef, "value loss weight");
    cmd->add_option("--token-reward-mode", token_reward_mode,
                    "token REINFORCE weighting: reward-to-go | instantaneous");
  }

  RlConfig to_config(std::uint64_t seed) const {
    RlConfig cfg;
    cfg.algo = parse_rl_algo(algo);
    cfg.granularity = parse_granularity(granularity);
    cfg.lr = lr;
    cfg.gamma = gamma;
    cfg.gae_lambda = gae_lambda;
    cfg.clip_epsilon = clip_epsilon;
    cfg.ppo_epochs = ppo_epochs;
    cfg.minibatch_size = minibatch_size;
    cfg.kl_mode = parse_kl_mode(kl_mode);
    cfg.kl_init_coef = kl_init_coef;
    cfg.kl_target = kl_target;
    cfg.max_episodes = max_episodes;
    cfg.rollout_episodes = rollout_episodes;
    cfg.value_coef = value_coef;
    cfg.token_reward_mode = parse_token_reward_mode(token_reward_mode);
    cfg.seed = seed;
    validate_rl_config(cfg);
    return cfg;
  }
};

struct EvalCliOpts {
  std::string metrics = "bleu,chrf,oracle_quality";
  int n_samples = 100;
  int sample_size = 500;
  std::string bins = "0,100,250,500,1000";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--metrics", metrics, "comma list of bleu,chrf,oracle_quality");
    cmd->add_option("--n-samples", n_samples, "bootstrap resamples");
    cmd->add_option("--sample-size", sample_size, "bootstrap sample size (capped at corpus)");
    cmd->add_option("--bins", bins, "length bucket edges, comma separated");
  }

  EvalCompareConfig to_config(bool corpus_bootstrap) const {
    EvalCompareConfig cfg;
    cfg.bootstrap.n_samples = n_samples;
    cfg.bootstrap.sample_size = sample_size;
    cfg.corpus_bootstrap_bleu = corpus_bootstrap;
    cfg.length_bins = parse_bins(bins);
    return cfg;
  }
};

void write_report_artifacts(const EvalReport& report, RunDir& rd) {
  write_report_json(report, rd.file("metrics.json"));
  write_segment_csv(report, rd.file("segments.csv"));
  std::string table = format_report_table(report);
  write_file(rd.file("report.txt"), table);
  std::cout << table;
}

// Per-system, per-bucket means of the given metric as one grouped bar chart.
void write_bucket_svg(const EvalReport& report, const std::string& metric,
                      const std::string& path) {
  std::vector<std::string> labels;
  std::vector<BarGroup> groups;
  for (const auto& s : report.systems) labels.push_back(s.name);
  for (const auto& row : report.bucket_table) {
    if (row.metric != metric || row.system != report.systems.front().name) continue;
    std::ostringstream label;
    if (row.bucket.open)
      label << '[' << row.bucket.lo << ",inf)";
    else
      label << '[' << row.bucket.lo << ',' << row.bucket.hi << ')';
    groups.push_back({label.str(), {}});
    groups.back().values.reserve(report.systems.size());
    for (const auto& s : report.systems) {
      double mean = 0.0;
      for (const auto& r : report.bucket_table)
        if (r.metric == metric && r.system == s.name && r.bucket.lo == row.bucket.lo)
          mean = r.bucket.mean;
      groups.back().values.push_back(mean);
    }
  }
  if (groups.empty()) return;
  write_file(path, svg_bar_chart(labels, groups, metric + " by source length", metric));
}

int run_cli(int argc, char** argv) {
  CLI::App app{"token-level reward optimization for seq2seq translation policies"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "key/value config with [subcommand] sections; flags win");
  app.require_subcommand(1);

  // gen-corpus ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic cipher corpus");
  struct {
    std::uint64_t seed = 7;
    int train = 20000, dev = 1000, test = 1000;
    int lexicon_size = 200, min_len = 3, max_len = 20;
    std::string reorder = "identity";
    int suffix_every = 0;
    std::string suffix = "ka";
    double corrupt_minor = 0, corrupt_major = 0, corrupt_critical = 0;
    std::string out;
  } g;
  gen->add_option("--seed", g.seed, "sampling seed");
  gen->add_option("--train", g.train, "training pairs");
  gen->add_option("--dev", g.dev, "dev pairs");
  gen->add_option("--test", g.test, "test pairs");
  gen->add_option("--lexicon-size", g.lexicon_size, "distinct source words");
  gen->add_option("--min-len", g.min_len, "minimum sentence length in words");
  gen->add_option("--max-len", g.max_len, "maximum sentence length in words");
  gen->add_option("--reorder", g.reorder, "identity | reverse | swap-pairs");
  gen->add_option("--suffix-every", g.suffix_every, "suffix every k-th target word (0 = off)");
  gen->add_option("--suffix", g.suffix, "suffix string");
  gen->add_option("--corrupt-minor", g.corrupt_minor, "per-word synonym substitution rate");
  gen->add_option("--corrupt-major", g.corrupt_major, "per-word substitution/deletion rate");
  gen->add_option("--corrupt-critical", g.corrupt_critical, "per-word spurious insertion rate");
  gen->add_option("--out", g.out, "run directory");
  gen->callback([&] {
    require(g.train >= 1 && g.dev >= 0 && g.test >= 0, "corpus sizes must be positive");
    TaskSpec spec;
    spec.lexicon_size = g.lexicon_size;
    spec.min_len = g.min_len;
    spec.max_len = g.max_len;
    spec.reorder = parse_reorder_rule(g.reorder);
    spec.suffix.every = g.suffix_every;
    spec.suffix.suffix = g.suffix;
    if (g.out.empty()) g.out = default_out_dir("gen-corpus", g.seed);
    RunDir rd(g.out, "gen-corpus", g.seed);
    rd.set_config_snapshot(snapshot_of(gen));

    // Disjoint split streams: xor-ing high bits keeps every per-item seed
    // distinct across splits for any index below 2^32.
    save_jsonl(gen_synthetic(spec, g.train, g.seed), rd.file("train.jsonl"));
    if (g.dev > 0)
      save_jsonl(gen_synthetic(spec, g.dev, g.seed ^ (1ull << 32)), rd.file("dev.jsonl"));
    std::vector<ParallelPair> test;
    if (g.test > 0) {
      test = gen_synthetic(spec, g.test, g.seed ^ (2ull << 32));
      save_jsonl(test, rd.file("test.jsonl"));
    }
    CipherLexicon lex = make_lexicon(spec.lexicon_size);
    save_lexicon(lex, rd.file("lexicon.jsonl"));

    CorruptionRates rates{g.corrupt_minor, g.corrupt_major, g.corrupt_critical};
    if (!test.empty() && rates.p_minor + rates.p_major + rates.p_critical > 0) {
      CorruptionContext ctx = make_corruption_context(lex, spec);
      std::vector<CorruptionRecord> records;
      records.reserve(test.size());
      for (std::size_t i = 0; i < test.size(); ++i)
        records.push_back(corrupt(test[i], rates, derive_seed(g.seed ^ (3ull << 32), i), ctx));
      save_corruptions(records, rd.file("corruptions.jsonl"));
    }
    rd.finalize();
    std::cout << "wrote " << g.train << " train / " << g.dev << " dev / " << g.test
              << " test pairs to " << g.out << "\n";
  });

  // train-mle ----------------------------------------------------------------
  auto* mle = app.add_subcommand("train-mle", "teacher-forced pretraining");
  struct {
    std::string corpus, dev, out;
    int embed_dim = 48, hidden_dim = 96, max_len = 128, vocab_size = 4000;
    int batch_size = 16, max_epochs = 50, patience = 5;
    double lr = 1e-3, lr_decay = 1.0;
    std::uint64_t seed = 1;
  } m;
  mle->add_option("--corpus", m.corpus, "training pairs jsonl")->required();
  mle->add_option("--dev", m.dev, "dev pairs jsonl")->required();
  mle->add_option("--embed-dim", m.embed_dim, "embedding size");
  mle->add_option("--hidden-dim", m.hidden_dim, "recurrent state size");
  mle->add_option("--max-len", m.max_len, "decoder step cap");
  mle->add_option("--vocab-size", m.vocab_size, "vocabulary cap");
  mle->add_option("--batch-size", m.batch_size, "pairs per update");
  mle->add_option("--max-epochs", m.max_epochs, "epoch cap");
  mle->add_option("--patience", m.patience, "epochs without dev improvement before stopping");
  mle->add_option("--lr", m.lr, "learning rate");
  mle->add_option("--lr-decay", m.lr_decay, "per-epoch learning rate multiplier");
  mle->add_option("--seed", m.seed, "init and shuffle seed");
  mle->add_option("--out", m.out, "run directory");
  mle->callback([&] {
    if (m.out.empty()) m.out = default_out_dir("train-mle", m.seed);
    RunDir rd(m.out, "train-mle", m.seed);
    rd.set_config_snapshot(snapshot_of(mle));
    rd.record_input(m.corpus);
    rd.record_input(m.dev);

    std::vector<ParallelPair> train_pairs = load_jsonl(m.corpus);
    std::vector<ParallelPair> dev_pairs = load_jsonl(m.dev);
    std::vector<std::string> texts;
    texts.reserve(train_pairs.size() * 2);
    for (const auto& p : train_pairs) {
      texts.push_back(p.src);
      texts.push_back(p.ref);
    }
    Vocabulary vocab = build_vocab(texts, m.vocab_size);
    auto encode_all = [&](const std::vector<ParallelPair>& pairs) {
      std::vector<EncodedPair> enc;
      enc.reserve(pairs.size());
      for (const auto& p : pairs) enc.push_back(encode_pair(vocab, p.src, p.ref));
      return enc;
    };
    std::vector<EncodedPair> train_enc = encode_all(train_pairs);
    std::vector<EncodedPair> dev_enc = encode_all(dev_pairs);

    PolicyConfig pcfg;
    pcfg.embed_dim = m.embed_dim;
    pcfg.hidden_dim = m.hidden_dim;
    pcfg.vocab_size = vocab.size();
    pcfg.max_len = m.max_len;
    pcfg.seed = m.seed;
    PolicyParams params = init_policy(pcfg);

    MleConfig mcfg;
    mcfg.adam.lr = m.lr;
    mcfg.lr_decay = m.lr_decay;
    mcfg.batch_size = m.batch_size;
    mcfg.max_epochs = m.max_epochs;
    mcfg.patience = m.patience;
    mcfg.seed = m.seed;
    MleTrainer trainer(params, mcfg);
    std::vector<double> dev_losses = trainer.train(train_enc, dev_enc);

    save_policy(params, rd.file("policy.bin"));
    save_vocab(vocab, rd.file("vocab.txt"));
    std::ostringstream log;
    log.precision(17);
    log << "epoch,dev_loss\n";
    for (std::size_t e = 0; e < dev_losses.size(); ++e) log << e + 1 << ',' << dev_losses[e] << '\n';
    write_file(rd.file("mle_log.csv"), log.str());
    write_file(rd.file("curves.svg"),
               svg_line_plot({{"dev loss", dev_losses}}, "dev loss per epoch", "epoch", "nll"));
    rd.finalize();
    double best = dev_losses.front();
    for (double d : dev_losses) best = std::min(best, d);
    std::cout << "trained " << dev_losses.size() << " epochs, best dev loss " << best << ", saved "
              << rd.file("policy.bin") << "\n";
  });

  // train-rl -----------------------------------------------------------------
  auto* rl = app.add_subcommand("train-rl", "policy-gradient fine-tuning");
  struct {
    std::string policy, vocab, corpus, lexicon, out;
    int suffix_every = 0;
    std::string suffix = "ka";
    std::uint64_t seed = 0;
  } r;
  RlCliOpts rl_opts;
  rl->add_option("--policy", r.policy, "starting checkpoint")->required();
  rl->add_option("--vocab", r.vocab, "vocabulary file")->required();
  rl->add_option("--corpus", r.corpus, "training pairs jsonl")->required();
  rl->add_option("--lexicon", r.lexicon, "lexicon jsonl for the oracle synonym table");
  rl->add_option("--suffix-every", r.suffix_every, "suffix rule used at corpus generation");
  rl->add_option("--suffix", r.suffix, "suffix string used at corpus generation");
  rl->add_option("--seed", r.seed, "sampling seed");
  rl->add_option("--out", r.out, "run directory");
  rl_opts.add_to(rl);
  rl->callback([&] {
    if (r.out.empty()) r.out = default_out_dir("train-rl", r.seed);
    RunDir rd(r.out, "train-rl", r.seed);
    rd.set_config_snapshot(snapshot_of(rl));
    rd.record_input(r.policy);
    rd.record_input(r.vocab);
    rd.record_input(r.corpus);
    if (!r.lexicon.empty()) rd.record_input(r.lexicon);

    PolicyParams params = load_policy(r.policy);
    Vocabulary vocab = load_vocab(r.vocab);
    require(vocab.size() == params.cfg.vocab_size, "vocabulary size disagrees with checkpoint");
    std::vector<ParallelPair> pairs = load_jsonl(r.corpus);
    RlEnv env = make_rl_env(vocab, pairs);
    Annotator annotator(synonyms_from(r.lexicon, r.suffix_every, r.suffix));
    RewardSpec reward;
    reward.source = parse_reward_source(rl_opts.reward);
    reward.map = resolve_severity_map(rl_opts.severity_map);
    reward.annotator = &annotator;
    RlConfig cfg = rl_opts.to_config(r.seed);

    std::vector<RlLogRow> rows = train_rl(params, env, reward, cfg);

    save_policy(params, rd.file("policy.bin"));
    write_train_log(rows, rd.file("train_log.csv"));
    std::vector<double> mean_rewards;
    mean_rewards.reserve(rows.size());
    for (const auto& row : rows) mean_rewards.push_back(row.mean_reward);
    write_file(rd.file("curves.svg"), svg_line_plot({{"mean reward", mean_rewards}},
                                                    "mean reward per update", "update", "reward"));
    rd.finalize();
    std::cout << "ran " << rows.size() << " updates over " << cfg.max_episodes
              << " episodes, final mean reward " << (rows.empty() ? 0.0 : rows.back().mean_reward)
              << ", saved " << rd.file("policy.bin") << "\n";
  });

  // annotate -----------------------------------------------------------------
  auto* ann_cmd = app.add_subcommand("annotate", "oracle error spans for hypotheses");
  struct {
    std::string corpus, hyp, lexicon, out;
    int suffix_every = 0;
    std::string suffix = "ka";
    std::uint64_t seed = 0;
  } a;
  ann_cmd->add_option("--corpus", a.corpus, "pairs jsonl providing references")->required();
  ann_cmd->add_option("--hyp", a.hyp, "hypothesis text, one line per pair")->required();
  ann_cmd->add_option("--lexicon", a.lexicon, "lexicon jsonl for the synonym table");
  ann_cmd->add_option("--suffix-every", a.suffix_every, "suffix rule used at corpus generation");
  ann_cmd->add_option("--suffix", a.suffix, "suffix string used at corpus generation");
  ann_cmd->add_option("--out", a.out, "run directory");
  ann_cmd->callback([&] {
    if (a.out.empty()) a.out = default_out_dir("annotate", a.seed);
    RunDir rd(a.out, "annotate", a.seed);
    rd.set_config_snapshot(snapshot_of(ann_cmd));
    rd.record_input(a.corpus);
    rd.record_input(a.hyp);
    if (!a.lexicon.empty()) rd.record_input(a.lexicon);

    std::vector<ParallelPair> pairs = load_jsonl(a.corpus);
    std::vector<std::string> hyps = read_lines(a.hyp);
    require(hyps.size() == pairs.size(), "hypothesis line count disagrees with corpus size");
    Annotator annotator(synonyms_from(a.lexicon, a.suffix_every, a.suffix));
    std::vector<SpanAnnotation> annotations(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
      annotations[i] = annotator.annotate(hyps[i], pairs[i].ref);
      annotations[i].pair_id = pairs[i].id;
    });
    save_annotations(annotations, rd.file("annotations.jsonl"));
    double mean_score = 0.0;
    for (const auto& an : annotations) mean_score += an.sentence_score;
    mean_score /= static_cast<double>(annotations.size());
    rd.finalize();
    std::cout << "annotated " << annotations.size() << " hypotheses, mean sentence score "
              << mean_score << ", saved " << rd.file("annotations.jsonl") << "\n";
  });

  // evaluate -----------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "score one checkpoint on a testset");
  struct {
    std::string policy, vocab, corpus, lexicon, out, name = "system";
    int suffix_every = 0;
    std::string suffix = "ka";
    std::uint64_t seed = 0;
  } e;
  EvalCliOpts ev_opts;
  ev->add_option("--policy", e.policy, "checkpoint to evaluate")->required();
  ev->add_option("--vocab", e.vocab, "vocabulary file")->required();
  ev->add_option("--corpus", e.corpus, "testset jsonl")->required();
  ev->add_option("--lexicon", e.lexicon, "lexicon jsonl for the oracle synonym table");
  ev->add_option("--suffix-every", e.suffix_every, "suffix rule used at corpus generation");
  ev->add_option("--suffix", e.suffix, "suffix string used at corpus generation");
  ev->add_option("--name", e.name, "system name in reports");
  ev->add_option("--seed", e.seed, "bootstrap seed");
  ev->add_option("--out", e.out, "run directory");
  ev_opts.add_to(ev);
  ev->callback([&] {
    if (e.out.empty()) e.out = default_out_dir("evaluate", e.seed);
    RunDir rd(e.out, "evaluate", e.seed);
    rd.set_config_snapshot(snapshot_of(ev));
    rd.record_input(e.policy);
    rd.record_input(e.vocab);
    rd.record_input(e.corpus);
    if (!e.lexicon.empty()) rd.record_input(e.lexicon);

    PolicyParams params = load_policy(e.policy);
    Vocabulary vocab = load_vocab(e.vocab);
    require(vocab.size() == params.cfg.vocab_size, "vocabulary size disagrees with checkpoint");
    std::vector<ParallelPair> pairs = load_jsonl(e.corpus);
    Annotator annotator(synonyms_from(e.lexicon, e.suffix_every, e.suffix));
    std::vector<std::string> metric_list = split_csv(ev_opts.metrics);
    SystemScores scores =
        evaluate_system(params, vocab, pairs, metric_list, &annotator, e.name);

    std::vector<std::string> srcs;
    srcs.reserve(pairs.size());
    for (const auto& p : pairs) srcs.push_back(p.src);
    Rng rng(e.seed);
    EvalReport report = make_eval_report({scores}, metric_list, srcs, ev_opts.to_config(false), rng);

    std::ostringstream hyp_text;
    for (const auto& h : scores.hyps) hyp_text << h << '\n';
    write_file(rd.file("hyps.txt"), hyp_text.str());
    write_report_artifacts(report, rd);
    rd.finalize();
  });

  // compare ------------------------------------------------------------------
  auto* cmp = app.add_subcommand("compare", "significance-tested system comparison");
  struct {
    std::string corpus, vocab, lexicon, out;
    std::vector<std::string> systems;
    bool corpus_bootstrap = false;
    int suffix_every = 0;
    std::string suffix = "ka";
    std::uint64_t seed = 0;
  } c;
  EvalCliOpts cmp_opts;
  cmp->add_option("--corpus", c.corpus, "testset jsonl")->required();
  cmp->add_option("--system", c.systems,
                  "name=path; a .bin path is decoded, anything else is hypothesis lines")
      ->required();
  cmp->add_option("--vocab", c.vocab, "vocabulary file (needed for .bin systems)");
  cmp->add_option("--lexicon", c.lexicon, "lexicon jsonl for the oracle synonym table");
  cmp->add_option("--suffix-every", c.suffix_every, "suffix rule used at corpus generation");
  cmp->add_option("--suffix", c.suffix, "suffix string used at corpus generation");
  cmp->add_flag("--corpus-bootstrap", c.corpus_bootstrap,
                "bootstrap corpus-level BLEU instead of segment means");
  cmp->add_option("--seed", c.seed, "bootstrap seed");
  cmp->add_option("--out", c.out, "run directory");
  cmp_opts.add_to(cmp);
  cmp->callback([&] {
    if (c.out.empty()) c.out = default_out_dir("compare", c.seed);
    RunDir rd(c.out, "compare", c.seed);
    rd.set_config_snapshot(snapshot_of(cmp));
    rd.record_input(c.corpus);
    if (!c.lexicon.empty()) rd.record_input(c.lexicon);

    std::vector<ParallelPair> pairs = load_jsonl(c.corpus);
    Annotator annotator(synonyms_from(c.lexicon, c.suffix_every, c.suffix));
    std::vector<std::string> metric_list = split_csv(cmp_opts.metrics);

    Vocabulary vocab;
    bool vocab_loaded = false;
    std::vector<SystemScores> systems;
    for (const auto& spec : c.systems) {
      std::size_t eq = spec.find('=');
      require(eq != std::string::npos && eq > 0 && eq + 1 < spec.size(),
              "system must be name=path, got '" + spec + "'");
      std::string name = spec.substr(0, eq);
      std::string path = spec.substr(eq + 1);
      rd.record_input(path);
      if (path.size() > 4 && path.substr(path.size() - 4) == ".bin") {
        require(!c.vocab.empty(), "policy systems need --vocab");
        if (!vocab_loaded) {
          vocab = load_vocab(c.vocab);
          rd.record_input(c.vocab);
          vocab_loaded = true;
        }
        PolicyParams params = load_policy(path);
        require(vocab.size() == params.cfg.vocab_size,
                "vocabulary size disagrees with checkpoint " + path);
        systems.push_back(evaluate_system(params, vocab, pairs, metric_list, &annotator, name));
      } else {
        std::vector<std::string> hyps = read_lines(path);
        require(hyps.size() == pairs.size(),
                "hypothesis line count of '" + path + "' disagrees with corpus size");
        systems.push_back(evaluate_hypotheses(name, hyps, pairs, metric_list, &annotator));
      }
    }

    std::vector<std::string> srcs;
    srcs.reserve(pairs.size());
    for (const auto& p : pairs) srcs.push_back(p.src);
    Rng rng(c.seed);
    EvalReport report =
        make_eval_report(systems, metric_list, srcs, cmp_opts.to_config(c.corpus_bootstrap), rng);
    write_report_artifacts(report, rd);
    write_bucket_svg(report, metric_list.back(), rd.file("buckets.svg"));
    rd.finalize();
  });

  // ablate-severity ----------------------------------------------------------
  auto* ab = app.add_subcommand("ablate-severity", "train one run per severity preset");
  struct {
    std::string policy, vocab, corpus, test, lexicon, out;
    std::string presets = "bin,mqm,rmqm,our,rour";
    int suffix_every = 0;
    std::string suffix = "ka";
    std::uint64_t seed = 0;
  } s;
  RlCliOpts ab_rl;
  EvalCliOpts ab_ev;
  ab->add_option("--policy", s.policy, "shared starting checkpoint")->required();
  ab->add_option("--vocab", s.vocab, "vocabulary file")->required();
  ab->add_option("--corpus", s.corpus, "rl training pairs jsonl")->required();
  ab->add_option("--test", s.test, "held-out testset jsonl")->required();
  ab->add_option("--lexicon", s.lexicon, "lexicon jsonl for the oracle synonym table");
  ab->add_option("--presets", s.presets, "severity presets to compare");
  ab->add_option("--suffix-every", s.suffix_every, "suffix rule used at corpus generation");
  ab->add_option("--suffix", s.suffix, "suffix string used at corpus generation");
  ab->add_option("--seed", s.seed, "sampling and bootstrap seed");
  ab->add_option("--out", s.out, "run directory");
  ab_rl.add_to(ab);
  ab_ev.add_to(ab);
  ab->callback([&] {
    if (s.out.empty()) s.out = default_out_dir("ablate-severity", s.seed);
    RunDir rd(s.out, "ablate-severity", s.seed);
    rd.set_config_snapshot(snapshot_of(ab));
    rd.record_input(s.policy);
    rd.record_input(s.vocab);
    rd.record_input(s.corpus);
    rd.record_input(s.test);
    if (!s.lexicon.empty()) rd.record_input(s.lexicon);

    Vocabulary vocab = load_vocab(s.vocab);
    std::vector<ParallelPair> train_pairs = load_jsonl(s.corpus);
    std::vector<ParallelPair> test_pairs = load_jsonl(s.test);
    RlEnv env = make_rl_env(vocab, train_pairs);
    Annotator annotator(synonyms_from(s.lexicon, s.suffix_every, s.suffix));
    std::vector<std::string> metric_list = split_csv(ab_ev.metrics);

    std::vector<SystemScores> systems;
    std::vector<PlotSeries> curves;
    for (const auto& preset : split_csv(s.presets)) {
      PolicyParams params = load_policy(s.policy);
      require(vocab.size() == params.cfg.vocab_size, "vocabulary size disagrees with checkpoint");
      RewardSpec reward;
      reward.source = parse_reward_source(ab_rl.reward);
      reward.map = severity_map_preset(preset);
      reward.annotator = &annotator;
      RlConfig cfg = ab_rl.to_config(s.seed);
      std::vector<RlLogRow> rows = train_rl(params, env, reward, cfg);
      write_train_log(rows, rd.file("train_log_" + preset + ".csv"));
      PlotSeries series{preset, {}};
      for (const auto& row : rows) series.ys.push_back(row.mean_reward);
      curves.push_back(std::move(series));
      systems.push_back(evaluate_system(params, vocab, test_pairs, metric_list, &annotator,
                                        preset));
    }

    std::vector<std::string> srcs;
    srcs.reserve(test_pairs.size());
    for (const auto& p : test_pairs) srcs.push_back(p.src);
    Rng rng(s.seed);
    EvalReport report =
        make_eval_report(systems, metric_list, srcs, ab_ev.to_config(false), rng);
    write_report_artifacts(report, rd);
    write_file(rd.file("curves.svg"), svg_line_plot(curves, "mean reward per update by severity map",
                                                    "update", "reward"));
    rd.finalize();
  });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& pe) {
    app.exit(pe);
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
