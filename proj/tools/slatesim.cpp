// Command-line front end: environment generation, training, evaluation,
// property certification and exact-solution dumps.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "slatesim/env_gen.hpp"
#include "slatesim/env_io.hpp"
#include "slatesim/harness.hpp"
#include "slatesim/oracle.hpp"

namespace fs = std::filesystem;
using namespace slatesim;

namespace {

struct CliOptions {
  // shared
  std::string env_path;
  std::string out;
  Real gamma = 0.99;

  // gen-env
  GeneratorConfig gen;
  long chain_length = 0;
  Real lure = 1.0;
  Real goal = 100.0;

  // train / eval
  std::string agent = "full";
  long slate_size = 0;  // 0: use the environment's declared slate size
  Real knn = 0.1;
  Real alpha = 1.0;
  Real epsilon = 0.1;
  Real eta = 1e-3;
  Real tau = 1e-4;
  long batch_size = 32;
  long buffer_capacity = 100000;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6};
  long train_steps = 200000;
  long eval_episodes = 1000;
  long eval_every = 10000;
  long window = 100;
  bool serial = false;
  bool tanh_hidden = false;
  std::vector<long> q_hidden = {100, 100};
  std::string checkpoint;

  // certify / oracle
  Real tolerance = 1e-9;
  long samples = 100000;
  bool fatal = false;
};

ExperimentConfig experiment_from(const CliOptions& opt, const EnvironmentSpec& env) {
  ExperimentConfig cfg;
  cfg.agent.kind = agent_kind_from_string(opt.agent);
  cfg.agent.slate_size = opt.slate_size > 0 ? opt.slate_size : env.slate_size;
  cfg.agent.knn = opt.knn;
  cfg.agent.alpha = opt.alpha;
  cfg.agent.gamma = opt.gamma;
  cfg.agent.epsilon = opt.epsilon;
  cfg.agent.eta = opt.eta;
  cfg.agent.tau = opt.tau;
  cfg.agent.batch_size = opt.batch_size;
  cfg.agent.buffer_capacity = opt.buffer_capacity;
  cfg.agent.activation = opt.tanh_hidden ? Activation::kTanh : Activation::kRelu;
  cfg.agent.q_hidden = opt.q_hidden;
  if (cfg.agent.q_hidden == std::vector<long>{0}) cfg.agent.q_hidden.clear();
  cfg.train_steps = opt.train_steps;
  cfg.eval_episodes = opt.eval_episodes;
  cfg.eval_every = opt.eval_every;
  cfg.seeds = opt.seeds;
  cfg.window = opt.window;
  cfg.parallel = !opt.serial;
  return cfg;
}

void cmd_gen_env(const CliOptions& opt) {
  EnvironmentSpec env;
  if (opt.chain_length > 0) {
    env = chain_environment(opt.chain_length, opt.lure, opt.goal);
  } else {
    env = generate_environment(opt.gen);
  }
  save_environment(env, opt.out);
  std::cout << "wrote " << opt.out << " (" << env.n_states << " states, hash "
            << git_blob_sha1(environment_to_string(env)) << ")\n";
}

void cmd_train(const CliOptions& opt) {
  const EnvironmentSpec env = load_environment(opt.env_path);
  const ExperimentConfig cfg = experiment_from(opt, env);

  fs::create_directories(opt.out);
  std::vector<SlateAgent> agents;
  const RunMetrics metrics = run_experiment(cfg, env, &agents);

  write_file((fs::path(opt.out) / "metrics.csv").string(), metrics_to_csv(metrics));
  write_file((fs::path(opt.out) / "manifest.json").string(),
             run_manifest(cfg, env, opt.env_path).dump(2) + "\n");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string name = "checkpoint_seed" + std::to_string(cfg.seeds[i]) + ".json";
    write_file((fs::path(opt.out) / name).string(), to_json(agents[i]).dump() + "\n");
  }
  std::cout << "wrote metrics, manifest and " << agents.size() << " checkpoints under "
            << opt.out << "\n";
}

void cmd_eval(const CliOptions& opt) {
  const EnvironmentSpec env = load_environment(opt.env_path);
  std::ifstream in(opt.checkpoint);
  if (!in) throw ConfigError("cannot open checkpoint: " + opt.checkpoint);
  nlohmann::json j;
  in >> j;
  const SlateAgent agent = agent_from_json(j, env);

  RunMetrics metrics;
  for (std::uint64_t seed : opt.seeds) {
    RandomSource rng(seed);
    metrics.rows.push_back(
        {0, seed, evaluate_policy(agent, env, opt.eval_episodes, rng), opt.eval_episodes});
  }
  metrics.aggregates = aggregate(metrics.rows, opt.window);

  const std::string csv = metrics_to_csv(metrics);
  if (opt.out.empty())
    std::cout << csv;
  else
    write_file(opt.out, csv);
  std::cout << "mean return " << format_real(metrics.aggregates[0].seed_mean) << " (std "
            << format_real(metrics.aggregates[0].seed_std) << ") over " << opt.seeds.size()
            << " seeds\n";
}

void cmd_certify(const CliOptions& opt) {
  const EnvironmentSpec env = load_environment(opt.env_path);
  std::string text;

  RandomSource rng(1);
  text += check_fatal_failure(wrap_fatal_failure(env), opt.samples, rng).to_text();

  const auto model = oracle_model(env, true);
  text += check_sequential_presentation(model, opt.tolerance).to_text();

  if (enumerated_pairs(model) <= kMaxEnumeratedPairs) {
    const ExactSolution sol = exact_q(model, opt.gamma, std::min(opt.tolerance, 1e-10));
    text += check_submodular_monotone(model, sol, opt.tolerance).to_text();
    text += check_restricted_sum(model, sol).to_text();

    // observed sequentially-greedy quality against the exhaustive optimum
    PropertyCheck greedy_check{"sequentially greedy value within 1 - 1/e of optimal"};
    Real worst_ratio = 1.0;
    for (long s = 0; s < model.state_count(); ++s) {
      const std::vector<std::vector<ActionId>> slots(model.slate_size(), model.actions(s));
      const Slate greedy = sequential_greedy(
          [&](const Slate& prefix, const std::vector<ActionId>& choices) {
            Vec values(static_cast<long>(choices.size()));
            for (std::size_t i = 0; i < choices.size(); ++i) {
              Slate with = prefix;
              with.push_back(choices[i]);
              values[static_cast<long>(i)] = exact_slate_value(model, sol, s, with);
            }
            return values;
          },
          model.slate_size(), slots);
      const Real greedy_value = exact_slate_value(model, sol, s, greedy);
      const auto [best, best_value] = optimal_slate(model, sol, s);
      ++greedy_check.cases;
      const Real ratio = best_value > 0.0 ? greedy_value / best_value : 1.0;
      worst_ratio = std::min(worst_ratio, ratio);
      if (ratio < 1.0 - 1.0 / std::exp(1.0) - 1e-9)
        detail::record_violation(greedy_check, 1.0 - ratio,
                                 "state " + std::to_string(s));
    }
    greedy_check.worst = 1.0 - worst_ratio;
    text += PropertyReport{{greedy_check}}.to_text();
  } else {
    text += "NOTE  instance too large to enumerate; value-based checks skipped\n";
  }

  if (opt.out.empty())
    std::cout << text;
  else
    write_file(opt.out, text);
}

void cmd_oracle(const CliOptions& opt) {
  const EnvironmentSpec env = load_environment(opt.env_path);
  const auto model = oracle_model(env, opt.fatal);
  const ExactSolution sol = exact_q(model, opt.gamma, opt.tolerance);

  nlohmann::json j;
  j["gamma"] = opt.gamma;
  j["tolerance"] = opt.tolerance;
  j["fatal_failure"] = opt.fatal;
  j["v"] = nlohmann::json::array();
  for (long s = 0; s < env.n_states; ++s) j["v"].push_back(sol.v[s]);
  j["states"] = nlohmann::json::array();
  for (long s = 0; s < env.n_states; ++s) {
    nlohmann::json state_entry;
    state_entry["state"] = s;
    const auto [best, value] = optimal_slate(model, sol, s);
    state_entry["optimal_slate"] = best;
    state_entry["optimal_value"] = value;
    nlohmann::json q = nlohmann::json::array();
    for (const auto& [slate, val] : enumerate_q(model, sol, s))
      q.push_back({{"slate", slate}, {"value", val}});
    state_entry["q"] = std::move(q);
    j["states"].push_back(std::move(state_entry));
  }

  const std::string text = j.dump(2) + "\n";
  if (opt.out.empty())
    std::cout << text;
  else
    write_file(opt.out, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slate-MDP simulation and learning toolkit"};
  app.require_subcommand(1);
  CliOptions opt;

  auto* gen = app.add_subcommand("gen-env", "generate an environment file");
  gen->add_option("--out", opt.out, "output path")->required();
  gen->add_option("--seed", opt.gen.seed, "generator seed");
  gen->add_option("--n-states", opt.gen.n_states, "number of states");
  gen->add_option("--feature-dim", opt.gen.feature_dim, "feature dimension");
  gen->add_option("--slate-size", opt.gen.slate_size, "declared slate size");
  gen->add_option("--min-degree", opt.gen.min_out_degree, "minimum candidate count");
  gen->add_option("--max-degree", opt.gen.max_out_degree, "maximum candidate count");
  gen->add_option("--weight-min", opt.gen.weight_min, "smallest edge weight");
  gen->add_option("--weight-max", opt.gen.weight_max, "largest edge weight");
  gen->add_option("--fail-weight", opt.gen.fail_weight, "no-execution weight");
  gen->add_option("--p-end-fail", opt.gen.p_end_fail, "episode-end probability after a fail");
  gen->add_option("--p-end-exec", opt.gen.p_end_exec,
                  "episode-end probability after an execution");
  gen->add_option("--high-reward-fraction", opt.gen.high_reward_fraction,
                  "share of states with a large reward");
  gen->add_option("--low-reward-max", opt.gen.low_reward_max, "upper bound of small rewards");
  gen->add_option("--high-reward-min", opt.gen.high_reward_min, "lower bound of large rewards");
  gen->add_option("--high-reward-max", opt.gen.high_reward_max, "upper bound of large rewards");
  gen->add_option("--reward-feature-weight", opt.gen.reward_feature_weight,
                  "strength of the value-predictive feature coordinate");
  gen->add_option("--chain-length", opt.chain_length,
                  "build the lure-vs-chain testbed with this many chain states");
  gen->add_option("--lure", opt.lure, "chain testbed lure reward");
  gen->add_option("--goal", opt.goal, "chain testbed goal reward");

  const auto add_agent_options = [&](CLI::App* cmd) {
    cmd->add_option("--env", opt.env_path, "environment file")->required();
    cmd->add_option("--agent", opt.agent, "topk|full|dpgknn");
    cmd->add_option("--slate-size", opt.slate_size, "override the environment slate size");
    cmd->add_option("--knn", opt.knn,
                    "neighbors per slot: 0 = all, fraction in (0,1), or an absolute count");
    cmd->add_option("--alpha", opt.alpha, "training reward exponent");
    cmd->add_option("--gamma", opt.gamma, "discount factor");
    cmd->add_option("--epsilon", opt.epsilon, "exploration probability");
    cmd->add_option("--eta", opt.eta, "learning rate");
    cmd->add_flag("--tanh", opt.tanh_hidden, "tanh hidden units instead of relu");
    cmd->add_option("--q-hidden", opt.q_hidden,
                    "value net hidden sizes, comma separated; 0 means a linear head")
        ->delimiter(',');
    cmd->add_option("--tau", opt.tau, "target network update rate");
    cmd->add_option("--batch-size", opt.batch_size, "replay batch size");
    cmd->add_option("--buffer-capacity", opt.buffer_capacity, "replay capacity");
    cmd->add_option("--seeds", opt.seeds, "comma-separated seed list")->delimiter(',');
    cmd->add_option("--eval-episodes", opt.eval_episodes, "episodes per evaluation block");
    cmd->add_option("--window", opt.window, "moving average window");
  };

  auto* train = app.add_subcommand("train", "train an agent and write metrics");
  add_agent_options(train);
  train->add_option("--train-steps", opt.train_steps, "environment steps to train");
  train->add_option("--eval-every", opt.eval_every, "steps between evaluation blocks");
  train->add_flag("--serial", opt.serial, "run seed replicas sequentially");
  train->add_option("--out", opt.out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_agent_options(eval);
  eval->add_option("--checkpoint", opt.checkpoint, "agent checkpoint file")->required();
  eval->add_option("--out", opt.out, "metrics csv path (stdout when omitted)");

  auto* certify = app.add_subcommand("certify", "run the property certification suite");
  certify->add_option("--env", opt.env_path, "environment file")->required();
  certify->add_option("--gamma", opt.gamma, "discount factor");
  certify->add_option("--tolerance", opt.tolerance, "comparison tolerance");
  certify->add_option("--samples", opt.samples, "sampled transitions for the fatal check");
  certify->add_option("--out", opt.out, "report path (stdout when omitted)");

  auto* oracle = app.add_subcommand("oracle", "dump the exact slate values of a small instance");
  oracle->add_option("--env", opt.env_path, "environment file")->required();
  oracle->add_option("--gamma", opt.gamma, "discount factor");
  oracle->add_option("--tolerance", opt.tolerance, "value iteration tolerance");
  oracle->add_flag("--fatal", opt.fatal, "solve the fatal-failure training view");
  oracle->add_option("--out", opt.out, "dump path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) cmd_gen_env(opt);
    if (train->parsed()) cmd_train(opt);
    if (eval->parsed()) cmd_eval(opt);
    if (certify->parsed()) cmd_certify(opt);
    if (oracle->parsed()) cmd_oracle(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const OracleRefusal& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 3;
  } catch (const NumericalFault& e) {
    std::cerr << "numerical fault: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
