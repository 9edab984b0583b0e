#include "cli.hpp"

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "evade/errors.hpp"
#include "evade/harness.hpp"
#include "evade/serialization.hpp"
#include "evade/tabular.hpp"

namespace evade {

namespace {

struct RunFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string algo;
  int agents = 0;
  int horizon = 0;
  int budget = 0;
  int episodes = 0;
  int runs = 0;
  std::string evade_flag;
  std::string net;
  std::string out;
  std::string update_mode;
  int threads = -1;
};

void add_experiment_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file; flags override its values");
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--algo", flags.algo, "planning algorithm")
      ->check(CLI::IsMember({"dice", "doolp"}));
  cmd->add_option("--agents", flags.agents, "number of agents")->check(CLI::PositiveNumber);
  cmd->add_option("--horizon", flags.horizon, "planning horizon h")->check(CLI::PositiveNumber);
  cmd->add_option("--budget", flags.budget, "simulation budget per decision")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--evade", flags.evade_flag, "value-function bootstrap")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--net", flags.net, "value network preset")
      ->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--update-mode", flags.update_mode, "bandit update semantics")
      ->check(CLI::IsMember({"full_return", "return_to_go"}));
}

bool given(const CLI::App* cmd, const std::string& name) {
  const CLI::Option* option = cmd->get_option_no_throw(name);
  return option != nullptr && option->count() > 0;
}

ExperimentConfig build_config(const CLI::App* cmd, const RunFlags& flags) {
  ExperimentConfig config;
  if (given(cmd, "--config")) {
    config = load_config_file(flags.config_path);
  }
  if (given(cmd, "--seed")) config.master_seed = flags.seed;
  if (given(cmd, "--algo")) {
    config.algorithm = flags.algo == "dice" ? Algorithm::Dice : Algorithm::Doolp;
  }
  if (given(cmd, "--agents")) config.factory.agent_count = flags.agents;
  if (given(cmd, "--horizon")) config.horizon = flags.horizon;
  if (given(cmd, "--budget")) config.n_budget = flags.budget;
  if (given(cmd, "--episodes")) config.episodes = flags.episodes;
  if (given(cmd, "--runs")) config.runs = flags.runs;
  if (given(cmd, "--evade")) config.evade_enabled = flags.evade_flag == "on";
  if (given(cmd, "--net")) {
    config.net_preset = flags.net == "paper" ? NetPreset::Paper : NetPreset::Desk;
  }
  if (given(cmd, "--update-mode")) {
    config.bandit_update_mode = flags.update_mode == "full_return"
                                    ? BanditUpdateMode::FullReturn
                                    : BanditUpdateMode::ReturnToGo;
  }
  if (given(cmd, "--out")) config.out_dir = flags.out;
  if (given(cmd, "--threads")) config.threads = flags.threads;
  return config;
}

int command_run(const CLI::App* cmd, const RunFlags& flags) {
  ExperimentConfig config = build_config(cmd, flags);
  config.validate();
  const ExperimentResult result = run_experiment(config, &std::cerr);
  std::cout << "episodes: " << result.episodes_path << '\n'
            << "aggregate: " << result.aggregate_path << '\n'
            << "final-10 mean score: " << final_window_mean_score(result, 10) << '\n'
            << "final-10 mean completion: " << final_window_mean_completion(result, 10)
            << '\n';
  return 0;
}

int command_warmup(const CLI::App* cmd, const RunFlags& flags, const std::string& out_path,
                   std::size_t samples) {
  ExperimentConfig config = build_config(cmd, flags);
  config.evade_enabled = false;
  config.validate();
  ReplayBuffer buffer(std::max<std::size_t>(samples, 1));
  warmup_replay(buffer, config, /*run_index=*/0, samples);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot open output file: " + out_path);
  }
  save_replay(out, buffer);
  std::cout << "stored " << buffer.size() << " samples in " << out_path << '\n';
  return 0;
}

int command_gradcheck(const std::string& net, std::uint64_t seed, double eps,
                      double tolerance) {
  const auto descriptor = net == "paper" ? nn::ArchitectureDescriptor::paper_preset()
                                         : nn::ArchitectureDescriptor::desk_preset();
  nn::Network network(descriptor);
  Rng init = make_rng(seed, Stream::GradCheck, {0});
  network.init_params(init);
  Rng input_rng = make_rng(seed, Stream::GradCheck, {1});
  const double max_rel = nn::gradient_check_seeded(network, input_rng, eps);
  std::cout << "max relative gradient error: " << max_rel << '\n';
  if (max_rel > tolerance) {
    std::cerr << "exceeds tolerance " << tolerance << '\n';
    return 1;
  }
  return 0;
}

int command_oracle(const std::string& mdp_path, int states, int actions,
                   std::uint64_t seed, double gamma, double tolerance) {
  TabularMdp mdp;
  if (!mdp_path.empty()) {
    std::ifstream in(mdp_path);
    if (!in) {
      throw ConfigError("cannot open MDP file: " + mdp_path);
    }
    // File layout: states actions, then R rows (states x actions), then
    // P rows ((states*actions) x states).
    in >> mdp.state_count >> mdp.action_count;
    mdp.reward.resize(static_cast<std::size_t>(mdp.state_count) * mdp.action_count);
    for (double& r : mdp.reward) in >> r;
    mdp.transition.resize(static_cast<std::size_t>(mdp.state_count) * mdp.action_count *
                          mdp.state_count);
    for (double& p : mdp.transition) in >> p;
    if (!in) {
      throw ValidationError("truncated MDP file");
    }
  } else {
    Rng rng = make_rng(seed, Stream::OracleMdp);
    mdp = random_mdp(states, actions, rng);
  }
  const auto values = value_iteration(mdp, gamma, tolerance);
  for (int s = 0; s < mdp.state_count; ++s) {
    std::cout << "V[" << s << "] = " << values[static_cast<std::size_t>(s)] << '\n';
  }
  return 0;
}

int command_layout(const std::string& file, std::uint64_t seed, const std::string& out_path) {
  MachineGrid grid;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) {
      throw ConfigError("cannot open layout file: " + file);
    }
    grid = load_layout(in);
  } else {
    grid = generate_layout(seed);
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
      throw ConfigError("cannot open output file: " + out_path);
    }
    save_layout(out, grid);
  } else {
    save_layout(std::cout, grid);
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Statistical multi-agent open-loop planning with online value learning"};
  app.require_subcommand(1);

  RunFlags flags;

  CLI::App* run_cmd = app.add_subcommand("run", "execute an experiment campaign");
  add_experiment_flags(run_cmd, flags);
  run_cmd->add_option("--episodes", flags.episodes, "episodes per run")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--runs", flags.runs, "independent runs")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", flags.out, "output directory (default $EVADE_OUT_DIR)");
  run_cmd->add_option("--threads", flags.threads, "parallel runs (0 = all cores)");

  std::string warmup_out = "replay.bin";
  std::size_t warmup_samples = 5000;
  CLI::App* warmup_cmd = app.add_subcommand("warmup", "generate and save replay seed data");
  add_experiment_flags(warmup_cmd, flags);
  warmup_cmd->add_option("--out", warmup_out, "replay dump path");
  warmup_cmd->add_option("--samples", warmup_samples, "transitions to store")
      ->check(CLI::PositiveNumber);

  std::string gc_net = "desk";
  std::uint64_t gc_seed = 7;
  double gc_eps = 1e-5;
  double gc_tolerance = 1e-4;
  CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "verify network gradients");
  gradcheck_cmd->add_option("--net", gc_net, "network preset")
      ->check(CLI::IsMember({"paper", "desk"}));
  gradcheck_cmd->add_option("--seed", gc_seed, "probe seed");
  gradcheck_cmd->add_option("--eps", gc_eps, "finite-difference step");
  gradcheck_cmd->add_option("--tolerance", gc_tolerance, "failure threshold");

  std::string oracle_mdp;
  int oracle_states = 5;
  int oracle_actions = 2;
  std::uint64_t oracle_seed = 1;
  double oracle_gamma = 0.9;
  double oracle_tolerance = 1e-9;
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "toy-MDP value iteration");
  oracle_cmd->add_option("--mdp", oracle_mdp, "MDP file (text: S A, R table, P table)");
  oracle_cmd->add_option("--states", oracle_states, "random MDP states")
      ->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--actions", oracle_actions, "random MDP actions")
      ->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--seed", oracle_seed, "random MDP seed");
  oracle_cmd->add_option("--gamma", oracle_gamma, "discount factor")
      ->check(CLI::Range(0.0, 1.0));
  oracle_cmd->add_option("--tolerance", oracle_tolerance, "Bellman residual bound");

  std::string layout_file;
  std::uint64_t layout_seed = 0;
  std::string layout_out;
  CLI::App* layout_cmd = app.add_subcommand("layout", "print or generate grid layouts");
  layout_cmd->add_option("--file", layout_file, "validate and print an existing layout");
  layout_cmd->add_option("--seed", layout_seed, "generation seed");
  layout_cmd->add_option("--out", layout_out, "write the layout to a file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run_cmd->parsed()) {
      return command_run(run_cmd, flags);
    }
    if (warmup_cmd->parsed()) {
      return command_warmup(warmup_cmd, flags, warmup_out, warmup_samples);
    }
    if (gradcheck_cmd->parsed()) {
      return command_gradcheck(gc_net, gc_seed, gc_eps, gc_tolerance);
    }
    if (oracle_cmd->parsed()) {
      return command_oracle(oracle_mdp, oracle_states, oracle_actions, oracle_seed,
                            oracle_gamma, oracle_tolerance);
    }
    if (layout_cmd->parsed()) {
      return command_layout(layout_file, layout_seed, layout_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& arg : args) {
    argv.push_back(arg.c_str());
  }
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace evade
