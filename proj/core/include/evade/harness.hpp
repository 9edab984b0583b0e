#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evade/factory.hpp"
#include "evade/planner.hpp"
#include "evade/replay.hpp"
#include "evade/serialization.hpp"
#include "evade/value_net.hpp"

namespace evade {

enum class Algorithm { Dice, Doolp };
enum class NetPreset { Desk, Paper };

/// Every knob of an experiment campaign. A single gamma drives both the
/// planners' returns and the learner's TD targets.
struct ExperimentConfig {
  Algorithm algorithm = Algorithm::Dice;
  bool evade_enabled = true;
  int horizon = 4;
  int n_budget = 192;
  int episodes = 150;
  int runs = 10;
  double gamma = 0.95;
  std::uint64_t master_seed = 1;
  NetPreset net_preset = NetPreset::Desk;
  BanditUpdateMode bandit_update_mode = BanditUpdateMode::FullReturn;
  int threads = 0;        // 0 = hardware concurrency
  std::string out_dir;    // empty = $EVADE_OUT_DIR or ./evade_out
  TrainerConfig trainer;
  FactoryConfig factory;

  PlannerBudget budget() const { return {n_budget, horizon}; }
  nn::ArchitectureDescriptor net_descriptor() const;
  /// Trainer config with the experiment gamma applied.
  TrainerConfig effective_trainer() const;
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

struct EpisodeRecord {
  int run = 0;
  int episode = 0;
  double final_score = 0.0;
  double completion = 0.0;
  int length = 0;
  double mean_td_loss = 0.0;  // NaN when the episode performed no training
  double wall_ms = 0.0;       // kept out of the metrics files
};

struct EpisodeAggregate {
  int episode = 0;
  double score_mean = 0.0;
  double score_running_mean = 0.0;  // window 5, truncated at the start
  double score_ci95 = 0.0;          // 1.96 * s / sqrt(runs)
  double completion_mean = 0.0;
  double completion_running_mean = 0.0;
  double completion_ci95 = 0.0;
};

/// One run's live state: environment, replay, learner, per-run streams.
class RunSession {
 public:
  RunSession(const ExperimentConfig& config, int run_index);

  /// Fills the replay buffer with zero-oracle (baseline-mode) planning
  /// episodes until `sample_count` transitions are stored.
  void warmup(std::size_t sample_count);

  /// One environment episode following the alternating plan/execute/store/
  /// learn loop. Stops early once every item is complete.
  EpisodeRecord run_episode(int episode_index, std::vector<TraceStep>* trace = nullptr);

  ReplayBuffer& replay() { return replay_; }
  const std::optional<ValueNet>& net() const { return net_; }
  ValueNet* mutable_net() { return net_ ? &*net_ : nullptr; }

 private:
  /// warmup_target > 0 switches to warmup mode: zero oracle, no training,
  /// dedicated streams, stop once the replay holds warmup_target samples.
  EpisodeRecord play_episode(int episode_index, std::size_t warmup_target,
                             std::vector<TraceStep>* trace);

  const ExperimentConfig& config_;
  int run_;
  ReplayBuffer replay_;
  std::optional<ValueNet> net_;
  Rng replay_rng_;
};

/// Standalone warmup used by the `warmup` subcommand.
void warmup_replay(ReplayBuffer& buffer, const ExperimentConfig& config, int run_index,
                   std::size_t sample_count);

struct ExperimentResult {
  std::vector<EpisodeRecord> records;  // ordered by (run, episode)
  std::vector<EpisodeAggregate> aggregates;
  std::string episodes_path;
  std::string aggregate_path;
};

std::vector<EpisodeAggregate> aggregate_records(const std::vector<EpisodeRecord>& records,
                                                int runs, int episodes);

/// Executes runs x episodes (runs in parallel across threads, output order
/// fixed), writing episodes.jsonl, aggregate.jsonl and timing.log under the
/// resolved output directory. Fully reproducible from the master seed:
/// repeated invocations yield byte-identical metrics files.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::ostream* progress = nullptr);

/// Mean over the final `window` episodes of the cross-run episode means.
double final_window_mean_completion(const ExperimentResult& result, int window);
double final_window_mean_score(const ExperimentResult& result, int window);

}  // namespace evade
