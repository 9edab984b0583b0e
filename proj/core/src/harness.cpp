#include "evade/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "evade/errors.hpp"

namespace evade {

using nlohmann::json;

namespace {

constexpr std::size_t kReplayCapacity = 10000;

std::string algorithm_name(Algorithm a) { return a == Algorithm::Dice ? "dice" : "doolp"; }

Algorithm algorithm_from(const std::string& name) {
  if (name == "dice") return Algorithm::Dice;
  if (name == "doolp") return Algorithm::Doolp;
  throw ConfigError("unknown algorithm: " + name);
}

std::string preset_name(NetPreset p) { return p == NetPreset::Desk ? "desk" : "paper"; }

NetPreset preset_from(const std::string& name) {
  if (name == "desk") return NetPreset::Desk;
  if (name == "paper") return NetPreset::Paper;
  throw ConfigError("unknown net preset: " + name);
}

std::string update_mode_name(BanditUpdateMode m) {
  return m == BanditUpdateMode::FullReturn ? "full_return" : "return_to_go";
}

BanditUpdateMode update_mode_from(const std::string& name) {
  if (name == "full_return") return BanditUpdateMode::FullReturn;
  if (name == "return_to_go") return BanditUpdateMode::ReturnToGo;
  throw ConfigError("unknown bandit update mode: " + name);
}

}  // namespace

nn::ArchitectureDescriptor ExperimentConfig::net_descriptor() const {
  return net_preset == NetPreset::Desk ? nn::ArchitectureDescriptor::desk_preset()
                                       : nn::ArchitectureDescriptor::paper_preset();
}

TrainerConfig ExperimentConfig::effective_trainer() const {
  TrainerConfig t = trainer;
  t.gamma = gamma;
  return t;
}

void ExperimentConfig::validate() const {
  budget().validate();
  factory.validate();
  effective_trainer().validate();
  if (episodes < 1 || runs < 1) {
    throw ConfigError("episodes and runs must be >= 1");
  }
  if (gamma < 0.0 || gamma > 1.0) {
    throw ConfigError("gamma must lie in [0, 1]");
  }
  if (evade_enabled && trainer.warmup_samples > kReplayCapacity) {
    throw ConfigError("warmup_samples exceeds the replay capacity");
  }
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["algorithm"] = algorithm_name(c.algorithm);
  j["evade_enabled"] = c.evade_enabled;
  j["horizon"] = c.horizon;
  j["n_budget"] = c.n_budget;
  j["episodes"] = c.episodes;
  j["runs"] = c.runs;
  j["gamma"] = c.gamma;
  j["master_seed"] = c.master_seed;
  j["net_preset"] = preset_name(c.net_preset);
  j["bandit_update_mode"] = update_mode_name(c.bandit_update_mode);
  json t;
  t["learning_rate"] = c.trainer.learning_rate;
  t["minibatch_size"] = c.trainer.minibatch_size;
  t["target_sync_period"] = c.trainer.target_sync_period;
  t["warmup_samples"] = c.trainer.warmup_samples;
  t["gradient_steps_per_env_step"] = c.trainer.gradient_steps_per_env_step;
  t["adam_beta1"] = c.trainer.adam_beta1;
  t["adam_beta2"] = c.trainer.adam_beta2;
  t["adam_epsilon"] = c.trainer.adam_epsilon;
  j["trainer"] = std::move(t);
  json f;
  f["agent_count"] = c.factory.agent_count;
  f["episode_length"] = c.factory.episode_length;
  f["machine_failure_prob"] = c.factory.machine_failure_prob;
  f["processing_cost"] = c.factory.processing_cost;
  f["step_penalty"] = c.factory.step_penalty;
  f["layout_seed"] = c.factory.layout_seed;
  if (c.factory.layout.has_value()) {
    f["layout"] = std::vector<int>(c.factory.layout->begin(), c.factory.layout->end());
  }
  j["factory"] = std::move(f);
  return j.dump();
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    if (j.contains("algorithm")) c.algorithm = algorithm_from(j["algorithm"].get<std::string>());
    if (j.contains("evade_enabled")) c.evade_enabled = j["evade_enabled"].get<bool>();
    if (j.contains("horizon")) c.horizon = j["horizon"].get<int>();
    if (j.contains("n_budget")) c.n_budget = j["n_budget"].get<int>();
    if (j.contains("episodes")) c.episodes = j["episodes"].get<int>();
    if (j.contains("runs")) c.runs = j["runs"].get<int>();
    if (j.contains("gamma")) c.gamma = j["gamma"].get<double>();
    if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("net_preset")) c.net_preset = preset_from(j["net_preset"].get<std::string>());
    if (j.contains("bandit_update_mode")) {
      c.bandit_update_mode = update_mode_from(j["bandit_update_mode"].get<std::string>());
    }
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("trainer")) {
      const json& t = j["trainer"];
      if (t.contains("learning_rate")) c.trainer.learning_rate = t["learning_rate"].get<double>();
      if (t.contains("minibatch_size")) c.trainer.minibatch_size = t["minibatch_size"].get<int>();
      if (t.contains("target_sync_period")) c.trainer.target_sync_period = t["target_sync_period"].get<std::uint64_t>();
      if (t.contains("warmup_samples")) c.trainer.warmup_samples = t["warmup_samples"].get<std::size_t>();
      if (t.contains("gradient_steps_per_env_step")) c.trainer.gradient_steps_per_env_step = t["gradient_steps_per_env_step"].get<int>();
      if (t.contains("adam_beta1")) c.trainer.adam_beta1 = t["adam_beta1"].get<double>();
      if (t.contains("adam_beta2")) c.trainer.adam_beta2 = t["adam_beta2"].get<double>();
      if (t.contains("adam_epsilon")) c.trainer.adam_epsilon = t["adam_epsilon"].get<double>();
    }
    if (j.contains("factory")) {
      const json& f = j["factory"];
      if (f.contains("agent_count")) c.factory.agent_count = f["agent_count"].get<int>();
      if (f.contains("episode_length")) c.factory.episode_length = f["episode_length"].get<int>();
      if (f.contains("machine_failure_prob")) c.factory.machine_failure_prob = f["machine_failure_prob"].get<double>();
      if (f.contains("processing_cost")) c.factory.processing_cost = f["processing_cost"].get<double>();
      if (f.contains("step_penalty")) c.factory.step_penalty = f["step_penalty"].get<double>();
      if (f.contains("layout_seed")) c.factory.layout_seed = f["layout_seed"].get<std::uint64_t>();
      if (f.contains("layout")) {
        const auto values = f["layout"].get<std::vector<int>>();
        if (values.size() != kGridCells) {
          throw ConfigError("factory.layout needs exactly 25 entries");
        }
        std::array<int, kGridCells> layout{};
        std::copy(values.begin(), values.end(), layout.begin());
        c.factory.layout = layout;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json(text);
}

RunSession::RunSession(const ExperimentConfig& config, int run_index)
    : config_(config), run_(run_index), replay_(kReplayCapacity),
      replay_rng_(make_rng(config.master_seed, Stream::ReplaySample,
                           {static_cast<std::uint64_t>(run_index)})) {
  if (config_.evade_enabled) {
    Rng init = make_rng(config_.master_seed, Stream::LearnerInit,
                        {static_cast<std::uint64_t>(run_index)});
    net_.emplace(config_.net_descriptor(), init);
  }
}

void RunSession::warmup(std::size_t sample_count) {
  if (sample_count > replay_.capacity()) {
    throw ContractViolation("warmup sample count exceeds replay capacity");
  }
  int episode = 0;
  while (replay_.size() < sample_count) {
    play_episode(episode++, sample_count, nullptr);
  }
}

EpisodeRecord RunSession::run_episode(int episode_index, std::vector<TraceStep>* trace) {
  return play_episode(episode_index, 0, trace);
}

EpisodeRecord RunSession::play_episode(int episode_index, std::size_t warmup_target,
                                       std::vector<TraceStep>* trace) {
  const bool warmup_mode = warmup_target > 0;
  const auto t_start = std::chrono::steady_clock::now();
  const std::uint64_t run_u = static_cast<std::uint64_t>(run_);
  const std::uint64_t ep_u = static_cast<std::uint64_t>(episode_index);

  const Stream env_init = warmup_mode ? Stream::WarmupEnvInit : Stream::EnvInit;
  const Stream env_step = warmup_mode ? Stream::WarmupEnvStep : Stream::EnvStep;
  const Stream select = warmup_mode ? Stream::WarmupPlannerSelect : Stream::PlannerSelect;
  const Stream roll = warmup_mode ? Stream::WarmupPlannerRollout : Stream::PlannerRollout;

  Rng env_init_rng = make_rng(config_.master_seed, env_init, {run_u, ep_u});
  FactoryModel env(config_.factory, new_factory(config_.factory, env_init_rng));
  Rng env_step_rng = make_rng(config_.master_seed, env_step, {run_u, ep_u});

  const PlannerBudget budget = config_.budget();
  const TrainerConfig trainer = config_.effective_trainer();
  const int n = config_.factory.agent_count;
  const ZeroOracle zero_oracle;
  const bool use_net = !warmup_mode && config_.evade_enabled && net_.has_value();
  std::optional<NetOracle> net_oracle;
  if (use_net) {
    net_oracle.emplace(*net_);
  }
  const ValueOracle& oracle = use_net ? static_cast<const ValueOracle&>(*net_oracle)
                                      : static_cast<const ValueOracle&>(zero_oracle);

  double loss_sum = 0.0;
  int loss_count = 0;
  FeatureVector features = env.encode();

  for (int step = 0; step < config_.factory.episode_length; ++step) {
    const std::uint64_t step_u = static_cast<std::uint64_t>(step);
    std::vector<Rng> select_rngs;
    select_rngs.reserve(static_cast<std::size_t>(n));
    for (int agent = 0; agent < n; ++agent) {
      select_rngs.emplace_back(make_rng(config_.master_seed, select,
                                        {run_u, ep_u, step_u, static_cast<std::uint64_t>(agent)}));
    }

    std::vector<int> joint;
    if (config_.algorithm == Algorithm::Dice) {
      Rng rollout_rng = make_rng(config_.master_seed, roll, {run_u, ep_u, step_u, 0});
      joint = dice_decide(env, budget, config_.gamma, oracle, config_.bandit_update_mode,
                          select_rngs, rollout_rng);
    } else {
      std::vector<Rng> rollout_rngs;
      rollout_rngs.reserve(static_cast<std::size_t>(n));
      for (int agent = 0; agent < n; ++agent) {
        rollout_rngs.emplace_back(make_rng(config_.master_seed, roll,
                                           {run_u, ep_u, step_u, static_cast<std::uint64_t>(agent)}));
      }
      joint = doolp_decide(env, budget, config_.gamma, oracle, config_.bandit_update_mode,
                           select_rngs, rollout_rngs);
    }

    const StepOutcome outcome = env.step(joint, env_step_rng);
    FeatureVector next_features = env.encode();

    ExperienceSample sample;
    sample.state_features = std::move(features);
    sample.joint_action = joint;
    sample.next_state_features = next_features;
    sample.reward = outcome.reward;
    sample.terminal = outcome.terminal;
    replay_.push(std::move(sample));
    features = std::move(next_features);

    if (trace != nullptr) {
      const FactoryState& s = env.state();
      TraceStep record;
      record.t = s.t;
      record.joint_action = joint;
      record.reward = outcome.reward;
      record.complete = s.complete_count;
      record.tasks = s.unprocessed_tasks();
      record.cost_total = s.cost_total;
      record.tpen_total = s.tpen_total;
      record.score = score(s);
      trace->push_back(std::move(record));
    }

    if (use_net && replay_.size() >= trainer.warmup_samples) {
      for (int k = 0; k < trainer.gradient_steps_per_env_step; ++k) {
        const auto batch =
            replay_.sample_batch(replay_rng_, static_cast<std::size_t>(trainer.minibatch_size));
        loss_sum += net_->train_minibatch(batch, trainer);
        ++loss_count;
      }
    }

    if (outcome.terminal) {
      break;
    }
    if (warmup_mode && replay_.size() >= warmup_target) {
      break;
    }
  }

  EpisodeRecord record;
  record.run = run_;
  record.episode = episode_index;
  record.final_score = score(env.state());
  record.completion = completion_rate(env.state());
  record.length = env.state().t;
  record.mean_td_loss =
      loss_count > 0 ? loss_sum / loss_count : std::numeric_limits<double>::quiet_NaN();
  record.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t_start).count();
  return record;
}

void warmup_replay(ReplayBuffer& buffer, const ExperimentConfig& config, int run_index,
                   std::size_t sample_count) {
  ExperimentConfig warm = config;
  warm.evade_enabled = false;
  RunSession session(warm, run_index);
  session.warmup(sample_count);
  for (std::size_t i = 0; i < session.replay().size(); ++i) {
    buffer.push(session.replay().at(i));
  }
}

std::vector<EpisodeAggregate> aggregate_records(const std::vector<EpisodeRecord>& records,
                                                int runs, int episodes) {
  std::vector<EpisodeAggregate> out;
  out.reserve(static_cast<std::size_t>(episodes));
  auto record_at = [&](int run, int episode) -> const EpisodeRecord& {
    return records[static_cast<std::size_t>(run) * episodes + episode];
  };
  for (int e = 0; e < episodes; ++e) {
    EpisodeAggregate agg;
    agg.episode = e;
    double score_sum = 0.0, completion_sum = 0.0;
    for (int r = 0; r < runs; ++r) {
      score_sum += record_at(r, e).final_score;
      completion_sum += record_at(r, e).completion;
    }
    agg.score_mean = score_sum / runs;
    agg.completion_mean = completion_sum / runs;
    if (runs > 1) {
      double score_ss = 0.0, completion_ss = 0.0;
      for (int r = 0; r < runs; ++r) {
        const double ds = record_at(r, e).final_score - agg.score_mean;
        const double dc = record_at(r, e).completion - agg.completion_mean;
        score_ss += ds * ds;
        completion_ss += dc * dc;
      }
      const double norm = 1.96 / std::sqrt(static_cast<double>(runs));
      agg.score_ci95 = norm * std::sqrt(score_ss / (runs - 1));
      agg.completion_ci95 = norm * std::sqrt(completion_ss / (runs - 1));
    }
    out.push_back(agg);
  }
  // Running mean over a truncated window of the last 5 episode means.
  for (int e = 0; e < episodes; ++e) {
    const int lo = std::max(0, e - 4);
    double score_sum = 0.0, completion_sum = 0.0;
    for (int k = lo; k <= e; ++k) {
      score_sum += out[static_cast<std::size_t>(k)].score_mean;
      completion_sum += out[static_cast<std::size_t>(k)].completion_mean;
    }
    out[static_cast<std::size_t>(e)].score_running_mean = score_sum / (e - lo + 1);
    out[static_cast<std::size_t>(e)].completion_running_mean = completion_sum / (e - lo + 1);
  }
  return out;
}

namespace {

json episode_record_json(const EpisodeRecord& r) {
  json j;
  j["type"] = "episode";
  j["run"] = r.run;
  j["episode"] = r.episode;
  j["score"] = r.final_score;
  j["completion"] = r.completion;
  j["length"] = r.length;
  if (std::isnan(r.mean_td_loss)) {
    j["td_loss"] = nullptr;
  } else {
    j["td_loss"] = r.mean_td_loss;
  }
  return j;
}

std::string resolve_out_dir(const ExperimentConfig& config) {
  if (!config.out_dir.empty()) {
    return config.out_dir;
  }
  if (const char* env = std::getenv("EVADE_OUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "evade_out";
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* progress) {
  config.validate();
  const std::string out_dir = resolve_out_dir(config);
  std::filesystem::create_directories(out_dir);

  ExperimentResult result;
  result.episodes_path = out_dir + "/episodes.jsonl";
  result.aggregate_path = out_dir + "/aggregate.jsonl";
  const std::string timing_path = out_dir + "/timing.log";

  std::ofstream episodes_out(result.episodes_path, std::ios::trunc);
  std::ofstream timing_out(timing_path, std::ios::trunc);
  if (!episodes_out || !timing_out) {
    throw ConfigError("cannot write to output directory: " + out_dir);
  }
  const std::string header_config = config_to_json(config);
  episodes_out << R"({"type":"header","kind":"episodes","config":)" << header_config << "}\n";
  episodes_out.flush();

  const int runs = config.runs;
  const int episodes = config.episodes;
  std::vector<std::vector<EpisodeRecord>> per_run(static_cast<std::size_t>(runs));
  std::vector<bool> done(static_cast<std::size_t>(runs), false);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<int> next_run{0};
  std::exception_ptr failure;

  auto worker = [&]() {
    for (;;) {
      const int run = next_run.fetch_add(1);
      if (run >= runs) {
        return;
      }
      try {
        RunSession session(config, run);
        if (config.evade_enabled) {
          session.warmup(config.trainer.warmup_samples);
        }
        std::vector<EpisodeRecord> records;
        records.reserve(static_cast<std::size_t>(episodes));
        for (int e = 0; e < episodes; ++e) {
          records.push_back(session.run_episode(e));
        }
        std::lock_guard lock(mu);
        per_run[static_cast<std::size_t>(run)] = std::move(records);
        done[static_cast<std::size_t>(run)] = true;
        cv.notify_all();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) {
          failure = std::current_exception();
        }
        done[static_cast<std::size_t>(run)] = true;
        cv.notify_all();
      }
    }
  };

  int thread_count = config.threads > 0 ? config.threads
                                        : static_cast<int>(std::thread::hardware_concurrency());
  thread_count = std::max(1, std::min(thread_count, runs));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(thread_count));
  for (int i = 0; i < thread_count; ++i) {
    pool.emplace_back(worker);
  }

  // Stream finished runs to disk in run order.
  for (int run = 0; run < runs; ++run) {
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return done[static_cast<std::size_t>(run)]; });
      if (failure) {
        break;
      }
    }
    double total_ms = 0.0;
    for (const auto& record : per_run[static_cast<std::size_t>(run)]) {
      episodes_out << episode_record_json(record).dump() << '\n';
      timing_out << "run " << record.run << " episode " << record.episode
                 << " wall_ms " << record.wall_ms << '\n';
      total_ms += record.wall_ms;
    }
    episodes_out.flush();
    timing_out.flush();
    if (progress != nullptr) {
      (*progress) << "run " << (run + 1) << "/" << runs << " done ("
                  << static_cast<long>(total_ms) << " ms)\n";
      progress->flush();
    }
  }
  for (auto& t : pool) {
    t.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }

  for (int run = 0; run < runs; ++run) {
    for (const auto& record : per_run[static_cast<std::size_t>(run)]) {
      result.records.push_back(record);
    }
  }
  result.aggregates = aggregate_records(result.records, runs, episodes);

  std::ofstream aggregate_out(result.aggregate_path, std::ios::trunc);
  aggregate_out << R"({"type":"header","kind":"aggregate","config":)" << header_config << "}\n";
  for (const auto& agg : result.aggregates) {
    json j;
    j["type"] = "aggregate";
    j["episode"] = agg.episode;
    j["score_mean"] = agg.score_mean;
    j["score_running_mean"] = agg.score_running_mean;
    j["score_ci95"] = agg.score_ci95;
    j["completion_mean"] = agg.completion_mean;
    j["completion_running_mean"] = agg.completion_running_mean;
    j["completion_ci95"] = agg.completion_ci95;
    aggregate_out << j.dump() << '\n';
  }
  return result;
}

double final_window_mean_completion(const ExperimentResult& result, int window) {
  const int episodes = static_cast<int>(result.aggregates.size());
  const int lo = std::max(0, episodes - window);
  double sum = 0.0;
  for (int e = lo; e < episodes; ++e) {
    sum += result.aggregates[static_cast<std::size_t>(e)].completion_mean;
  }
  return sum / std::max(1, episodes - lo);
}

double final_window_mean_score(const ExperimentResult& result, int window) {
  const int episodes = static_cast<int>(result.aggregates.size());
  const int lo = std::max(0, episodes - window);
  double sum = 0.0;
  for (int e = lo; e < episodes; ++e) {
    sum += result.aggregates[static_cast<std::size_t>(e)].score_mean;
  }
  return sum / std::max(1, episodes - lo);
}

}  // namespace evade
