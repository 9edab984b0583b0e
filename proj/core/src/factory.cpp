#include "evade/factory.hpp"

#include <algorithm>
#include <numeric>

#include "evade/errors.hpp"

namespace evade {

void MachineGrid::validate() const {
  std::array<int, kMachineTypes> seen{};
  for (int type : cell_type) {
    if (type < 0 || type >= kMachineTypes) {
      throw ValidationError("machine type outside 0..14");
    }
    ++seen[static_cast<std::size_t>(type)];
  }
  for (int type = 0; type < kMachineTypes; ++type) {
    if (seen[static_cast<std::size_t>(type)] == 0) {
      throw ValidationError("grid layout missing machine type " + std::to_string(type));
    }
  }
}

MachineGrid generate_layout(std::uint64_t seed) {
  MachineGrid grid;
  // {0..14} plus round-robin duplicates 0..9 fills the 25 cells.
  for (int i = 0; i < kMachineTypes; ++i) {
    grid.cell_type[static_cast<std::size_t>(i)] = i;
  }
  for (int i = 0; i < kGridCells - kMachineTypes; ++i) {
    grid.cell_type[static_cast<std::size_t>(kMachineTypes + i)] = i % kMachineTypes;
  }
  Rng rng = make_rng(seed, Stream::LayoutShuffle);
  for (int i = kGridCells - 1; i > 0; --i) {
    const auto j = uniform_below(rng, static_cast<std::uint64_t>(i) + 1);
    std::swap(grid.cell_type[static_cast<std::size_t>(i)], grid.cell_type[j]);
  }
  return grid;
}

int TaskBuckets::total() const {
  int sum = 0;
  for (const auto& bucket : buckets) {
    sum += static_cast<int>(bucket.size());
  }
  return sum;
}

bool TaskBuckets::first_contains(int machine_type) const {
  if (buckets.empty()) {
    return false;
  }
  const auto& first = buckets.front();
  return std::find(first.begin(), first.end(), machine_type) != first.end();
}

bool TaskBuckets::remove_first(int machine_type) {
  if (buckets.empty()) {
    return false;
  }
  auto& first = buckets.front();
  auto it = std::find(first.begin(), first.end(), machine_type);
  if (it == first.end()) {
    return false;
  }
  first.erase(it);
  if (first.empty()) {
    buckets.erase(buckets.begin());
  }
  return true;
}

MachineGrid FactoryConfig::make_grid() const {
  MachineGrid grid;
  if (layout.has_value()) {
    grid.cell_type = *layout;
  } else {
    grid = generate_layout(layout_seed);
  }
  grid.validate();
  return grid;
}

void FactoryConfig::validate() const {
  if (agent_count < 1) {
    throw ConfigError("agent_count must be >= 1");
  }
  if (episode_length < 1) {
    throw ConfigError("episode_length must be >= 1");
  }
  if (machine_failure_prob < 0.0 || machine_failure_prob > 1.0) {
    throw ConfigError("machine_failure_prob must lie in [0, 1]");
  }
  if (processing_cost < 0.0 || step_penalty < 0.0) {
    throw ConfigError("costs must be non-negative");
  }
  make_grid();  // throws ValidationError on bad explicit layouts
}

int FactoryState::unprocessed_tasks() const {
  int sum = 0;
  for (const auto& agent : agents) {
    if (!is_complete(agent.id)) {
      sum += agent.tasks.total();
    }
  }
  return sum;
}

namespace {

// Two distinct machine types with a fixed draw count (no rejection loops).
std::vector<int> draw_bucket(Rng& rng) {
  const int first = static_cast<int>(uniform_below(rng, kMachineTypes));
  int second = static_cast<int>(uniform_below(rng, kMachineTypes - 1));
  if (second >= first) {
    ++second;
  }
  return {first, second};
}

}  // namespace

FactoryState new_factory(const FactoryConfig& config, Rng& rng) {
  config.validate();
  FactoryState state;
  state.grid = config.make_grid();
  state.agents.reserve(static_cast<std::size_t>(config.agent_count));
  for (int id = 0; id < config.agent_count; ++id) {
    AgentState agent;
    agent.id = id;
    const int cell = static_cast<int>(uniform_below(rng, kGridCells));
    agent.row = cell / kGridSize;
    agent.col = cell % kGridSize;
    agent.tasks.buckets.push_back(draw_bucket(rng));
    agent.tasks.buckets.push_back(draw_bucket(rng));
    state.agents.push_back(std::move(agent));
  }
  state.complete.assign(static_cast<std::size_t>(config.agent_count), 0);
  return state;
}

double score(const FactoryState& state) {
  return static_cast<double>(state.complete_count) - state.unprocessed_tasks() -
         state.cost_total - state.tpen_total;
}

double completion_rate(const FactoryState& state) {
  return static_cast<double>(state.complete_count) / state.agent_count();
}

StepOutcome factory_step(FactoryState& state, std::span<const int> joint_action,
                         const FactoryConfig& config, Rng& rng) {
  if (std::ssize(joint_action) != state.agent_count()) {
    throw ContractViolation("joint action length does not match agent count");
  }
  const double before = score(state);

  // Action phase, ascending agent id. Enqueued and complete agents are inert.
  for (auto& agent : state.agents) {
    if (state.is_complete(agent.id) || agent.enqueued) {
      continue;
    }
    const int raw = joint_action[static_cast<std::size_t>(agent.id)];
    if (raw < 0 || raw >= kFactoryActions) {
      throw ContractViolation("action id outside 0..5");
    }
    switch (static_cast<FactoryAction>(raw)) {
      case FactoryAction::North:
        agent.row = std::max(0, agent.row - 1);
        break;
      case FactoryAction::South:
        agent.row = std::min(kGridSize - 1, agent.row + 1);
        break;
      case FactoryAction::West:
        agent.col = std::max(0, agent.col - 1);
        break;
      case FactoryAction::East:
        agent.col = std::min(kGridSize - 1, agent.col + 1);
        break;
      case FactoryAction::Enqueue:
        state.queues[static_cast<std::size_t>(agent.cell())].push_back(agent.id);
        agent.enqueued = true;
        break;
      case FactoryAction::NoOp:
        break;
    }
  }

  // Machine phase, row-major. One processing attempt per non-empty queue;
  // on failure the head agent keeps its slot and no cost is charged.
  for (int cell = 0; cell < kGridCells; ++cell) {
    auto& queue = state.queues[static_cast<std::size_t>(cell)];
    if (queue.empty()) {
      continue;
    }
    if (bernoulli(rng, config.machine_failure_prob)) {
      continue;
    }
    const int agent_id = queue.front();
    queue.erase(queue.begin());
    auto& agent = state.agents[static_cast<std::size_t>(agent_id)];
    agent.enqueued = false;
    state.cost_total += config.processing_cost;
    const int machine_type = state.grid.cell_type[static_cast<std::size_t>(cell)];
    if (agent.tasks.remove_first(machine_type) && agent.tasks.empty()) {
      state.complete[static_cast<std::size_t>(agent_id)] = 1;
      ++state.complete_count;
    }
  }

  // Penalty phase: every still-incomplete item costs 0.1 this step.
  state.tpen_total += config.step_penalty * state.active_count();

  state.t += 1;
  StepOutcome outcome;
  outcome.reward = score(state) - before;
  outcome.terminal = state.t >= config.episode_length || state.active_count() == 0;
  return outcome;
}

FeaturePlanes encode_features(const FactoryState& state) {
  FeaturePlanes planes;
  for (int row = 0; row < kGridSize; ++row) {
    for (int col = 0; col < kGridSize; ++col) {
      planes.at(0, row, col) =
          static_cast<double>(state.grid.type_at(row, col)) / (kMachineTypes - 1);
    }
  }
  for (const auto& agent : state.agents) {
    if (state.is_complete(agent.id)) {
      continue;
    }
    const int here = state.grid.type_at(agent.row, agent.col);
    const bool needed = agent.tasks.first_contains(here);
    planes.at(FeaturePlanes::agent_state_plane(needed, agent.enqueued), agent.row,
              agent.col) += 1.0;
    const auto& buckets = agent.tasks.buckets;
    if (!buckets.empty()) {
      for (int type : buckets[0]) {
        planes.at(FeaturePlanes::first_bucket_plane(type), agent.row, agent.col) += 1.0;
      }
    }
    if (buckets.size() > 1) {
      for (int type : buckets[1]) {
        planes.at(FeaturePlanes::second_bucket_plane(type), agent.row, agent.col) += 1.0;
      }
    }
  }
  return planes;
}

FactoryModel::FactoryModel(FactoryConfig config, FactoryState state)
    : config_(std::move(config)), state_(std::move(state)) {}

std::unique_ptr<GenerativeModel> FactoryModel::clone() const {
  return std::make_unique<FactoryModel>(config_, state_);
}

StepOutcome FactoryModel::step(std::span<const int> joint_action, Rng& rng) {
  return factory_step(state_, joint_action, config_, rng);
}

FeatureVector FactoryModel::encode() const {
  return encode_features(state_).flatten();
}

}  // namespace evade
