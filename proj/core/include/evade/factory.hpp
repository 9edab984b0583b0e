#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "evade/mmdp.hpp"
#include "evade/rng.hpp"

namespace evade {

inline constexpr int kGridSize = 5;
inline constexpr int kGridCells = kGridSize * kGridSize;
inline constexpr int kMachineTypes = 15;
inline constexpr int kFactoryActions = 6;
inline constexpr int kFeaturePlanes = 35;
inline constexpr int kFeatureCount = kGridCells * kFeaturePlanes;

/// Individual agent actions. Moves that would leave the grid act as NoOp.
enum class FactoryAction : int {
  North = 0,
  South = 1,
  West = 2,
  East = 3,
  Enqueue = 4,
  NoOp = 5,
};

/// 5x5 grid of machines; every one of the 15 types appears at least once,
/// so 10 types appear twice.
struct MachineGrid {
  std::array<int, kGridCells> cell_type{};

  int type_at(int row, int col) const { return cell_type[static_cast<std::size_t>(row) * kGridSize + col]; }
  void validate() const;

  bool operator==(const MachineGrid&) const = default;
};

/// Deterministic default layout: the multiset {0..14} plus types 0..9 taken
/// round-robin, Fisher-Yates shuffled across the 25 cells with a seeded
/// stream (independent of any standard-library distribution).
MachineGrid generate_layout(std::uint64_t seed);

/// Ordered buckets of machine-type tasks. Only buckets[0] is workable;
/// emptied buckets are dropped immediately.
struct TaskBuckets {
  std::vector<std::vector<int>> buckets;

  bool empty() const { return buckets.empty(); }
  int total() const;
  bool first_contains(int machine_type) const;
  /// Removes machine_type from the first bucket. Drops the bucket when it
  /// empties. Returns false when the type is not a first-bucket task.
  bool remove_first(int machine_type);

  bool operator==(const TaskBuckets&) const = default;
};

struct AgentState {
  int id = 0;
  int row = 0;
  int col = 0;
  TaskBuckets tasks;
  bool enqueued = false;

  int cell() const { return row * kGridSize + col; }

  bool operator==(const AgentState&) const = default;
};

struct FactoryConfig {
  int agent_count = 4;
  int episode_length = 50;
  double machine_failure_prob = 0.1;
  double processing_cost = 0.25;
  double step_penalty = 0.1;
  std::uint64_t layout_seed = 0;
  std::optional<std::array<int, kGridCells>> layout;  // explicit layout wins

  MachineGrid make_grid() const;
  void validate() const;

  bool operator==(const FactoryConfig&) const = default;
};

struct FactoryState {
  MachineGrid grid;
  std::vector<AgentState> agents;
  std::array<std::vector<int>, kGridCells> queues;  // FIFO of agent ids
  int t = 0;
  double cost_total = 0.0;
  double tpen_total = 0.0;
  std::vector<std::uint8_t> complete;  // indexed by agent id
  int complete_count = 0;

  int agent_count() const { return static_cast<int>(agents.size()); }
  int active_count() const { return agent_count() - complete_count; }
  bool is_complete(int agent_id) const { return complete[static_cast<std::size_t>(agent_id)] != 0; }
  /// Total unprocessed tasks over all buckets of all active agents.
  int unprocessed_tasks() const;

  bool operator==(const FactoryState&) const = default;
};

/// Fresh factory: agents placed uniformly (overlaps allowed), two buckets of
/// two distinct machine types each, empty queues, zeroed score components.
FactoryState new_factory(const FactoryConfig& config, Rng& rng);

/// score_t = |complete| - tasks_t - cost_t - tpen_t.
double score(const FactoryState& state);

/// Fraction of agents whose items are complete.
double completion_rate(const FactoryState& state);

/// Advances the state by one joint step: action phase (ascending agent id),
/// machine phase (row-major cells, one Bernoulli success draw per non-empty
/// queue), penalty phase, reward = score delta. Terminal once t reaches the
/// episode length or no active agents remain.
StepOutcome factory_step(FactoryState& state, std::span<const int> joint_action,
                         const FactoryConfig& config, Rng& rng);

/// 5x5x35 feature stack, plane-major layout (plane, row, col):
///   0      machine type scaled to [0,1] (type/14)
///   1..4   active-agent counts split by (first-bucket machine here?) x (enqueued?)
///   5..19  count of active agents whose first bucket holds type m
///   20..34 same for the second bucket
struct FeaturePlanes {
  std::array<double, kFeatureCount> values{};

  double& at(int plane, int row, int col) {
    return values[(static_cast<std::size_t>(plane) * kGridSize + row) * kGridSize + col];
  }
  double at(int plane, int row, int col) const {
    return values[(static_cast<std::size_t>(plane) * kGridSize + row) * kGridSize + col];
  }

  static constexpr int agent_state_plane(bool needed_here, bool enqueued) {
    return 1 + (needed_here ? 0 : 2) + (enqueued ? 0 : 1);
  }
  static constexpr int first_bucket_plane(int machine_type) { return 5 + machine_type; }
  static constexpr int second_bucket_plane(int machine_type) { return 20 + machine_type; }

  FeatureVector flatten() const { return FeatureVector(values.begin(), values.end()); }
};

FeaturePlanes encode_features(const FactoryState& state);

/// Generative-model adapter over a factory state snapshot. clone() yields an
/// independent sandbox; the harness drives the live environment through the
/// same interface with its own rng stream.
class FactoryModel final : public GenerativeModel {
 public:
  FactoryModel(FactoryConfig config, FactoryState state);

  std::unique_ptr<GenerativeModel> clone() const override;
  StepOutcome step(std::span<const int> joint_action, Rng& rng) override;
  FeatureVector encode() const override;
  int agent_count() const override { return state_.agent_count(); }
  int action_count() const override { return kFactoryActions; }

  const FactoryState& state() const { return state_; }
  void reset(FactoryState state) { state_ = std::move(state); }
  const FactoryConfig& config() const { return config_; }

 private:
  FactoryConfig config_;
  FactoryState state_;
};

}  // namespace evade
