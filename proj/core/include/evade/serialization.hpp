#pragma once

#include <iosfwd>
#include <vector>

#include "evade/factory.hpp"
#include "evade/replay.hpp"

namespace evade {

/// Layout text format: 25 machine types, row-major, whitespace separated
/// (written five per line).
void save_layout(std::ostream& out, const MachineGrid& grid);
MachineGrid load_layout(std::istream& in);

/// One executed environment step as recorded in an episode trace.
struct TraceStep {
  int t = 0;                      // time step after the transition
  std::vector<int> joint_action;  // action ids, 0..5 per agent
  double reward = 0.0;
  int complete = 0;               // score components after the step
  int tasks = 0;
  double cost_total = 0.0;
  double tpen_total = 0.0;
  double score = 0.0;
};

/// Trace format: one JSON record per line, fields as in TraceStep.
void write_trace(std::ostream& out, const std::vector<TraceStep>& trace);
std::vector<TraceStep> read_trace(std::istream& in);

/// Replay dump: flat binary, bit-exact round-trip (oldest sample first).
void save_replay(std::ostream& out, const ReplayBuffer& buffer);
void load_replay(std::istream& in, ReplayBuffer& buffer);

}  // namespace evade
