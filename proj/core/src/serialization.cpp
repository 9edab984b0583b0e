#include "evade/serialization.hpp"

#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "evade/errors.hpp"

namespace evade {

using nlohmann::json;

void save_layout(std::ostream& out, const MachineGrid& grid) {
  for (int row = 0; row < kGridSize; ++row) {
    for (int col = 0; col < kGridSize; ++col) {
      out << grid.type_at(row, col) << (col + 1 == kGridSize ? '\n' : ' ');
    }
  }
}

MachineGrid load_layout(std::istream& in) {
  MachineGrid grid;
  for (int i = 0; i < kGridCells; ++i) {
    if (!(in >> grid.cell_type[static_cast<std::size_t>(i)])) {
      throw ValidationError("layout needs 25 integers");
    }
  }
  grid.validate();
  return grid;
}

void write_trace(std::ostream& out, const std::vector<TraceStep>& trace) {
  for (const auto& step : trace) {
    json j;
    j["t"] = step.t;
    j["actions"] = step.joint_action;
    j["reward"] = step.reward;
    j["complete"] = step.complete;
    j["tasks"] = step.tasks;
    j["cost"] = step.cost_total;
    j["tpen"] = step.tpen_total;
    j["score"] = step.score;
    out << j.dump() << '\n';
  }
}

std::vector<TraceStep> read_trace(std::istream& in) {
  std::vector<TraceStep> trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const json j = json::parse(line);
    TraceStep step;
    step.t = j.at("t").get<int>();
    step.joint_action = j.at("actions").get<std::vector<int>>();
    step.reward = j.at("reward").get<double>();
    step.complete = j.at("complete").get<int>();
    step.tasks = j.at("tasks").get<int>();
    step.cost_total = j.at("cost").get<double>();
    step.tpen_total = j.at("tpen").get<double>();
    step.score = j.at("score").get<double>();
    trace.push_back(std::move(step));
  }
  return trace;
}

namespace {

constexpr char kReplayMagic[8] = {'E', 'V', 'R', 'E', 'P', 'L', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_doubles(std::ostream& out, const std::vector<double>& values) {
  write_u64(out, values.size());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in) {
  std::vector<double> values(read_u64(in));
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  return values;
}

void write_ints(std::ostream& out, const std::vector<int>& values) {
  write_u64(out, values.size());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(int)));
}

std::vector<int> read_ints(std::istream& in) {
  std::vector<int> values(read_u64(in));
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(int)));
  return values;
}

}  // namespace

void save_replay(std::ostream& out, const ReplayBuffer& buffer) {
  out.write(kReplayMagic, sizeof(kReplayMagic));
  write_u64(out, buffer.capacity());
  write_u64(out, buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const ExperienceSample& sample = buffer.at(i);
    write_doubles(out, sample.state_features);
    write_ints(out, sample.joint_action);
    write_doubles(out, sample.next_state_features);
    out.write(reinterpret_cast<const char*>(&sample.reward), sizeof(double));
    const std::uint8_t terminal = sample.terminal ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&terminal), sizeof(terminal));
  }
  if (!out) {
    throw ValidationError("replay write failed");
  }
}

void load_replay(std::istream& in, ReplayBuffer& buffer) {
  char magic[sizeof(kReplayMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::string_view(magic, sizeof(magic)) != std::string_view(kReplayMagic, sizeof(kReplayMagic))) {
    throw ValidationError("not a replay dump");
  }
  read_u64(in);  // capacity of the writer; the receiving buffer keeps its own
  const std::uint64_t count = read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    ExperienceSample sample;
    sample.state_features = read_doubles(in);
    sample.joint_action = read_ints(in);
    sample.next_state_features = read_doubles(in);
    in.read(reinterpret_cast<char*>(&sample.reward), sizeof(double));
    std::uint8_t terminal = 0;
    in.read(reinterpret_cast<char*>(&terminal), sizeof(terminal));
    sample.terminal = terminal != 0;
    buffer.push(std::move(sample));
  }
  if (!in) {
    throw ValidationError("truncated replay dump");
  }
}

}  // namespace evade
