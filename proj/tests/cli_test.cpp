#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "../tools/cli.hpp"
#include "evade/harness.hpp"
#include "evade/replay.hpp"
#include "evade/serialization.hpp"

using namespace evade;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("evade_cli_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("usage errors exit nonzero") {
  CHECK(cli_main({"evade"}) != 0);                                   // missing subcommand
  CHECK(cli_main({"evade", "run", "--horizon", "0"}) != 0);          // invalid value
  CHECK(cli_main({"evade", "run", "--bogus-flag", "3"}) != 0);       // unknown flag
  CHECK(cli_main({"evade", "run", "--evade", "maybe"}) != 0);        // bad enum
  CHECK(cli_main({"evade", "frobnicate"}) != 0);                     // unknown subcommand
  CHECK(cli_main({"evade", "run", "--config", "/no/such/file"}) != 0);
}

TEST_CASE("layout generation writes a loadable 25-cell grid") {
  TempDir dir("layout");
  const std::string out = (dir.path / "layout.txt").string();
  CHECK(cli_main({"evade", "layout", "--seed", "4", "--out", out}) == 0);

  std::ifstream in(out);
  const MachineGrid grid = load_layout(in);
  CHECK_NOTHROW(grid.validate());

  // Round trip through --file.
  const std::string copy = (dir.path / "copy.txt").string();
  CHECK(cli_main({"evade", "layout", "--file", out, "--out", copy}) == 0);
  std::ifstream copied(copy);
  CHECK(load_layout(copied) == grid);
}

TEST_CASE("gradcheck subcommand verifies the desk network") {
  CHECK(cli_main({"evade", "gradcheck", "--net", "desk"}) == 0);
}

TEST_CASE("oracle subcommand runs value iteration") {
  CHECK(cli_main({"evade", "oracle", "--states", "4", "--actions", "2", "--gamma", "0.9"}) == 0);
}

TEST_CASE("warmup subcommand saves a loadable replay dump") {
  TempDir dir("warmup");
  const std::string out = (dir.path / "replay.bin").string();
  CHECK(cli_main({"evade", "warmup", "--agents", "1", "--horizon", "2", "--budget", "8",
                  "--samples", "40", "--out", out}) == 0);

  std::ifstream in(out, std::ios::binary);
  ReplayBuffer buffer(10000);
  load_replay(in, buffer);
  CHECK(buffer.size() == 40);
}

TEST_CASE("run subcommand produces metric files and honors overrides") {
  TempDir dir("run");
  const std::string config_path = (dir.path / "config.json").string();
  {
    ExperimentConfig config;
    config.evade_enabled = false;
    config.horizon = 2;
    config.n_budget = 8;
    config.episodes = 2;
    config.runs = 1;
    config.factory.agent_count = 1;
    config.factory.episode_length = 5;
    std::ofstream(config_path) << config_to_json(config);
  }
  const std::string out = (dir.path / "out").string();
  CHECK(cli_main({"evade", "run", "--config", config_path, "--runs", "2", "--seed", "9",
                  "--out", out}) == 0);
  CHECK(fs::exists(fs::path(out) / "episodes.jsonl"));
  CHECK(fs::exists(fs::path(out) / "aggregate.jsonl"));

  // The --runs flag overrode the config file.
  std::ifstream episodes(fs::path(out) / "episodes.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(episodes, line)) {
    ++lines;
  }
  CHECK(lines == 1 + 2 * 2);  // header + runs * episodes
}
