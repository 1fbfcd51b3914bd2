#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "json.hpp"
#include "planprobe/annotate.hpp"
#include "planprobe/checkpoint.hpp"
#include "planprobe/config.hpp"
#include "planprobe/error.hpp"
#include "planprobe/replay.hpp"
#include "support.hpp"

using namespace planprobe;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(PLANPROBE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json tiny_json() {
  auto doc = to_json(fixtures::tiny_config());
  doc["train"]["steps"] = 2;
  doc["train"]["checkpoint_every"] = 1;
  return doc;
}

fs::path write_config(const fs::path& dir, const json& doc) {
  std::ofstream(dir / "config.json") << doc.dump(2);
  return dir / "config.json";
}

}  // namespace

TEST(Config, UnknownKeyNamesTheKey) {
  auto doc = tiny_json();
  doc["probes"]["gamma_typo"] = 0.9;
  try {
    run_config_from_json(doc);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("probes.gamma_typo"), std::string::npos) << e.what();
  }
}

TEST(Config, RoundTripsThroughJson) {
  const auto cfg = fixtures::tiny_config(9);
  const auto back = run_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(env_config_hash(back.env), env_config_hash(cfg.env));
}

TEST(Config, PartialDocumentKeepsDefaults) {
  const auto cfg = run_config_from_json(json::parse(R"({"seed": 5, "env": {"tower_hp": 30}})"));
  EXPECT_EQ(cfg.seed, 5u);
  EXPECT_EQ(cfg.env.tower_hp, 30.0);
  EXPECT_EQ(cfg.env.grid_size, 16);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"env": {"grid_size": "big"}})")), ConfigError);
}

TEST(Config, SeedOverrideFromEnvironment) {
  RunConfig cfg;
  ::setenv("PLANPROBE_SEED", "1234", 1);
  apply_seed_override(cfg);
  ::unsetenv("PLANPROBE_SEED");
  EXPECT_EQ(cfg.seed, 1234u);
}

TEST(Cli, UnknownConfigKeyExitsTwo) {
  const auto dir = fixtures::scratch_dir("cli_badkey");
  auto doc = tiny_json();
  doc["env"]["tower_hpp"] = 3;
  const int code = run("train --config " + write_config(dir, doc).string() + " --out " + (dir / "run").string(),
                       dir / "log.txt");
  EXPECT_EQ(code, 2);
  EXPECT_NE(fixtures::slurp(dir / "log.txt").find("env.tower_hpp"), std::string::npos);
}

TEST(Cli, BadFlagExitsTwo) {
  const auto dir = fixtures::scratch_dir("cli_badflag");
  EXPECT_EQ(run("train --no-such-flag", dir / "log.txt"), 2);
}

TEST(Cli, ZeroStepsWritesOnlyVersionZero) {
  const auto dir = fixtures::scratch_dir("cli_zero");
  const auto cfg = write_config(dir, tiny_json());
  ASSERT_EQ(run("train --config " + cfg.string() + " --steps 0 --out " + (dir / "run").string(), dir / "log.txt"), 0);
  const auto list = persistence::list_checkpoints(dir / "run");
  ASSERT_EQ(list.size(), 1u);
  EXPECT_EQ(list[0].filename(), "ckpt_00000000.pprb");
  EXPECT_TRUE(fs::exists(dir / "run" / "config.resolved.json"));
}

TEST(Cli, SameSeedGivesIdenticalMetricsAndReplays) {
  const auto dir = fixtures::scratch_dir("cli_determinism");
  const auto cfg = write_config(dir, tiny_json());
  for (const char* name : {"a", "b"}) {
    const auto out = dir / name;
    ASSERT_EQ(run("train --config " + cfg.string() + " --out " + out.string(), dir / "log.txt"), 0);
    ASSERT_EQ(run("rollout --checkpoint " + (out / "ckpt_00000002.pprb").string() + " --episodes 2 --out " +
                      (out / "replays").string(),
                  dir / "log.txt"),
              0);
  }
  EXPECT_EQ(fixtures::slurp(dir / "a" / "metrics.csv"), fixtures::slurp(dir / "b" / "metrics.csv"));
  EXPECT_EQ(fixtures::slurp(dir / "a" / "ckpt_00000002.pprb"), fixtures::slurp(dir / "b" / "ckpt_00000002.pprb"));
  for (const char* r : {"replay_0000.jsonl", "replay_0001.jsonl"})
    EXPECT_EQ(fixtures::slurp(dir / "a" / "replays" / r), fixtures::slurp(dir / "b" / "replays" / r));
}

TEST(Cli, AnnotationOfGeneratingCheckpointMatchesLoggedProbes) {
  const auto dir = fixtures::scratch_dir("cli_annotate");
  const auto cfg = write_config(dir, tiny_json());
  ASSERT_EQ(run("train --config " + cfg.string() + " --out " + (dir / "run").string(), dir / "log.txt"), 0);
  const auto ckpt = dir / "run" / "ckpt_00000002.pprb";
  ASSERT_EQ(run("rollout --checkpoint " + ckpt.string() + " --episodes 1 --out " + (dir / "r").string(),
                dir / "log.txt"),
            0);
  ASSERT_EQ(run("annotate-replay --replay " + (dir / "r" / "replay_0000.jsonl").string() + " --checkpoint " +
                    ckpt.string() + " --out " + (dir / "ann").string(),
                dir / "log.txt"),
            0);
  for (const char* f : {"annotations.csv", "timeline.svg", "map.svg", "config.resolved.json"})
    EXPECT_TRUE(fs::exists(dir / "ann" / f)) << f;

  auto loaded = persistence::load_model(ckpt);
  const auto replay = persistence::load_replay(dir / "r" / "replay_0000.jsonl");
  const auto ann = annotate::annotate(*loaded.model, loaded.config.env, replay);
  ASSERT_TRUE(ann.logged_deviation.has_value());
  EXPECT_EQ(*ann.logged_deviation, 0.0);
}

TEST(Cli, ResolvedConfigCarriesToolVersion) {
  const auto dir = fixtures::scratch_dir("cli_resolved");
  ASSERT_EQ(run("grad-check --out " + (dir / "gc").string(), dir / "log.txt"), 0);
  const auto doc = json::parse(fixtures::slurp(dir / "gc" / "config.resolved.json"));
  EXPECT_EQ(doc["tool_version"], kToolVersion);
  EXPECT_EQ(doc["command"], "grad-check");
}

TEST(Cli, MissingCheckpointDirectoryExitsThree) {
  const auto dir = fixtures::scratch_dir("cli_missing");
  EXPECT_EQ(run("similarity --checkpoints " + (dir / "none").string() + " --out " + (dir / "o").string(),
                dir / "log.txt"),
            3);
}
