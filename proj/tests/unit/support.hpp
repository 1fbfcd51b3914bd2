#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "planprobe/config.hpp"

namespace planprobe::fixtures {

/// Small networks so unit tests run in milliseconds.
inline RunConfig tiny_config(std::uint64_t seed = 3) {
  RunConfig c;
  c.seed = seed;
  c.policy.encoder_width = 8;
  c.policy.hidden_size = 8;
  c.policy.embedding_dim = 4;
  c.probes.hidden_width = 6;
  c.slicing.num_envs = 2;
  c.ppo.minibatches = 2;
  c.ppo.epochs = 1;
  c.train.steps = 2;
  c.train.checkpoint_every = 1;
  return c;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

/// Fresh directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("planprobe_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace planprobe::fixtures
