#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "planprobe/env.hpp"
#include "planprobe/policy.hpp"

namespace planprobe::persistence {

inline constexpr const char* kReplaySchema = "planprobe.replay";
inline constexpr int kReplaySchemaMajor = 1;
inline constexpr int kReplaySchemaMinor = 0;

struct ReplayHeader {
  std::string schema_version = "1.0";
  env::EnvConfig env;
  std::uint64_t seed = 0;  // environment seed of the episode
  std::uint64_t model_version = 0;
  bool full_obs = false;
  std::vector<std::string> probe_heads;  // column names of `probes`

  friend bool operator==(const ReplayHeader& a, const ReplayHeader& b);
};

struct ReplayFrame {
  std::uint32_t frame = 0;
  std::string obs_digest;
  env::Action action = 0;
  env::FrameEvents events;
  std::optional<std::vector<double>> probes;
  std::optional<double> win_prob;
  std::optional<agent::EncodedObs> obs;

  friend bool operator==(const ReplayFrame&, const ReplayFrame&) = default;
};

struct Replay {
  ReplayHeader header;
  std::vector<ReplayFrame> frames;
};

nlohmann::json header_to_json(const ReplayHeader& h);
nlohmann::json frame_to_json(const ReplayFrame& f);
std::string header_line(const ReplayHeader& h);
std::string frame_line(const ReplayFrame& f);

/// Appends frames to a JSON Lines file; the header must come first and frame
/// indices must strictly increase.
class ReplayWriter {
 public:
  explicit ReplayWriter(const std::filesystem::path& path);

  void write_header(const ReplayHeader& header);
  void append_frame(const ReplayFrame& frame);
  void close();

 private:
  std::ofstream out_;
  bool header_written_ = false;
  std::optional<std::uint32_t> last_frame_;
};

void write_replay(const std::filesystem::path& path, const Replay& replay);
std::string encode_replay(const Replay& replay);

/// Parses a whole replay. Malformed lines raise DataError naming the 1-based
/// line; a newer schema major raises CompatibilityError.
Replay decode_replay(const std::string& text);
Replay load_replay(const std::filesystem::path& path);

}  // namespace planprobe::persistence
