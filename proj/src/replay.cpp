#include "planprobe/replay.hpp"

#include <sstream>

#include "planprobe/config.hpp"
#include "planprobe/error.hpp"

namespace planprobe::persistence {

using nlohmann::json;

bool operator==(const ReplayHeader& a, const ReplayHeader& b) {
  return a.schema_version == b.schema_version && env_to_json(a.env) == env_to_json(b.env) && a.seed == b.seed &&
         a.model_version == b.model_version && a.full_obs == b.full_obs && a.probe_heads == b.probe_heads;
}

json header_to_json(const ReplayHeader& h) {
  return {{"schema", kReplaySchema},     {"schema_version", h.schema_version}, {"env", env_to_json(h.env)},
          {"seed", h.seed},              {"model_version", h.model_version},   {"full_obs", h.full_obs},
          {"probe_heads", h.probe_heads}};
}

json frame_to_json(const ReplayFrame& f) {
  const auto& e = f.events;
  json j = {
      {"frame", f.frame},
      {"obs_digest", f.obs_digest},
      {"action", f.action},
      {"rewards", {{"gold", e.gold_gain}, {"kill_reward", e.kill_reward}, {"death_penalty", e.death_penalty}}},
      {"events",
       {{"reach_region", e.reach_region},
        {"tower_destroyed", e.tower_destroyed},
        {"base_destroyed", e.base_destroyed},
        {"own_base_attacked", e.own_base_attacked},
        {"kill", e.kill},
        {"death", e.death},
        {"win", e.win}}},
  };
  if (f.probes) j["probes"] = *f.probes;
  if (f.win_prob) j["win_prob"] = *f.win_prob;
  if (f.obs)
    j["obs"] = {{"numeric", f.obs->numeric}, {"slot_type", f.obs->slot_type}, {"slot_present", f.obs->slot_present}};
  return j;
}

std::string header_line(const ReplayHeader& h) { return header_to_json(h).dump(); }
std::string frame_line(const ReplayFrame& f) { return frame_to_json(f).dump(); }

ReplayWriter::ReplayWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw DataError("replay: cannot open " + path.string() + " for writing");
}

void ReplayWriter::write_header(const ReplayHeader& header) {
  if (header_written_) throw UsageError("replay: header already written");
  out_ << header_line(header) << '\n';
  header_written_ = true;
}

void ReplayWriter::append_frame(const ReplayFrame& frame) {
  if (!header_written_) throw UsageError("replay: frame appended before header");
  if (last_frame_ && frame.frame <= *last_frame_)
    throw UsageError("replay: frame " + std::to_string(frame.frame) + " does not follow " +
                     std::to_string(*last_frame_));
  last_frame_ = frame.frame;
  out_ << frame_line(frame) << '\n';
}

void ReplayWriter::close() {
  out_.flush();
  if (!out_) throw DataError("replay: write failed");
  out_.close();
}

std::string encode_replay(const Replay& replay) {
  std::string out = header_line(replay.header) + "\n";
  for (const auto& f : replay.frames) out += frame_line(f) + "\n";
  return out;
}

void write_replay(const std::filesystem::path& path, const Replay& replay) {
  ReplayWriter w(path);
  w.write_header(replay.header);
  for (const auto& f : replay.frames) w.append_frame(f);
  w.close();
}

namespace {

class LineError : public DataError {
 public:
  LineError(std::size_t line, const std::string& what)
      : DataError("replay line " + std::to_string(line) + ": " + what) {}
};

template <class T>
T field(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw LineError(line, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw LineError(line, std::string("bad value for '") + key + "'");
  }
}

ReplayHeader parse_header(const json& j) {
  if (!j.is_object() || j.value("schema", std::string()) != kReplaySchema)
    throw LineError(1, "not a replay header (schema must be 'planprobe.replay')");
  ReplayHeader h;
  h.schema_version = field<std::string>(j, "schema_version", 1);
  int major = 0;
  try {
    major = std::stoi(h.schema_version.substr(0, h.schema_version.find('.')));
  } catch (const std::exception&) {
    throw LineError(1, "unparseable schema_version '" + h.schema_version + "'");
  }
  if (major > kReplaySchemaMajor)
    throw CompatibilityError("replay schema " + h.schema_version + " is newer than supported " +
                             std::to_string(kReplaySchemaMajor) + ".x");
  if (major < 1) throw LineError(1, "unsupported schema_version '" + h.schema_version + "'");
  try {
    h.env = run_config_from_json(json{{"env", field<json>(j, "env", 1)}}).env;
  } catch (const ConfigError& e) {
    throw LineError(1, std::string("env: ") + e.what());
  }
  h.seed = field<std::uint64_t>(j, "seed", 1);
  h.model_version = field<std::uint64_t>(j, "model_version", 1);
  h.full_obs = field<bool>(j, "full_obs", 1);
  if (j.contains("probe_heads")) h.probe_heads = field<std::vector<std::string>>(j, "probe_heads", 1);
  return h;
}

ReplayFrame parse_frame(const json& j, std::size_t line) {
  if (!j.is_object()) throw LineError(line, "frame record must be an object");
  ReplayFrame f;
  f.frame = field<std::uint32_t>(j, "frame", line);
  f.obs_digest = field<std::string>(j, "obs_digest", line);
  f.action = field<int>(j, "action", line);
  const auto rewards = field<json>(j, "rewards", line);
  f.events.gold_gain = field<double>(rewards, "gold", line);
  f.events.kill_reward = field<double>(rewards, "kill_reward", line);
  f.events.death_penalty = field<double>(rewards, "death_penalty", line);
  const auto ev = field<json>(j, "events", line);
  f.events.reach_region = field<std::vector<std::uint8_t>>(ev, "reach_region", line);
  f.events.tower_destroyed = field<std::vector<std::uint8_t>>(ev, "tower_destroyed", line);
  f.events.base_destroyed = field<std::uint8_t>(ev, "base_destroyed", line);
  f.events.own_base_attacked = field<std::uint8_t>(ev, "own_base_attacked", line);
  f.events.kill = field<std::uint8_t>(ev, "kill", line);
  f.events.death = field<std::uint8_t>(ev, "death", line);
  f.events.win = field<std::uint8_t>(ev, "win", line);
  if (j.contains("probes")) f.probes = field<std::vector<double>>(j, "probes", line);
  if (j.contains("win_prob")) f.win_prob = field<double>(j, "win_prob", line);
  if (j.contains("obs")) {
    const auto o = field<json>(j, "obs", line);
    agent::EncodedObs obs;
    obs.numeric = field<std::vector<double>>(o, "numeric", line);
    obs.slot_type = field<std::vector<std::uint32_t>>(o, "slot_type", line);
    obs.slot_present = field<std::vector<double>>(o, "slot_present", line);
    f.obs = std::move(obs);
  }
  return f;
}

}  // namespace

Replay decode_replay(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  Replay replay;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw LineError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!have_header) {
      if (line_no != 1) throw LineError(line_no, "header must be the first line");
      replay.header = parse_header(j);
      have_header = true;
      continue;
    }
    auto f = parse_frame(j, line_no);
    if (!replay.frames.empty() && f.frame <= replay.frames.back().frame)
      throw LineError(line_no, "frame index " + std::to_string(f.frame) + " not greater than " +
                                   std::to_string(replay.frames.back().frame));
    if (replay.header.full_obs && !f.obs) throw LineError(line_no, "full_obs replay frame without obs");
    if (f.probes && f.probes->size() != replay.header.probe_heads.size())
      throw LineError(line_no, "probe output count does not match header");
    replay.frames.push_back(std::move(f));
  }
  if (!have_header) throw LineError(1, "missing header");
  return replay;
}

Replay load_replay(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("replay: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_replay(ss.str());
}

}  // namespace planprobe::persistence
