#include "planprobe/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <zlib.h>

#include "planprobe/trainer.hpp"

namespace planprobe::persistence {

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes a little-endian host");

const char* to_string(CheckpointErrc code) {
  switch (code) {
    case CheckpointErrc::BadMagic: return "bad-magic";
    case CheckpointErrc::UnsupportedVersion: return "unsupported-version";
    case CheckpointErrc::Truncated: return "truncated";
    case CheckpointErrc::ShapeInconsistent: return "shape-inconsistent";
    case CheckpointErrc::Integrity: return "integrity";
    case CheckpointErrc::UnknownTensor: return "unknown-tensor";
    case CheckpointErrc::MissingTensor: return "missing-tensor";
    case CheckpointErrc::EnvMismatch: return "env-mismatch";
    case CheckpointErrc::Io: return "io";
  }
  return "unknown";
}

namespace {

std::uint32_t crc32_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

class Writer {
 public:
  template <class T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_bytes(std::string_view s) { out_.append(s); }
  std::size_t size() const { return out_.size(); }
  std::string_view since(std::size_t pos) const { return std::string_view(out_).substr(pos); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view get_bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  std::string_view span(std::size_t from) const { return in_.substr(from, pos_ - from); }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n)
      throw CheckpointError(CheckpointErrc::Truncated, std::string("file ends inside ") + what + " at byte " +
                                                           std::to_string(pos_));
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::uint64_t element_count(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
  Writer w;
  w.put_bytes(std::string_view(kCheckpointMagic, 4));
  w.put<std::uint8_t>(kCheckpointFormatVersion);
  w.put<std::uint64_t>(ck.meta.model_version);
  w.put<std::uint64_t>(ck.meta.env_hash);
  w.put<std::uint64_t>(ck.meta.step_count);
  w.put<std::uint8_t>(ck.meta.f32_downcast ? 1 : 0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.meta.config_json.size()));
  w.put_bytes(ck.meta.config_json);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.tensors.size()));
  w.put<std::uint32_t>(crc32_of(w.since(0)));
  for (const auto& t : ck.tensors) {
    if (t.name.empty() || t.name.size() > 0xffff)
      throw CheckpointError(CheckpointErrc::ShapeInconsistent, "tensor name length " + std::to_string(t.name.size()));
    if (t.shape.size() > 0xff)
      throw CheckpointError(CheckpointErrc::ShapeInconsistent, t.name + ": too many dimensions");
    if (element_count(t.shape) != t.values.size())
      throw CheckpointError(CheckpointErrc::ShapeInconsistent,
                            t.name + ": shape holds " + std::to_string(element_count(t.shape)) + " values, got " +
                                std::to_string(t.values.size()));
    Writer body;
    body.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    body.put_bytes(t.name);
    body.put<std::uint8_t>(static_cast<std::uint8_t>(t.dtype));
    body.put<std::uint8_t>(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) body.put<std::uint64_t>(d);
    if (t.dtype == DType::F32)
      for (double v : t.values) body.put<float>(static_cast<float>(v));
    else
      for (double v : t.values) body.put<double>(v);
    const std::size_t start = w.size();
    w.put<std::uint64_t>(body.size());
    w.put<std::uint32_t>(crc32_of(w.since(start)));
    const std::string record = body.take();
    w.put_bytes(record);
    w.put<std::uint32_t>(crc32_of(record));
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kCheckpointMagic, 4))
    throw CheckpointError(CheckpointErrc::BadMagic, "missing PPRB signature");
  r.get_bytes(4, "magic");
  const auto version = r.get<std::uint8_t>("format version");
  if (version != kCheckpointFormatVersion)
    throw CheckpointError(CheckpointErrc::UnsupportedVersion, "format version " + std::to_string(version));

  Checkpoint ck;
  ck.meta.model_version = r.get<std::uint64_t>("metadata");
  ck.meta.env_hash = r.get<std::uint64_t>("metadata");
  ck.meta.step_count = r.get<std::uint64_t>("metadata");
  const auto flags = r.get<std::uint8_t>("metadata");
  const auto config_len = r.get<std::uint32_t>("metadata");
  ck.meta.config_json = std::string(r.get_bytes(config_len, "config"));
  const auto count = r.get<std::uint32_t>("tensor count");
  const std::uint32_t header_crc = crc32_of(r.span(0));
  if (r.get<std::uint32_t>("header checksum") != header_crc)
    throw CheckpointError(CheckpointErrc::Integrity, "header checksum mismatch");
  if (flags & ~1u) throw CheckpointError(CheckpointErrc::UnsupportedVersion, "unknown flag bits");
  ck.meta.f32_downcast = flags & 1u;

  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string where = "tensor record " + std::to_string(i);
    const std::size_t len_start = r.pos();
    const auto record_len = r.get<std::uint64_t>("tensor record length");
    const std::uint32_t len_crc = crc32_of(r.span(len_start));
    if (r.get<std::uint32_t>("tensor record length checksum") != len_crc)
      throw CheckpointError(CheckpointErrc::Integrity, "length checksum mismatch in " + where);
    if (record_len > r.remaining() || r.remaining() - record_len < 4)
      throw CheckpointError(CheckpointErrc::Truncated, where + " runs past end of file");
    const std::string_view record = r.get_bytes(static_cast<std::size_t>(record_len), "tensor record");
    if (r.get<std::uint32_t>("tensor checksum") != crc32_of(record))
      throw CheckpointError(CheckpointErrc::Integrity, "checksum mismatch in " + where);

    // The record is intact from here on; structural problems are writer bugs.
    Reader body(record);
    TensorRecord t;
    auto shape_error = [&](const std::string& what) {
      return CheckpointError(CheckpointErrc::ShapeInconsistent, where + ": " + what);
    };
    try {
      const auto name_len = body.get<std::uint16_t>("tensor name");
      t.name = std::string(body.get_bytes(name_len, "tensor name"));
      const auto dtype = body.get<std::uint8_t>("tensor dtype");
      const auto ndim = body.get<std::uint8_t>("tensor rank");
      for (std::uint8_t d = 0; d < ndim; ++d) t.shape.push_back(body.get<std::uint64_t>("tensor shape"));
      if (dtype != static_cast<std::uint8_t>(DType::F32) && dtype != static_cast<std::uint8_t>(DType::F64))
        throw shape_error("unknown dtype " + std::to_string(dtype));
      t.dtype = static_cast<DType>(dtype);
    } catch (const CheckpointError& e) {
      if (e.code() != CheckpointErrc::Truncated) throw;
      throw shape_error("record too short for its own header");
    }
    const std::size_t width = t.dtype == DType::F32 ? 4 : 8;
    std::uint64_t n = 1;
    for (auto d : t.shape) {
      if (d != 0 && n > body.remaining() / d) throw shape_error("shape '" + t.name + "' exceeds record size");
      n *= d;
    }
    if (n * width != body.remaining())
      throw shape_error("shape of '" + t.name + "' holds " + std::to_string(n) + " values but record has " +
                        std::to_string(body.remaining()) + " value bytes");
    t.values.resize(n);
    for (auto& v : t.values)
      v = t.dtype == DType::F32 ? static_cast<double>(body.get<float>("values")) : body.get<double>("values");
    ck.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0)
    throw CheckpointError(CheckpointErrc::Integrity, std::to_string(r.remaining()) + " trailing bytes");
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointErrc::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointErrc::Io, "write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

Checkpoint checkpoint_from_model(AgentModel& model, const RunConfig& config, std::uint64_t step_count,
                                 bool f32_downcast) {
  Checkpoint ck;
  ck.meta.model_version = model.version;
  ck.meta.env_hash = env_config_hash(config.env);
  ck.meta.step_count = step_count;
  ck.meta.f32_downcast = f32_downcast;
  ck.meta.config_json = to_json(config).dump();
  for (const nn::Param* p : model.all_params()) {
    TensorRecord t;
    t.name = p->name;
    t.dtype = f32_downcast ? DType::F32 : DType::F64;
    t.shape = {p->value.rows(), p->value.cols()};
    t.values.assign(p->value.values().begin(), p->value.values().end());
    if (f32_downcast)
      for (double& v : t.values) v = static_cast<double>(static_cast<float>(v));
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

void load_into_model(const Checkpoint& checkpoint, AgentModel& model) {
  std::map<std::string, nn::Param*> by_name;
  for (nn::Param* p : model.all_params()) by_name.emplace(p->name, p);
  std::map<std::string, const TensorRecord*> seen;
  for (const auto& t : checkpoint.tensors) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw CheckpointError(CheckpointErrc::UnknownTensor, "'" + t.name + "'");
    if (!seen.emplace(t.name, &t).second)
      throw CheckpointError(CheckpointErrc::ShapeInconsistent, "duplicate tensor '" + t.name + "'");
    const Matrix& v = it->second->value;
    const std::vector<std::uint64_t> want{v.rows(), v.cols()};
    if (t.shape != want)
      throw CheckpointError(CheckpointErrc::ShapeInconsistent,
                            "'" + t.name + "' stored as " + std::to_string(t.shape.size()) + "-d tensor of " +
                                std::to_string(t.values.size()) + " values, model expects " + v.shape_string());
  }
  for (const auto& [name, p] : by_name)
    if (!seen.contains(name)) throw CheckpointError(CheckpointErrc::MissingTensor, "'" + name + "'");
  for (const auto& [name, t] : seen) std::ranges::copy(t->values, by_name[name]->value.values().begin());
  model.version = checkpoint.meta.model_version;
}

LoadedModel load_model(const Checkpoint& ck, std::optional<std::uint64_t> expected_env_hash) {
  LoadedModel out;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(ck.meta.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw CompatibilityError(std::string("checkpoint: embedded config is not JSON: ") + e.what());
  }
  try {
    out.config = run_config_from_json(doc);
  } catch (const ConfigError& e) {
    throw CompatibilityError(std::string("checkpoint: embedded config rejected: ") + e.what());
  }
  if (env_config_hash(out.config.env) != ck.meta.env_hash)
    throw CheckpointError(CheckpointErrc::Integrity, "env hash does not match embedded config");
  if (expected_env_hash && *expected_env_hash != ck.meta.env_hash)
    throw CheckpointError(CheckpointErrc::EnvMismatch, "checkpoint trained on a different environment");
  out.meta = ck.meta;
  out.model = std::make_unique<AgentModel>(make_agent_model(out.config));
  load_into_model(ck, *out.model);
  return out;
}

LoadedModel load_model(const std::filesystem::path& path, std::optional<std::uint64_t> expected_env_hash) {
  return load_model(read_checkpoint(path), expected_env_hash);
}

void save_model(const std::filesystem::path& path, AgentModel& model, const RunConfig& config,
                std::uint64_t step_count, bool f32_downcast) {
  write_checkpoint(path, checkpoint_from_model(model, config, step_count, f32_downcast));
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t version) {
  char name[40];
  std::snprintf(name, sizeof name, "ckpt_%08llu.pprb", static_cast<unsigned long long>(version));
  return dir / name;
}

std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw DataError("checkpoint directory not found: " + dir.string());
  static const std::regex pattern(R"(ckpt_(\d+)\.pprb)");
  std::vector<std::pair<std::uint64_t, std::filesystem::path>> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern))
      found.emplace_back(std::stoull(m[1].str()), entry.path());
  }
  std::ranges::sort(found);
  std::vector<std::filesystem::path> out;
  for (auto& [_, p] : found) out.push_back(std::move(p));
  return out;
}

}  // namespace planprobe::persistence
