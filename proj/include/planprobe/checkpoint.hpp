#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "planprobe/config.hpp"
#include "planprobe/error.hpp"
#include "planprobe/model.hpp"

namespace planprobe::persistence {

enum class CheckpointErrc {
  BadMagic,
  UnsupportedVersion,
  Truncated,
  ShapeInconsistent,
  Integrity,
  UnknownTensor,
  MissingTensor,
  EnvMismatch,
  Io,
};

const char* to_string(CheckpointErrc code);

class CheckpointError : public DataError {
 public:
  CheckpointError(CheckpointErrc code, const std::string& what)
      : DataError(std::string("checkpoint ") + to_string(code) + ": " + what), code_(code) {}
  CheckpointErrc code() const noexcept { return code_; }

 private:
  CheckpointErrc code_;
};

inline constexpr char kCheckpointMagic[4] = {'P', 'P', 'R', 'B'};
inline constexpr std::uint8_t kCheckpointFormatVersion = 1;

enum class DType : std::uint8_t { F32 = 1, F64 = 2 };

struct TensorRecord {
  std::string name;
  DType dtype = DType::F64;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;  // f32 tensors hold widened floats

  friend bool operator==(const TensorRecord&, const TensorRecord&) = default;
};

struct CheckpointMeta {
  std::uint64_t model_version = 0;
  std::uint64_t env_hash = 0;
  std::uint64_t step_count = 0;
  bool f32_downcast = false;
  std::string config_json;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
  CheckpointMeta meta;
  std::vector<TensorRecord> tensors;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Layout, all little-endian:
///   "PPRB" u8:format_version
///   u64:model_version u64:env_hash u64:step_count u8:flags
///   u32:config_len config_json u32:tensor_count
///   u32:crc32(header bytes so far)
///   per tensor: u64:record_len u32:crc32(record_len)
///               record = u16:name_len name u8:dtype u8:ndim u64[ndim]:dims values
///               u32:crc32(record)
/// The length carries its own checksum so a flipped byte anywhere in the
/// tensor table reads as an integrity failure, not as truncation.
std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Snapshot of every model parameter with the resolved run config embedded.
Checkpoint checkpoint_from_model(AgentModel& model, const RunConfig& config, std::uint64_t step_count,
                                 bool f32_downcast = false);

/// Copies tensors into an already-shaped model. Unknown, missing, or
/// misshapen tensors are rejected.
void load_into_model(const Checkpoint& checkpoint, AgentModel& model);

struct LoadedModel {
  RunConfig config;
  CheckpointMeta meta;
  std::unique_ptr<AgentModel> model;
};

/// Rebuilds the model from the embedded config, then loads the tensors. When
/// `expected_env_hash` is set, a differing hash is an EnvMismatch error.
LoadedModel load_model(const std::filesystem::path& path,
                       std::optional<std::uint64_t> expected_env_hash = std::nullopt);
LoadedModel load_model(const Checkpoint& checkpoint, std::optional<std::uint64_t> expected_env_hash = std::nullopt);

void save_model(const std::filesystem::path& path, AgentModel& model, const RunConfig& config,
                std::uint64_t step_count, bool f32_downcast = false);

/// `ckpt_<version>.pprb` files in `dir`, ordered by version.
std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path& dir);
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t version);

}  // namespace planprobe::persistence
