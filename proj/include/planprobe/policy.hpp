#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "planprobe/env.hpp"
#include "planprobe/nn.hpp"

namespace planprobe::agent {

/// Network-ready form of an Observation: numeric features plus the entity
/// type ids whose embeddings are gathered at forward time.
struct EncodedObs {
  std::vector<double> numeric;
  std::vector<std::uint32_t> slot_type;
  std::vector<double> slot_present;

  friend bool operator==(const EncodedObs&, const EncodedObs&) = default;
};

EncodedObs encode_observation(const env::Observation& obs, const env::EnvConfig& config);

/// Hex FNV-1a digest of the encoded observation bytes.
std::string observation_digest(const EncodedObs& obs);

struct PolicyConfig {
  std::size_t encoder_width = 64;
  std::size_t hidden_size = 64;
  std::size_t embedding_dim = 16;
  double embedding_init_norm = 0.5;
};

/// Output of one policy step for a batch of B observations.
struct PolicyStep {
  Matrix logits;  // A x B
  Matrix probs;   // A x B
  Matrix value;   // 1 x B
  nn::LstmState state;
};

struct PolicyStepCache {
  std::vector<std::uint32_t> slot_types;  // slots x B, column-major
  std::vector<double> slot_present;
  Matrix input, enc1, enc2;  // post-activation encoder outputs
  nn::LstmCache lstm;
  Matrix h;
  Matrix ability_query;  // E x B projection of h
};

/// Recurrent actor-critic. Observation encoder (2 tanh layers) -> LSTM ->
/// {primitive-action logits, ability logits, value}. Ability logits are dot
/// products between a projection of h and the ability's embedding row, so
/// abilities with similar effects can develop similar embeddings.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(const env::EnvConfig& env_config, const PolicyConfig& config, std::uint64_t seed);

  std::size_t num_actions() const { return num_primitive_ + num_abilities_; }
  std::size_t num_abilities() const { return num_abilities_; }
  std::size_t hidden_size() const { return lstm.hidden_size(); }
  std::size_t input_size() const { return enc1.in_features(); }
  std::size_t numeric_size() const { return numeric_size_; }
  std::size_t num_slots() const { return num_slots_; }
  /// Embedding row holding ability `a`.
  std::size_t ability_row(std::size_t a) const { return env::kNumEntityTypes + a; }

  PolicyStep forward(std::span<const EncodedObs* const> batch, const nn::LstmState& state,
                     PolicyStepCache* cache = nullptr) const;
  PolicyStep forward(const EncodedObs& obs, const nn::LstmState& state) const;

  /// Backpropagates through one step given gradients on the logits, the
  /// value, and the outgoing recurrent state. Returns gradients on the
  /// incoming recurrent state.
  nn::LstmState backward(const PolicyStepCache& cache, const Matrix& dlogits, const Matrix& dvalue,
                         const Matrix& dh_next, const Matrix& dc_next);

  nn::ParamList params();

  nn::Embedding embedding;
  nn::Dense enc1;
  nn::Dense enc2;
  nn::LstmCell lstm;
  nn::Dense primitive_head;
  nn::Dense ability_proj;
  nn::Param ability_bias;
  nn::Dense value_head;

 private:
  std::size_t num_primitive_ = env::kNumPrimitiveActions;
  std::size_t num_abilities_ = 0;
  std::size_t numeric_size_ = 0;
  std::size_t num_slots_ = 0;
};

/// Natural-log entropy of each column of a probability matrix.
std::vector<double> entropy_columns(const Matrix& probs);

}  // namespace planprobe::agent
