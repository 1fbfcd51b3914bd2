#include "planprobe/policy.hpp"

#include <cmath>
#include <cstring>
#include <cstdio>

namespace planprobe::agent {

namespace {
constexpr std::size_t kSlotNumeric = 5;  // present, rel_x, rel_y, hp, vulnerable
constexpr std::size_t kScalarBase = 8;
}  // namespace

EncodedObs encode_observation(const env::Observation& obs, const env::EnvConfig& config) {
  EncodedObs e;
  const double g1 = static_cast<double>(config.grid_size - 1);
  e.numeric = {
      obs.agent_x / g1,
      obs.agent_y / g1,
      obs.agent_hp,
      0.1 * obs.gold,
      obs.alive ? 1.0 : 0.0,
      static_cast<double>(obs.respawn_timer) / config.respawn_delay,
      static_cast<double>(obs.frame_index) / config.max_episode_len,
      obs.own_base_hp,
  };
  e.numeric.insert(e.numeric.end(), obs.cooldowns.begin(), obs.cooldowns.end());
  for (const auto& r : obs.entities) {
    e.numeric.insert(e.numeric.end(),
                     {r.present ? 1.0 : 0.0, r.rel_x, r.rel_y, r.hp, r.vulnerable ? 1.0 : 0.0});
    e.slot_type.push_back(r.type_id);
    e.slot_present.push_back(r.present ? 1.0 : 0.0);
  }
  return e;
}

std::string observation_digest(const EncodedObs& obs) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(obs.numeric.data(), obs.numeric.size() * sizeof(double));
  mix(obs.slot_type.data(), obs.slot_type.size() * sizeof(std::uint32_t));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PolicyNet::PolicyNet(const env::EnvConfig& env_config, const PolicyConfig& config, std::uint64_t seed) {
  num_abilities_ = env_config.abilities.size();
  num_slots_ = static_cast<std::size_t>(env_config.num_towers) + 1 + env::kEnemyCreepSlots +
               env::kAllyCreepSlots;
  numeric_size_ = kScalarBase + num_abilities_ + num_slots_ * kSlotNumeric;
  const std::size_t in = numeric_size_ + num_slots_ * config.embedding_dim;

  embedding = nn::Embedding("embedding", env::kNumEntityTypes + num_abilities_, config.embedding_dim);
  enc1 = nn::Dense("encoder.0", in, config.encoder_width);
  enc2 = nn::Dense("encoder.1", config.encoder_width, config.encoder_width);
  lstm = nn::LstmCell("lstm", config.encoder_width, config.hidden_size);
  primitive_head = nn::Dense("policy.primitive", config.hidden_size, num_primitive_);
  ability_proj = nn::Dense("policy.ability_proj", config.hidden_size, config.embedding_dim);
  ability_bias = nn::Param("policy.ability_bias", num_abilities_, 1);
  value_head = nn::Dense("value", config.hidden_size, 1);

  Rng rng(seed);
  embedding.init_orthogonal(rng, config.embedding_init_norm);
  enc1.init_uniform(rng);
  enc2.init_uniform(rng);
  lstm.init_uniform(rng);
  primitive_head.init_zero();
  ability_proj.init_zero();
  value_head.init_zero();
}

nn::ParamList PolicyNet::params() {
  nn::ParamList p{&embedding.table};
  for (auto* x : enc1.params()) p.push_back(x);
  for (auto* x : enc2.params()) p.push_back(x);
  for (auto* x : lstm.params()) p.push_back(x);
  for (auto* x : primitive_head.params()) p.push_back(x);
  for (auto* x : ability_proj.params()) p.push_back(x);
  p.push_back(&ability_bias);
  for (auto* x : value_head.params()) p.push_back(x);
  return p;
}

PolicyStep PolicyNet::forward(std::span<const EncodedObs* const> batch, const nn::LstmState& state,
                              PolicyStepCache* cache) const {
  const std::size_t bsz = batch.size();
  const std::size_t dim = embedding.dim();
  Matrix input(input_size(), bsz);
  for (std::size_t b = 0; b < bsz; ++b) {
    const EncodedObs& o = *batch[b];
    if (o.numeric.size() != numeric_size_ || o.slot_type.size() != num_slots_)
      throw ShapeError("policy: observation has " + std::to_string(o.numeric.size()) +
                       " numeric features / " + std::to_string(o.slot_type.size()) +
                       " slots, expected " + std::to_string(numeric_size_) + " / " +
                       std::to_string(num_slots_));
    auto col = input.col(b);
    std::copy(o.numeric.begin(), o.numeric.end(), col.begin());
    for (std::size_t s = 0; s < num_slots_; ++s) {
      if (o.slot_present[s] == 0.0) continue;
      const auto row = embedding.lookup(o.slot_type[s]);
      for (std::size_t d = 0; d < dim; ++d) col[numeric_size_ + s * dim + d] = o.slot_present[s] * row[d];
    }
  }

  Matrix e1 = enc1.forward(input);
  nn::tanh_inplace(e1);
  Matrix e2 = enc2.forward(e1);
  nn::tanh_inplace(e2);

  PolicyStep out;
  out.state = lstm.forward(e2, state, cache ? &cache->lstm : nullptr);
  const Matrix& h = out.state.h;

  const Matrix prim = primitive_head.forward(h);
  const Matrix query = ability_proj.forward(h);
  out.logits = Matrix(num_actions(), bsz);
  for (std::size_t b = 0; b < bsz; ++b) {
    for (std::size_t a = 0; a < num_primitive_; ++a) out.logits(a, b) = prim(a, b);
    for (std::size_t a = 0; a < num_abilities_; ++a)
      out.logits(num_primitive_ + a, b) =
          dot(embedding.lookup(ability_row(a)), query.col(b)) + ability_bias.value[a];
  }
  out.probs = nn::softmax_columns(out.logits);
  out.value = value_head.forward(h);
  nn::require_finite(out.logits, "policy logits");
  nn::require_finite(out.value, "value estimate");

  if (cache) {
    cache->slot_types.clear();
    cache->slot_present.clear();
    for (const EncodedObs* o : batch) {
      cache->slot_types.insert(cache->slot_types.end(), o->slot_type.begin(), o->slot_type.end());
      cache->slot_present.insert(cache->slot_present.end(), o->slot_present.begin(), o->slot_present.end());
    }
    cache->input = std::move(input);
    cache->enc1 = std::move(e1);
    cache->enc2 = std::move(e2);
    cache->h = h;
    cache->ability_query = query;
  }
  return out;
}

PolicyStep PolicyNet::forward(const EncodedObs& obs, const nn::LstmState& state) const {
  const EncodedObs* ptr = &obs;
  return forward(std::span<const EncodedObs* const>(&ptr, 1), state);
}

nn::LstmState PolicyNet::backward(const PolicyStepCache& cache, const Matrix& dlogits,
                                  const Matrix& dvalue, const Matrix& dh_next, const Matrix& dc_next) {
  const std::size_t bsz = cache.h.cols();
  const std::size_t dim = embedding.dim();
  if (dlogits.rows() != num_actions() || dlogits.cols() != bsz)
    throw ShapeError("policy backward: dlogits " + dlogits.shape_string());

  Matrix dprim(num_primitive_, bsz);
  Matrix dquery(dim, bsz);
  std::vector<double> scaled(dim);
  for (std::size_t b = 0; b < bsz; ++b) {
    for (std::size_t a = 0; a < num_primitive_; ++a) dprim(a, b) = dlogits(a, b);
    const auto query = cache.ability_query.col(b);
    for (std::size_t a = 0; a < num_abilities_; ++a) {
      const double g = dlogits(num_primitive_ + a, b);
      if (g == 0.0) continue;
      ability_bias.grad[a] += g;
      axpy(dquery.col(b), embedding.lookup(ability_row(a)), g);
      for (std::size_t d = 0; d < dim; ++d) scaled[d] = g * query[d];
      embedding.accumulate(ability_row(a), scaled);
    }
  }

  Matrix dh = dh_next;
  {
    const Matrix a = primitive_head.backward(cache.h, dprim);
    const Matrix q = ability_proj.backward(cache.h, dquery);
    const Matrix v = value_head.backward(cache.h, dvalue);
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += a[i] + q[i] + v[i];
  }

  Matrix de2;
  nn::LstmState dprev;
  lstm.backward(cache.lstm, dh, dc_next, de2, dprev);

  for (std::size_t i = 0; i < de2.size(); ++i) de2[i] *= 1.0 - cache.enc2[i] * cache.enc2[i];
  Matrix de1 = enc2.backward(cache.enc1, de2);
  for (std::size_t i = 0; i < de1.size(); ++i) de1[i] *= 1.0 - cache.enc1[i] * cache.enc1[i];
  const Matrix dinput = enc1.backward(cache.input, de1);

  for (std::size_t b = 0; b < bsz; ++b) {
    const auto col = dinput.col(b);
    for (std::size_t s = 0; s < num_slots_; ++s) {
      const double present = cache.slot_present[b * num_slots_ + s];
      if (present == 0.0) continue;
      std::vector<double> g(col.begin() + static_cast<std::ptrdiff_t>(numeric_size_ + s * dim),
                            col.begin() + static_cast<std::ptrdiff_t>(numeric_size_ + (s + 1) * dim));
      for (double& v : g) v *= present;
      embedding.accumulate(cache.slot_types[b * num_slots_ + s], g);
    }
  }
  return dprev;
}

std::vector<double> entropy_columns(const Matrix& probs) {
  std::vector<double> out(probs.cols(), 0.0);
  for (std::size_t b = 0; b < probs.cols(); ++b)
    for (double p : probs.col(b))
      if (p > 0.0) out[b] -= p * std::log(p);
  return out;
}

}  // namespace planprobe::agent
