#include "planprobe/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace planprobe::agent {

void PpoConfig::validate() const {
  if (!(clip_epsilon > 0.0)) throw ConfigError("agent.clip_epsilon: must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("agent.gamma: must lie in (0,1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("agent.gae_lambda: must lie in [0,1]");
  if (epochs == 0) throw ConfigError("agent.epochs: must be >= 1");
  if (minibatches == 0) throw ConfigError("agent.minibatches: must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("agent.learning_rate: must be >= 0");
  if (bptt_horizon == 0) throw ConfigError("agent.bptt_horizon: must be >= 1");
}

double PpoMetrics::mean_probe_loss() const {
  if (probe_loss.empty()) return 0.0;
  return std::accumulate(probe_loss.begin(), probe_loss.end(), 0.0) / static_cast<double>(probe_loss.size());
}

GaeResult gae_advantages(std::span<const double> rewards, std::span<const double> values,
                         double boundary_value, double gamma, double lambda) {
  if (rewards.size() != values.size())
    throw ShapeError("gae: " + std::to_string(rewards.size()) + " rewards vs " +
                     std::to_string(values.size()) + " values");
  const std::size_t n = rewards.size();
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double next_value = boundary_value;
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
    out.value_targets[t] = running + values[t];
    next_value = values[t];
  }
  return out;
}

GaeResult gae_advantages(const slicing::Slice& slice, double gamma, double lambda) {
  std::vector<double> rewards, values;
  for (const auto& tr : slice.transitions) {
    rewards.push_back(tr.reward());
    values.push_back(tr.value);
  }
  return gae_advantages(rewards, values, slice.terminal ? 0.0 : slice.boundary_value, gamma, lambda);
}

PpoLoss ppo_loss(PolicyNet& policy, std::span<const PpoSequence> sequences, const PpoConfig& config,
                 bool accumulate_grads, probes::ProbeSet* probes) {
  PpoLoss loss;
  const std::size_t bsz = sequences.size();
  if (bsz == 0) return loss;
  std::size_t horizon = 0;
  for (const auto& s : sequences) {
    if (s.steps.empty()) throw ShapeError("ppo_loss: empty sequence");
    horizon = std::max(horizon, s.steps.size());
    loss.samples += s.steps.size();
  }
  const double inv_n = 1.0 / static_cast<double>(loss.samples);
  const std::size_t hs = policy.hidden_size();
  const std::size_t na = policy.num_actions();

  nn::LstmState state = nn::LstmState::zeros(hs, bsz);
  for (std::size_t b = 0; b < bsz; ++b) {
    require_same_shape(sequences[b].initial.h, Matrix(hs, 1), "ppo_loss carried-in state");
    std::ranges::copy(sequences[b].initial.h.col(0), state.h.col(b).begin());
    std::ranges::copy(sequences[b].initial.c.col(0), state.c.col(b).begin());
  }

  std::vector<PolicyStepCache> caches(accumulate_grads ? horizon : 0);
  std::vector<Matrix> dlogits_t, dvalue_t, dh_probe_t;
  std::vector<const EncodedObs*> obs(bsz);

  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t b = 0; b < bsz; ++b) {
      const auto& steps = sequences[b].steps;
      obs[b] = steps[std::min(t, steps.size() - 1)].obs;  // padded past the end, masked below
    }
    auto step = policy.forward(obs, state, accumulate_grads ? &caches[t] : nullptr);
    const Matrix logp = nn::log_softmax_columns(step.logits);
    Matrix dlogits(na, bsz), dvalue(1, bsz);

    std::vector<std::size_t> active;
    for (std::size_t b = 0; b < bsz; ++b) {
      if (t >= sequences[b].steps.size()) continue;
      active.push_back(b);
      const PpoSample& s = sequences[b].steps[t];
      const auto a = static_cast<std::size_t>(s.action);
      const double ratio = std::exp(logp(a, b) - s.old_log_prob);
      const double clipped = std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
      const double s1 = ratio * s.advantage;
      const double s2 = clipped * s.advantage;
      loss.policy_loss -= std::min(s1, s2);
      if (std::abs(ratio - 1.0) > config.clip_epsilon) loss.clip_fraction += 1.0;
      loss.approx_kl += s.old_log_prob - logp(a, b);

      double h_ent = 0.0;
      for (std::size_t i = 0; i < na; ++i) h_ent -= step.probs(i, b) * logp(i, b);
      loss.entropy += h_ent;
      const double v_err = step.value(0, b) - s.value_target;
      loss.value_loss += v_err * v_err;

      if (!accumulate_grads) continue;
      const double dlogp = s1 <= s2 ? -ratio * s.advantage : 0.0;
      for (std::size_t i = 0; i < na; ++i) {
        const double p = step.probs(i, b);
        double g = dlogp * ((i == a ? 1.0 : 0.0) - p);
        g += config.entropy_coef * p * (logp(i, b) + h_ent);
        dlogits(i, b) = g * inv_n;
      }
      dvalue(0, b) = 2.0 * config.value_coef * v_err * inv_n;
    }

    if (probes) {
      // Flow-through probe supervision on the active columns of h.
      Matrix h(hs, active.size()), labels(probes->size(), active.size());
      for (std::size_t j = 0; j < active.size(); ++j) {
        const auto& s = sequences[active[j]].steps[t];
        if (s.probe_labels.size() != probes->size())
          throw ShapeError("ppo_loss: probe labels missing for flow-through training");
        std::ranges::copy(step.state.h.col(active[j]), h.col(j).begin());
        std::ranges::copy(s.probe_labels, labels.col(j).begin());
      }
      const auto per_head = probes->losses(h, labels);
      const double weight = static_cast<double>(active.size()) * inv_n;
      for (double l : per_head) loss.probe_loss += l * weight;
      if (accumulate_grads) {
        // backward() averages over the active columns; `weight` rescales to 1/N.
        Matrix dh_active = probes->backward(h, labels, weight);
        Matrix dh(hs, bsz);
        for (std::size_t j = 0; j < active.size(); ++j)
          for (std::size_t k = 0; k < hs; ++k) dh(k, active[j]) = dh_active(k, j);
        dh_probe_t.push_back(std::move(dh));
      }
    }

    if (accumulate_grads) {
      dlogits_t.push_back(std::move(dlogits));
      dvalue_t.push_back(std::move(dvalue));
    }
    state = std::move(step.state);
  }

  loss.policy_loss *= inv_n;
  loss.value_loss *= inv_n;
  loss.entropy *= inv_n;
  loss.clip_fraction *= inv_n;
  loss.approx_kl *= inv_n;
  loss.total = loss.policy_loss + config.value_coef * loss.value_loss - config.entropy_coef * loss.entropy +
               loss.probe_loss;
  if (!std::isfinite(loss.total)) throw NumericError("ppo_loss: non-finite loss");

  if (accumulate_grads) {
    Matrix dh(hs, bsz), dc(hs, bsz);
    for (std::size_t t = horizon; t-- > 0;) {
      if (probes)
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh_probe_t[t][i];
      auto dprev = policy.backward(caches[t], dlogits_t[t], dvalue_t[t], dh, dc);
      dh = std::move(dprev.h);
      dc = std::move(dprev.c);
    }
    // dh/dc now hold gradients w.r.t. the carried-in states; they are
    // constants, so the values are dropped here.
  }
  return loss;
}

Matrix slice_probe_labels(const slicing::Slice& slice, const probes::ProbeSet& probes) {
  if (slice.probe_bootstraps.size() != probes.size())
    throw ShapeError("slice has " + std::to_string(slice.probe_bootstraps.size()) + " bootstraps for " +
                     std::to_string(probes.size()) + " probe heads");
  std::vector<env::FrameEvents> events;
  events.reserve(slice.size());
  for (const auto& tr : slice.transitions) events.push_back(tr.events);
  Matrix labels(probes.size(), slice.size());
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const auto y = probes::labels_for(probes.spec(k), events, slice.probe_bootstraps[k]);
    for (std::size_t t = 0; t < y.values.size(); ++t) labels(k, t) = y.values[t];
  }
  return labels;
}

PpoLearner::PpoLearner(AgentModel& model, PpoConfig ppo, ProbeTrainConfig probe, std::uint64_t seed)
    : model_(model), ppo_(ppo), probe_(probe), rng_(seed) {
  ppo_.validate();
  nn::AdamConfig pc;
  pc.learning_rate = ppo_.learning_rate;
  policy_adam_ = nn::AdamState(model_.policy_params(), pc);
  nn::AdamConfig qc;
  qc.learning_rate = probe_.learning_rate;
  probe_adam_ = nn::AdamState(model_.probe_params(), qc);
}

PpoMetrics PpoLearner::update(const slicing::SliceBatch& batch) {
  PpoMetrics metrics;
  if (batch.windows.empty()) return metrics;

  // Advantages and value targets per slice, normalized over the batch.
  std::vector<GaeResult> gae;
  gae.reserve(batch.slices.size());
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (const auto& s : batch.slices) {
    gae.push_back(gae_advantages(s, ppo_.gamma, ppo_.gae_lambda));
    for (double a : gae.back().advantages) {
      sum += a;
      sq += a * a;
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  const double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
  const double std_dev = std::max(std::sqrt(var), 1e-8);

  std::vector<Matrix> labels;
  labels.reserve(batch.slices.size());
  for (const auto& s : batch.slices) labels.push_back(slice_probe_labels(s, model_.probes));

  std::vector<PpoSequence> sequences;
  sequences.reserve(batch.windows.size());
  for (const auto& w : batch.windows) {
    const auto& slice = batch.slices[w.slice];
    PpoSequence seq;
    const auto& first = slice.transitions[w.start];
    seq.initial = {Matrix::column(first.h_before), Matrix::column(first.c_before)};
    for (std::size_t t = w.start; t < w.start + w.length; ++t) {
      const auto& tr = slice.transitions[t];
      seq.steps.push_back({&tr.obs, tr.action, tr.log_prob, (gae[w.slice].advantages[t] - mean) / std_dev,
                           gae[w.slice].value_targets[t], labels[w.slice].col(t)});
    }
    sequences.push_back(std::move(seq));
  }

  auto policy_params = model_.policy_params();
  auto probe_params = model_.probe_params();
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t groups = std::min(ppo_.minibatches, sequences.size());
  std::size_t updates = 0;

  for (std::size_t epoch = 0; epoch < ppo_.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.uniform_int(i)]);
    for (std::size_t g = 0; g < groups; ++g) {
      std::vector<PpoSequence> mb;
      for (std::size_t i = g; i < order.size(); i += groups) mb.push_back(sequences[order[i]]);
      nn::zero_grads(policy_params);
      if (probe_.flow_through) nn::zero_grads(probe_params);
      const PpoLoss l = ppo_loss(model_.policy, mb, ppo_, true, probe_.flow_through ? &model_.probes : nullptr);
      metrics.grad_norm += nn::clip_grad_norm(policy_params, ppo_.max_grad_norm);
      nn::adam_step(policy_params, policy_adam_);
      if (probe_.flow_through) nn::adam_step(probe_params, probe_adam_);
      metrics.policy_loss += l.policy_loss;
      metrics.value_loss += l.value_loss;
      metrics.entropy += l.entropy;
      metrics.clip_fraction += l.clip_fraction;
      metrics.approx_kl += l.approx_kl;
      ++updates;
    }
  }
  const double inv = 1.0 / static_cast<double>(updates);
  metrics.policy_loss *= inv;
  metrics.value_loss *= inv;
  metrics.entropy *= inv;
  metrics.clip_fraction *= inv;
  metrics.approx_kl *= inv;
  metrics.grad_norm *= inv;
  metrics.samples = batch.num_frames();

  // Stop-gradient probe training on the rollout hidden states.
  if (!probe_.flow_through && model_.probes.size() > 0) {
    const std::size_t width = model_.policy.hidden_size();
    std::vector<std::pair<std::size_t, std::size_t>> frames;
    for (std::size_t s = 0; s < batch.slices.size(); ++s)
      for (std::size_t t = 0; t < batch.slices[s].size(); ++t) frames.emplace_back(s, t);
    metrics.probe_loss.assign(model_.probes.size(), 0.0);
    std::size_t steps = 0;
    for (std::size_t epoch = 0; epoch < probe_.epochs; ++epoch) {
      for (std::size_t i = frames.size(); i > 1; --i) std::swap(frames[i - 1], frames[rng_.uniform_int(i)]);
      for (std::size_t start = 0; start < frames.size(); start += probe_.minibatch_frames) {
        const std::size_t n = std::min(probe_.minibatch_frames, frames.size() - start);
        Matrix h(width, n), y(model_.probes.size(), n);
        for (std::size_t j = 0; j < n; ++j) {
          const auto [s, t] = frames[start + j];
          std::ranges::copy(batch.slices[s].transitions[t].h, h.col(j).begin());
          std::ranges::copy(labels[s].col(t), y.col(j).begin());
        }
        const auto m = model_.probes.train_step(h, y, probe_adam_);
        for (std::size_t k = 0; k < m.head_loss.size(); ++k) metrics.probe_loss[k] += m.head_loss[k];
        ++steps;
      }
    }
    for (double& l : metrics.probe_loss) l /= static_cast<double>(std::max<std::size_t>(steps, 1));
  }
  return metrics;
}

}  // namespace planprobe::agent
