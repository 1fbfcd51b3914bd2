#include "planprobe/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "planprobe/error.hpp"

namespace planprobe::probes {

std::vector<ProbeHeadSpec> default_probe_specs(const env::EnvConfig& env_config, double gamma,
                                               std::size_t hidden_width) {
  std::vector<ProbeHeadSpec> specs;
  auto add = [&](std::string name, ProbeTarget target, int index, ProbeKind kind) {
    specs.push_back({std::move(name), target, index, kind, kind == ProbeKind::Win ? 1.0 : gamma, hidden_width});
  };
  for (int r = 0; r < env_config.num_regions; ++r)
    add("reach_region_" + std::to_string(r), ProbeTarget::ReachRegion, r, ProbeKind::Milestone);
  for (int k = 0; k < env_config.num_towers; ++k)
    add("tower_destroyed_" + std::to_string(k), ProbeTarget::TowerDestroyed, k, ProbeKind::Milestone);
  add("base_attacked_by_enemy", ProbeTarget::BaseAttackedByEnemy, 0, ProbeKind::Milestone);
  add("kill", ProbeTarget::Kill, 0, ProbeKind::Milestone);
  add("death", ProbeTarget::Death, 0, ProbeKind::Milestone);
  add("win", ProbeTarget::Win, 0, ProbeKind::Win);
  add("gold_sum", ProbeTarget::GoldSum, 0, ProbeKind::RewardSum);
  add("kill_reward_sum", ProbeTarget::KillRewardSum, 0, ProbeKind::RewardSum);
  return specs;
}

double event_value(const ProbeHeadSpec& spec, const env::FrameEvents& ev) {
  auto indexed = [&](const std::vector<std::uint8_t>& v) {
    const auto i = static_cast<std::size_t>(spec.index);
    if (i >= v.size()) throw ShapeError("probe " + spec.name + ": index out of range for events");
    return static_cast<double>(v[i]);
  };
  switch (spec.target) {
    case ProbeTarget::ReachRegion: return indexed(ev.reach_region);
    case ProbeTarget::TowerDestroyed: return indexed(ev.tower_destroyed);
    case ProbeTarget::BaseAttackedByEnemy: return ev.own_base_attacked;
    case ProbeTarget::Kill: return ev.kill;
    case ProbeTarget::Death: return ev.death;
    case ProbeTarget::Win: return ev.win;
    case ProbeTarget::GoldSum: return ev.gold_gain;
    case ProbeTarget::KillRewardSum: return ev.kill_reward;
  }
  return 0.0;
}

std::vector<double> event_track(const ProbeHeadSpec& spec, std::span<const env::FrameEvents> events) {
  std::vector<double> x;
  x.reserve(events.size());
  for (const auto& e : events) x.push_back(event_value(spec, e));
  return x;
}

labeling::LabelSeries labels_for(const ProbeHeadSpec& spec, std::span<const env::FrameEvents> events,
                                 double bootstrap) {
  auto x = event_track(spec, events);
  if (spec.recurrence() == labeling::Recurrence::Milestone)
    return labeling::milestone_labels({spec.name, std::move(x)}, bootstrap, spec.gamma);
  return labeling::reward_labels({spec.name, std::move(x)}, bootstrap, spec.gamma);
}

double ProbeTrainMetrics::mean_loss() const {
  if (head_loss.empty()) return 0.0;
  return std::accumulate(head_loss.begin(), head_loss.end(), 0.0) / static_cast<double>(head_loss.size());
}

ProbeSet::ProbeSet(std::vector<ProbeHeadSpec> specs, std::size_t hidden_size, std::uint64_t seed)
    : input_size_(hidden_size) {
  for (auto& s : specs) {
    if (!(s.gamma > 0.0 && s.gamma <= 1.0))
      throw ConfigError("probes." + s.name + ".gamma: must lie in (0,1]");
    ProbeHead head;
    head.hidden = nn::Dense("probe." + s.name + ".hidden", hidden_size, s.hidden_width);
    head.out = nn::Dense("probe." + s.name + ".out", s.hidden_width, 1);
    head.spec = std::move(s);
    heads_.push_back(std::move(head));
  }
  reinitialize(seed);
}

void ProbeSet::reinitialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& head : heads_) {
    head.hidden.init_uniform(rng);
    head.out.init_zero();
  }
}

std::size_t ProbeSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < heads_.size(); ++i)
    if (heads_[i].spec.name == name) return i;
  throw ConfigError("unknown probe head '" + name + "'");
}

nn::ParamList ProbeSet::params() {
  nn::ParamList p;
  for (auto& head : heads_) {
    for (auto* x : head.hidden.params()) p.push_back(x);
    for (auto* x : head.out.params()) p.push_back(x);
  }
  return p;
}

Matrix ProbeSet::forward(const Matrix& h) const {
  if (h.rows() != input_size_)
    throw ShapeError("probes: hidden state " + h.shape_string() + " vs expected width " +
                     std::to_string(input_size_));
  nn::require_finite(h, "probe input");
  Matrix out(heads_.size(), h.cols());
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    Matrix hid = heads_[k].hidden.forward(h);
    nn::tanh_inplace(hid);
    const Matrix z = heads_[k].out.forward(hid);
    for (std::size_t b = 0; b < h.cols(); ++b)
      out(k, b) = heads_[k].spec.sigmoid_output() ? nn::sigmoid(z[b]) : z[b];
  }
  nn::require_finite(out, "probe outputs");
  return out;
}

std::vector<double> ProbeSet::forward_one(std::span<const double> h) const {
  const Matrix out = forward(Matrix::column(h));
  return {out.values().begin(), out.values().end()};
}

namespace {

void check_labels(const Matrix& h, const Matrix& labels, std::size_t heads) {
  if (labels.rows() != heads || labels.cols() != h.cols())
    throw ShapeError("probes: labels " + labels.shape_string() + " vs outputs [" + std::to_string(heads) +
                     "x" + std::to_string(h.cols()) + "]");
}

}  // namespace

std::vector<double> ProbeSet::losses(const Matrix& h, const Matrix& labels) const {
  check_labels(h, labels, heads_.size());
  const Matrix out = forward(h);
  std::vector<double> loss(heads_.size(), 0.0);
  const double n = static_cast<double>(std::max<std::size_t>(h.cols(), 1));
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    double s = 0.0;
    for (std::size_t b = 0; b < h.cols(); ++b) {
      if (heads_[k].spec.sigmoid_output()) {
        s += nn::soft_binary_cross_entropy(out(k, b), labels(k, b));
      } else {
        const double d = out(k, b) - labels(k, b);
        s += d * d;
      }
    }
    loss[k] = s / n;
  }
  return loss;
}

Matrix ProbeSet::backward(const Matrix& h, const Matrix& labels, double scale) {
  check_labels(h, labels, heads_.size());
  Matrix dh(h.rows(), h.cols());
  const double n = static_cast<double>(std::max<std::size_t>(h.cols(), 1)) / scale;
  for (auto& head : heads_) {
    const std::size_t k = static_cast<std::size_t>(&head - heads_.data());
    Matrix hid = head.hidden.forward(h);
    nn::tanh_inplace(hid);
    const Matrix z = head.out.forward(hid);
    Matrix dz(1, h.cols());
    for (std::size_t b = 0; b < h.cols(); ++b) {
      const double y = labels(k, b);
      if (head.spec.sigmoid_output()) {
        const double p = nn::sigmoid(z[b]);
        // Derivative of the clamped loss: flat outside the clamp interval.
        const bool clamped = p < nn::kProbClamp || p > 1.0 - nn::kProbClamp;
        dz[b] = clamped ? 0.0 : (p - y) / n;
      } else {
        dz[b] = 2.0 * (z[b] - y) / n;
      }
    }
    Matrix dhid = head.out.backward(hid, dz);
    for (std::size_t i = 0; i < dhid.size(); ++i) dhid[i] *= 1.0 - hid[i] * hid[i];
    const Matrix dx = head.hidden.backward(h, dhid);
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dx[i];
  }
  return dh;
}

ProbeTrainMetrics ProbeSet::train_step(const Matrix& h, const Matrix& labels, nn::AdamState& adam,
                                       double max_grad_norm) {
  ProbeTrainMetrics m;
  m.head_loss = losses(h, labels);
  auto p = params();
  nn::zero_grads(p);
  backward(h, labels);
  if (max_grad_norm > 0.0) nn::clip_grad_norm(p, max_grad_norm);
  nn::adam_step(p, adam);
  return m;
}

ProbeTrainMetrics posthoc_train(ProbeSet& probes, std::span<const EpisodeHidden> corpus,
                                const PosthocConfig& config) {
  probes.reinitialize(config.seed);
  const std::size_t width = probes.input_size();

  // Flatten the corpus into frame columns with full-episode labels.
  std::size_t total = 0;
  for (const auto& ep : corpus) {
    if (ep.h.rows() != width || ep.h.cols() != ep.events.size())
      throw ShapeError("posthoc_train: episode hidden states " + ep.h.shape_string() + " vs " +
                       std::to_string(ep.events.size()) + " events");
    total += ep.events.size();
  }
  Matrix all_h(width, total);
  Matrix all_y(probes.size(), total);
  std::size_t offset = 0;
  for (const auto& ep : corpus) {
    for (std::size_t t = 0; t < ep.events.size(); ++t)
      std::ranges::copy(ep.h.col(t), all_h.col(offset + t).begin());
    for (std::size_t k = 0; k < probes.size(); ++k) {
      const auto y = labels_for(probes.spec(k), ep.events, 0.0);
      for (std::size_t t = 0; t < y.values.size(); ++t) all_y(k, offset + t) = y.values[t];
    }
    offset += ep.events.size();
  }

  ProbeTrainMetrics last;
  last.head_loss.assign(probes.size(), 0.0);
  if (total == 0) return last;

  nn::AdamConfig acfg;
  acfg.learning_rate = config.learning_rate;
  nn::AdamState adam(probes.params(), acfg);
  Rng rng(derive_seed(config.seed, 0x9057));
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = total; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
    std::vector<double> sum(probes.size(), 0.0);
    std::size_t batches = 0;
    for (std::size_t start = 0; start < total; start += config.batch_frames) {
      const std::size_t n = std::min(config.batch_frames, total - start);
      Matrix h(width, n), y(probes.size(), n);
      for (std::size_t j = 0; j < n; ++j) {
        std::ranges::copy(all_h.col(order[start + j]), h.col(j).begin());
        std::ranges::copy(all_y.col(order[start + j]), y.col(j).begin());
      }
      const auto m = probes.train_step(h, y, adam);
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += m.head_loss[k];
      ++batches;
    }
    for (std::size_t k = 0; k < sum.size(); ++k) last.head_loss[k] = sum[k] / static_cast<double>(batches);
  }
  return last;
}

}  // namespace planprobe::probes
