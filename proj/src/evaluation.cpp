#include "planprobe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "planprobe/checkpoint.hpp"
#include "planprobe/rollout.hpp"

namespace planprobe::evaluation {

std::size_t horizon_of(double theta, double gamma) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("horizon_of: theta must lie in (0,1)");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw DomainError("horizon_of: gamma must lie in (0,1); undecayed heads have no finite horizon");
  return static_cast<std::size_t>(std::ceil(std::log(theta) / std::log(gamma)));
}

std::vector<std::uint8_t> window_truth(std::span<const std::uint8_t> events, std::size_t horizon) {
  std::vector<std::uint8_t> truth(events.size(), 0);
  std::size_t next = std::numeric_limits<std::size_t>::max();
  for (std::size_t s = events.size(); s-- > 0;) {
    if (events[s]) next = s;
    truth[s] = next != std::numeric_limits<std::size_t>::max() && next - s < horizon;
  }
  return truth;
}

double Confusion::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
double Confusion::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
double Confusion::f1() const {
  if (undefined()) return 0.0;
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

Confusion confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("confusion: prediction/truth length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] && truth[i]) ++c.tp;
    else if (predicted[i]) ++c.fp;
    else if (truth[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Confusion confusion(std::span<const ScoredTrack> tracks, double theta, std::size_t horizon) {
  Confusion total;
  for (const auto& tr : tracks) {
    if (tr.scores.size() != tr.events.size()) throw ShapeError("confusion: scores/events length mismatch");
    const auto truth = window_truth(tr.events, horizon);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool p = tr.scores[i] > theta;
      if (p && truth[i]) ++total.tp;
      else if (p) ++total.fp;
      else if (truth[i]) ++total.fn;
      else ++total.tn;
    }
  }
  return total;
}

namespace {

bool has_event(std::span<const ScoredTrack> tracks) {
  for (const auto& t : tracks)
    if (std::ranges::any_of(t.events, [](auto x) { return x != 0; })) return true;
  return false;
}

}  // namespace

ThresholdReport select_threshold(const std::string& head, std::span<const ScoredTrack> heldout,
                                 std::span<const ScoredTrack> evaluation, double gamma, std::size_t quantiles) {
  if (!has_event(heldout)) throw DataError("select_threshold: no positive events in the held-out split for " + head);
  std::vector<double> pool;
  for (const auto& t : heldout) pool.insert(pool.end(), t.scores.begin(), t.scores.end());
  std::ranges::sort(pool);
  std::vector<double> candidates;
  const std::size_t q = std::max<std::size_t>(quantiles, 1);
  for (std::size_t i = 0; i <= q; ++i) {
    const double v = pool[static_cast<std::size_t>(static_cast<double>(i) / static_cast<double>(q) *
                                                   static_cast<double>(pool.size() - 1))];
    if (v > 0.0 && v < 1.0) candidates.push_back(v);
  }
  if (candidates.empty()) candidates.push_back(0.5);
  std::ranges::sort(candidates, std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  ThresholdReport best;
  best.head = head;
  best.heldout_f1 = -1.0;
  for (double theta : candidates) {
    const std::size_t h = horizon_of(theta, gamma);
    const double f = confusion(heldout, theta, h).f1();
    if (f > best.heldout_f1) {
      best.heldout_f1 = f;
      best.theta = theta;
      best.horizon = h;
    }
  }
  const Confusion c = confusion(evaluation, best.theta, best.horizon);
  best.precision = c.precision();
  best.recall = c.recall();
  best.f1 = c.f1();
  const std::size_t frames = c.tp + c.fp + c.fn + c.tn;
  best.prior_rate = frames ? static_cast<double>(c.tp + c.fn) / static_cast<double>(frames) : 0.0;
  best.baseline_f1 = 2.0 * best.prior_rate / (1.0 + best.prior_rate);
  return best;
}

double LeadTimeDensity::median() const {
  if (lead_times.empty()) return std::nan("");
  auto v = lead_times;
  std::ranges::sort(v);
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

LeadTimeDensity leadtime_density(std::span<const ScoredTrack> tracks, double theta, double gamma,
                                 std::size_t debounce, std::size_t bins) {
  const std::size_t horizon = horizon_of(theta, gamma);
  LeadTimeDensity out;
  for (const auto& tr : tracks) {
    if (tr.scores.size() != tr.events.size()) throw ShapeError("leadtime: scores/events length mismatch");
    const std::size_t n = tr.scores.size();
    std::vector<std::pair<std::size_t, std::size_t>> runs;  // [start, end)
    for (std::size_t s = 0; s < n;) {
      if (!(tr.scores[s] > theta)) {
        ++s;
        continue;
      }
      std::size_t e = s;
      while (e < n && tr.scores[e] > theta) ++e;
      if (e - s >= debounce) runs.emplace_back(s, e);
      s = e;
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (!tr.events[t]) continue;
      const std::size_t lands = t + 1;
      const std::size_t lo = lands > horizon ? lands - horizon : 0;  // correct predictions: [lo, t]
      bool matched = false;
      for (const auto& [s, e] : runs) {
        if (s <= t && e > lo) {
          out.lead_times.push_back(static_cast<double>(std::min(lands - s, horizon)));
          matched = true;
          break;
        }
      }
      if (!matched) ++out.unmatched;
    }
  }
  const std::size_t nb = std::max<std::size_t>(bins, 1);
  out.bin_counts.assign(nb, 0.0);
  for (std::size_t b = 0; b <= nb; ++b)
    out.bin_edges.push_back(static_cast<double>(horizon) * static_cast<double>(b) / static_cast<double>(nb));
  for (double l : out.lead_times) {
    auto b = horizon == 0 ? 0 : static_cast<std::size_t>(l / static_cast<double>(horizon) * static_cast<double>(nb));
    out.bin_counts[std::min(b, nb - 1)] += 1.0;
  }
  return out;
}

double brier_score(std::span<const std::vector<double>> curves, std::span<const double> outcomes) {
  if (curves.size() != outcomes.size()) throw ShapeError("brier_score: one outcome per curve required");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < curves.size(); ++i)
    for (double p : curves[i]) {
      sum += (p - outcomes[i]) * (p - outcomes[i]);
      ++n;
    }
  if (n == 0) throw DataError("brier_score: no frames");
  return sum / static_cast<double>(n);
}

double mean_abs_deviation(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b) {
  if (a.size() != b.size()) throw ShapeError("mean_abs_deviation: replay count mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) throw ShapeError("mean_abs_deviation: curve length mismatch");
    for (std::size_t t = 0; t < a[i].size(); ++t) {
      sum += std::abs(a[i][t] - b[i][t]);
      ++n;
    }
  }
  if (n == 0) throw DataError("mean_abs_deviation: no frames");
  return sum / static_cast<double>(n);
}

std::vector<WinCurves> winprob_replay(const std::vector<std::filesystem::path>& checkpoints,
                                      std::span<const persistence::Replay> replays) {
  std::vector<WinCurves> out;
  for (const auto& path : checkpoints) {
    auto loaded = persistence::load_model(path);
    const AgentModel& model = *loaded.model;
    std::optional<std::size_t> win;
    for (std::size_t k = 0; k < model.probes.size(); ++k)
      if (model.probes.spec(k).kind == probes::ProbeKind::Win) win = k;
    if (!win) throw CompatibilityError("winprob_replay: " + path.string() + " has no win head");
    WinCurves wc;
    wc.version = loaded.meta.model_version;
    for (const auto& r : replays) {
      const auto tf = rollout::teacher_force(model, loaded.config.env, r);
      std::vector<double> curve(tf.probe_outputs.cols());
      for (std::size_t t = 0; t < curve.size(); ++t) curve[t] = tf.probe_outputs(*win, t);
      wc.curves.push_back(std::move(curve));
    }
    out.push_back(std::move(wc));
  }
  return out;
}

std::vector<ScoredTrack> head_tracks(const AgentModel& model, std::size_t head,
                                     std::span<const EpisodeScores> episodes) {
  const auto& spec = model.probes.spec(head);
  std::vector<ScoredTrack> out;
  for (const auto& ep : episodes) {
    ScoredTrack tr;
    const std::size_t n = ep.events.size();
    if (ep.probe_outputs.cols() != n) throw ShapeError("head_tracks: outputs/events length mismatch");
    tr.scores.resize(n);
    tr.events.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      tr.scores[t] = ep.probe_outputs(head, t);
      tr.events[t] = probes::event_value(spec, ep.events[t]) > 0.0;
    }
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<ScoredTrack> tower_tracks(const AgentModel& model, std::span<const EpisodeScores> episodes) {
  std::vector<ScoredTrack> out;
  for (std::size_t k = 0; k < model.probes.size(); ++k)
    if (model.probes.spec(k).target == probes::ProbeTarget::TowerDestroyed) {
      auto t = head_tracks(model, k, episodes);
      std::ranges::move(t, std::back_inserter(out));
    }
  return out;
}

const HeadEvaluation* CheckpointEvaluation::find(const std::string& head) const {
  for (const auto& h : heads)
    if (h.report.head == head) return &h;
  return nullptr;
}

CheckpointEvaluation evaluate_checkpoint(const AgentModel& model, const env::EnvConfig& env,
                                         const ProbeEvalConfig& config) {
  auto play = [&](std::size_t count, std::uint64_t stream) {
    std::vector<EpisodeScores> out;
    std::size_t wins = 0;
    for (std::size_t i = 0; i < count; ++i) {
      rollout::EpisodeOptions opts;
      auto trace = rollout::run_episode(model, env, derive_seed(config.seed, stream + 2 * i),
                                        derive_seed(config.seed, stream + 2 * i + 1), opts);
      wins += trace.outcome == env::Outcome::Win;
      out.push_back({std::move(trace.probe_outputs), trace.events()});
    }
    return std::pair{std::move(out), wins};
  };
  auto [heldout, heldout_wins] = play(config.heldout_episodes, 1'000'000);
  auto [evaluation, eval_wins] = play(config.episodes, 3'000'000);

  CheckpointEvaluation result;
  result.version = model.version;
  result.win_rate = config.episodes ? static_cast<double>(eval_wins) / static_cast<double>(config.episodes) : 0.0;

  auto evaluate = [&](const std::string& name, double gamma, const std::vector<ScoredTrack>& ho,
                      const std::vector<ScoredTrack>& ev) {
    if (!has_event(ho)) return;  // head never fires on this policy's held-out games
    HeadEvaluation h;
    h.report = select_threshold(name, ho, ev, gamma);
    h.leads = leadtime_density(ev, h.report.theta, gamma, config.debounce, config.histogram_bins);
    result.heads.push_back(std::move(h));
  };
  std::optional<double> tower_gamma;
  for (std::size_t k = 0; k < model.probes.size(); ++k) {
    const auto& spec = model.probes.spec(k);
    if (spec.kind != probes::ProbeKind::Milestone || !(spec.gamma < 1.0)) continue;
    if (spec.target == probes::ProbeTarget::TowerDestroyed) tower_gamma = spec.gamma;
    evaluate(spec.name, spec.gamma, head_tracks(model, k, heldout), head_tracks(model, k, evaluation));
  }
  if (tower_gamma)
    evaluate(kPooledTowerHead, *tower_gamma, tower_tracks(model, heldout), tower_tracks(model, evaluation));
  return result;
}

}  // namespace planprobe::evaluation
