#include <gtest/gtest.h>

#include <cmath>

#include "planprobe/error.hpp"
#include "planprobe/labeling.hpp"
#include "planprobe/probes.hpp"
#include "planprobe/trainer.hpp"
#include "support.hpp"

using namespace planprobe;
using namespace planprobe::probes;

namespace {

ProbeHeadSpec head(std::string name, ProbeTarget target, ProbeKind kind, double gamma, std::size_t width = 8) {
  return {std::move(name), target, 0, kind, gamma, width};
}

Matrix random_h(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = std::tanh(rng.normal());
  return m;
}

}  // namespace

TEST(Probes, FreshHeadsOutputHalfAndZero) {
  const env::EnvConfig envc;
  ProbeSet set(default_probe_specs(envc, 0.995, 8), 5, 1);
  Rng rng(1);
  const Matrix out = set.forward(random_h(rng, 5, 7));
  for (std::size_t k = 0; k < set.size(); ++k)
    for (std::size_t b = 0; b < 7; ++b) EXPECT_EQ(out(k, b), set.spec(k).sigmoid_output() ? 0.5 : 0.0);
}

TEST(Probes, DefaultSpecsCoverEveryTarget) {
  const env::EnvConfig envc;
  const auto specs = default_probe_specs(envc);
  EXPECT_EQ(specs.size(), static_cast<std::size_t>(envc.num_regions + envc.num_towers + 6));
  for (const auto& s : specs) EXPECT_EQ(s.gamma, s.kind == ProbeKind::Win ? 1.0 : 0.995) << s.name;
}

TEST(Probes, OutputsDependOnlyOnHiddenState) {
  const auto cfg = fixtures::tiny_config();
  auto model = make_agent_model(cfg);
  Rng rng(2);
  for (auto* p : model.probes.params())
    for (double& v : p->value.values()) v = 0.5 * rng.normal();
  env::Env e(cfg.env, 1);
  const auto obs = agent::encode_observation(e.reset(), cfg.env);
  const auto step = model.policy.forward(obs, nn::LstmState::zeros(cfg.policy.hidden_size));
  nn::LstmState other = step.state;
  for (double& v : other.c.values()) v += 1.0;
  // Same h, different c and observation history.
  const auto a = model.probes.forward_one(step.state.h.col(0));
  const auto b = model.probes.forward_one(other.h.col(0));
  EXPECT_EQ(a, b);
  for (std::size_t k = 0; k < model.probes.size(); ++k)
    if (model.probes.spec(k).sigmoid_output()) EXPECT_TRUE(a[k] > 0.0 && a[k] < 1.0);
}

TEST(Probes, LossesAtTheirMinimaWhenLabelsEqualOutputs) {
  std::vector<ProbeHeadSpec> specs = {head("kill", ProbeTarget::Kill, ProbeKind::Milestone, 0.9),
                                      head("gold", ProbeTarget::GoldSum, ProbeKind::RewardSum, 0.9)};
  ProbeSet set(specs, 4, 3);
  Rng rng(3);
  for (auto* p : set.params())
    for (double& v : p->value.values()) v = 0.4 * rng.normal();
  const Matrix h = random_h(rng, 4, 6);
  const Matrix out = set.forward(h);
  const auto l = set.losses(h, out);
  double entropy = 0.0;
  for (std::size_t b = 0; b < 6; ++b) entropy += nn::binary_entropy(out(0, b));
  EXPECT_NEAR(l[0], entropy / 6.0, 1e-12);
  EXPECT_EQ(l[1], 0.0);
  EXPECT_THROW(set.losses(h, Matrix(2, 5)), ShapeError);
}

TEST(Probes, ProbeTrainingNeverTouchesPolicyParameters) {
  auto cfg = fixtures::tiny_config();
  cfg.ppo.learning_rate = 0.0;
  Trainer trainer(cfg);
  std::vector<Matrix> policy_before, probes_before;
  for (auto* p : trainer.model().policy_params()) policy_before.push_back(p->value);
  for (auto* p : trainer.model().probe_params()) probes_before.push_back(p->value);
  trainer.step();
  const auto pol = trainer.model().policy_params();
  for (std::size_t i = 0; i < pol.size(); ++i) EXPECT_EQ(pol[i]->value, policy_before[i]) << pol[i]->name;
  const auto prb = trainer.model().probe_params();
  bool changed = false;
  for (std::size_t i = 0; i < prb.size(); ++i) changed = changed || !(prb[i]->value == probes_before[i]);
  EXPECT_TRUE(changed);
}

TEST(Probes, LossFallsOnStationaryPeriodicTask) {
  // Event every 10 frames; h encodes the phase.
  const std::size_t T = 200;
  Matrix h(10, T);
  std::vector<double> x(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    h(t % 10, t) = 1.0;
    if (t % 10 == 9) x[t] = 1.0;
  }
  const auto y = labeling::milestone_labels({"kill", x}, 0.0, 0.9);
  Matrix labels(1, T);
  for (std::size_t t = 0; t < T; ++t) labels(0, t) = y.values[t];

  ProbeSet set({head("kill", ProbeTarget::Kill, ProbeKind::Milestone, 0.9, 16)}, 10, 4);
  nn::AdamConfig ac;
  ac.learning_rate = 1e-2;
  nn::AdamState adam(set.params(), ac);
  std::vector<double> loss;
  for (int step = 0; step < 100; ++step) loss.push_back(set.train_step(h, labels, adam).head_loss[0]);
  int rises = 0;
  for (std::size_t i = 1; i < loss.size(); ++i) rises += loss[i] > loss[i - 1] + 1e-9;
  EXPECT_LE(rises, 5);
  double floor = 0.0;
  for (double v : y.values) floor += nn::binary_entropy(v);
  floor /= static_cast<double>(T);
  EXPECT_LT(loss.back() - floor, 0.1 * (loss.front() - floor));
}

TEST(Probes, CrossEntropyOptimumIsConditionalMean) {
  // Two hidden states with binary labels at rates 0.2 and 0.7.
  const std::size_t T = 400;
  Matrix h(2, T), labels(1, T);
  Rng rng(6);
  for (std::size_t t = 0; t < T; ++t) {
    const bool s = t % 2;
    h(s ? 1 : 0, t) = 1.0;
    labels(0, t) = static_cast<double>((t / 2) % 10 < (s ? 7u : 2u));
  }
  ProbeSet set({head("kill", ProbeTarget::Kill, ProbeKind::Milestone, 0.9, 8)}, 2, 5);
  nn::AdamConfig ac;
  ac.learning_rate = 2e-2;
  nn::AdamState adam(set.params(), ac);
  for (int step = 0; step < 1500; ++step) set.train_step(h, labels, adam);
  EXPECT_NEAR(set.forward_one(std::vector<double>{1.0, 0.0})[0], 0.2, 0.01);
  EXPECT_NEAR(set.forward_one(std::vector<double>{0.0, 1.0})[0], 0.7, 0.01);
}

TEST(Posthoc, NeverOccurringEventDrivesOutputToZero) {
  Rng rng(7);
  std::vector<EpisodeHidden> corpus(3);
  for (auto& ep : corpus) {
    ep.h = random_h(rng, 4, 120);
    ep.events.resize(120);
  }
  ProbeSet set({head("kill", ProbeTarget::Kill, ProbeKind::Milestone, 0.995)}, 4, 1);
  PosthocConfig pc;
  pc.epochs = 60;
  pc.batch_frames = 64;
  pc.learning_rate = 1e-2;
  const auto m = posthoc_train(set, corpus, pc);
  EXPECT_LT(m.head_loss[0], 0.02);
  const Matrix out = set.forward(corpus[0].h);
  for (double v : out.values()) EXPECT_LT(v, 0.05);
}

TEST(Posthoc, SameSeedSameParameters) {
  Rng rng(8);
  std::vector<EpisodeHidden> corpus(2);
  for (auto& ep : corpus) {
    ep.h = random_h(rng, 4, 50);
    ep.events.resize(50);
    for (std::size_t t = 7; t < 50; t += 13) ep.events[t].kill = 1;
  }
  const std::vector<ProbeHeadSpec> specs = {head("kill", ProbeTarget::Kill, ProbeKind::Milestone, 0.9)};
  ProbeSet a(specs, 4, 1), b(specs, 4, 2);
  PosthocConfig pc;
  pc.epochs = 5;
  pc.batch_frames = 16;
  pc.seed = 42;
  posthoc_train(a, corpus, pc);
  posthoc_train(b, corpus, pc);
  const auto pa = a.params(), pb = b.params();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
}
