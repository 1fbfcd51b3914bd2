#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "planprobe/error.hpp"
#include "planprobe/ppo.hpp"
#include "planprobe/trainer.hpp"
#include "support.hpp"

using namespace planprobe;
using namespace planprobe::agent;

namespace {

struct Windows {
  std::vector<EncodedObs> obs;
  std::vector<PpoSequence> seqs;
};

/// Two 16-step windows over real observations; old log-probs are offset by
/// `log_ratio` from the current policy's.
Windows make_windows(PolicyNet& policy, const env::EnvConfig& envc, double log_ratio, double advantage) {
  Windows w;
  env::Env e(envc, 3);
  auto o = e.reset();
  Rng rng(5);
  for (int i = 0; i < 32; ++i) {
    w.obs.push_back(encode_observation(o, envc));
    o = e.step(static_cast<int>(rng.uniform_int(envc.num_actions()))).observation;
  }
  for (int k = 0; k < 2; ++k) {
    PpoSequence s;
    s.initial = nn::LstmState::zeros(policy.hidden_size());
    auto state = s.initial;
    for (int t = 0; t < 16; ++t) {
      const auto& ob = w.obs[static_cast<std::size_t>(16 * k + t)];
      const auto step = policy.forward(ob, state);
      const Matrix logp = nn::log_softmax_columns(step.logits);
      PpoSample p;
      p.obs = &ob;
      p.action = static_cast<int>(rng.uniform_int(policy.num_actions()));
      p.old_log_prob = logp(static_cast<std::size_t>(p.action), 0) - log_ratio;
      p.advantage = advantage;
      p.value_target = 0.0;
      s.steps.push_back(p);
      state = step.state;
    }
    w.seqs.push_back(std::move(s));
  }
  return w;
}

std::vector<double> flat_grads(PolicyNet& p) {
  std::vector<double> g;
  for (auto* x : p.params()) g.insert(g.end(), x->grad.values().begin(), x->grad.values().end());
  return g;
}

}  // namespace

TEST(Gae, WorkedExample) {
  const auto r = gae_advantages(std::vector<double>{1, 1}, std::vector<double>{0, 0}, 0.0, 1.0, 1.0);
  EXPECT_EQ(r.advantages, (std::vector<double>{2, 1}));
  EXPECT_EQ(r.value_targets, (std::vector<double>{2, 1}));
}

TEST(Gae, ZerosGiveZeros) {
  const auto r = gae_advantages(std::vector<double>(5, 0.0), std::vector<double>(5, 0.0), 0.0, 0.99, 0.95);
  for (double a : r.advantages) EXPECT_EQ(a, 0.0);
}

TEST(Gae, LambdaZeroIsOneStepTd) {
  Rng rng(2);
  std::vector<double> r(10), v(10);
  for (std::size_t i = 0; i < 10; ++i) r[i] = rng.normal(), v[i] = rng.normal();
  const double boot = 0.7, g = 0.9;
  const auto out = gae_advantages(r, v, boot, g, 0.0);
  for (std::size_t t = 0; t < 10; ++t) {
    const double next = t + 1 < 10 ? v[t + 1] : boot;
    EXPECT_NEAR(out.advantages[t], r[t] + g * next - v[t], 1e-15);
  }
}

TEST(Gae, LengthMismatchIsShapeError) {
  EXPECT_THROW(gae_advantages(std::vector<double>{1}, std::vector<double>{1, 2}, 0.0, 1.0, 1.0), ShapeError);
}

TEST(PpoLoss, ClipsPositiveAdvantageAtOnePlusEpsilon) {
  const auto cfg = fixtures::tiny_config();
  auto model = make_agent_model(cfg);
  auto w = make_windows(model.policy, cfg.env, std::log(1.5), 1.0);
  PpoConfig pc;
  pc.clip_epsilon = 0.2;
  const auto l = ppo_loss(model.policy, w.seqs, pc, false);
  EXPECT_NEAR(l.policy_loss, -1.2, 1e-12);
  EXPECT_EQ(l.clip_fraction, 1.0);
}

TEST(PpoLoss, IdenticalPoliciesNeverClip) {
  const auto cfg = fixtures::tiny_config();
  auto model = make_agent_model(cfg);
  auto w = make_windows(model.policy, cfg.env, 0.0, 1.0);
  const auto l = ppo_loss(model.policy, w.seqs, PpoConfig{}, false);
  EXPECT_EQ(l.clip_fraction, 0.0);
  EXPECT_NEAR(l.approx_kl, 0.0, 1e-15);
  EXPECT_NEAR(l.policy_loss, -1.0, 1e-12);
}

TEST(PpoLoss, NoGradientFlowsIntoCarriedInState) {
  // Windows are independent: the joint gradient is the sample-weighted mean
  // of the per-window gradients.
  const auto cfg = fixtures::tiny_config();
  auto model = make_agent_model(cfg);
  Rng rng(9);
  for (auto* p : model.policy.params())
    for (double& v : p->value.values()) v += 0.1 * rng.normal();
  auto w = make_windows(model.policy, cfg.env, 0.01, 0.5);
  const PpoConfig pc;
  auto grads_of = [&](std::span<const PpoSequence> seqs) {
    nn::zero_grads(model.policy.params());
    ppo_loss(model.policy, seqs, pc, true);
    return flat_grads(model.policy);
  };
  const auto joint = grads_of(w.seqs);
  const auto a = grads_of(std::span(w.seqs).subspan(0, 1));
  const auto b = grads_of(std::span(w.seqs).subspan(1, 1));
  for (std::size_t i = 0; i < joint.size(); ++i) EXPECT_NEAR(joint[i], 0.5 * (a[i] + b[i]), 1e-12);
}

TEST(PpoUpdate, ZeroLearningRateLeavesParametersBitIdentical) {
  auto cfg = fixtures::tiny_config();
  cfg.ppo.learning_rate = 0.0;
  cfg.probes.train.learning_rate = 0.0;
  Trainer trainer(cfg);
  std::vector<Matrix> before;
  for (auto* p : trainer.model().all_params()) before.push_back(p->value);
  trainer.step();
  trainer.step();
  const auto after = trainer.model().all_params();
  for (std::size_t i = 0; i < after.size(); ++i) EXPECT_EQ(after[i]->value, before[i]) << after[i]->name;
}

TEST(Policy, ZeroHeadsGiveUniformActionsAndZeroValue) {
  const auto cfg = fixtures::tiny_config();
  auto model = make_agent_model(cfg);
  auto& pol = model.policy;
  pol.primitive_head.init_zero();
  pol.ability_proj.init_zero();
  pol.ability_bias.value.fill(0.0);
  pol.value_head.init_zero();
  env::Env e(cfg.env, 1);
  const auto step = pol.forward(encode_observation(e.reset(), cfg.env), nn::LstmState::zeros(pol.hidden_size()));
  const double u = 1.0 / static_cast<double>(pol.num_actions());
  for (double p : step.probs.values()) EXPECT_NEAR(p, u, 1e-15);
  EXPECT_EQ(step.value[0], 0.0);
}

TEST(Policy, EntropyBoundsAndShiftInvariance) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix logits(9, 3);
    for (double& v : logits.values()) v = 3.0 * rng.normal();
    const Matrix p = nn::softmax_columns(logits);
    for (double h : entropy_columns(p)) {
      EXPECT_GE(h, 0.0);
      EXPECT_LE(h, std::log(9.0) + 1e-12);
    }
    Matrix shifted = logits;
    for (double& v : shifted.values()) v += 17.25;
    const Matrix q = nn::softmax_columns(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-15);
  }
}

TEST(PpoConfig, RejectsInvalidValues) {
  PpoConfig pc;
  pc.clip_epsilon = 0.0;
  EXPECT_THROW(pc.validate(), ConfigError);
  pc = {};
  pc.gae_lambda = 1.5;
  EXPECT_THROW(pc.validate(), ConfigError);
}
