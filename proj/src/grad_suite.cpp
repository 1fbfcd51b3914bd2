#include "planprobe/grad_suite.hpp"

#include <cmath>

#include "planprobe/env.hpp"
#include "planprobe/policy.hpp"
#include "planprobe/ppo.hpp"
#include "planprobe/probes.hpp"

namespace planprobe::nn {

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

void randomize(const ParamList& params, Rng& rng, double scale) {
  for (Param* p : params)
    for (double& v : p->value.values()) v = scale * rng.normal();
}

double weighted_sum(const Matrix& a, const Matrix& w) { return dot(a.values(), w.values()); }

}  // namespace

struct GradSuite::State {
  Rng rng;
  Dense dense;
  Dense tanh_dense;
  LstmCell lstm;
  Embedding embedding;
  probes::ProbeSet probes;
  agent::PolicyNet policy;
  env::EnvConfig env;
  agent::PpoConfig ppo;

  Matrix dense_x, dense_w;
  Matrix tanh_x, tanh_w;
  Matrix lstm_x, lstm_wh, lstm_wc;
  LstmState lstm_prev;
  std::vector<std::size_t> ids;
  Matrix emb_w;
  Matrix probe_h, probe_labels;

  std::vector<agent::EncodedObs> observations;
  Matrix step_wl, step_wv, step_wh, step_wc;
  LstmState step_prev;
  std::vector<agent::PpoSequence> windows;
  std::vector<std::vector<double>> flow_labels;

  explicit State(std::uint64_t seed) : rng(seed) {}
};

GradSuite::GradSuite(std::uint64_t seed) : state_(std::make_unique<State>(seed)) {
  State& s = *state_;
  Rng& rng = s.rng;

  s.dense = Dense("dense", 5, 4);
  randomize(s.dense.params(), rng, 0.5);
  s.dense_x = random_matrix(rng, 5, 3);
  s.dense_w = random_matrix(rng, 4, 3);
  fragments_.push_back({"dense", s.dense.params(),
                        [&s] { return weighted_sum(s.dense.forward(s.dense_x), s.dense_w); },
                        [&s] {
                          zero_grads(s.dense.params());
                          s.dense.backward(s.dense_x, s.dense_w);
                        }});

  s.tanh_dense = Dense("tanh_dense", 6, 5);
  randomize(s.tanh_dense.params(), rng, 0.5);
  s.tanh_x = random_matrix(rng, 6, 4);
  s.tanh_w = random_matrix(rng, 5, 4);
  fragments_.push_back({"tanh_dense", s.tanh_dense.params(),
                        [&s] {
                          Matrix y = s.tanh_dense.forward(s.tanh_x);
                          tanh_inplace(y);
                          return weighted_sum(y, s.tanh_w);
                        },
                        [&s] {
                          zero_grads(s.tanh_dense.params());
                          Matrix y = s.tanh_dense.forward(s.tanh_x);
                          tanh_inplace(y);
                          Matrix dy = s.tanh_w;
                          for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= 1.0 - y[i] * y[i];
                          s.tanh_dense.backward(s.tanh_x, dy);
                        }});

  s.lstm = LstmCell("lstm", 4, 3);
  randomize(s.lstm.params(), rng, 0.5);
  s.lstm_x = random_matrix(rng, 4, 2);
  s.lstm_prev = {random_matrix(rng, 3, 2, 0.5), random_matrix(rng, 3, 2, 0.5)};
  s.lstm_wh = random_matrix(rng, 3, 2);
  s.lstm_wc = random_matrix(rng, 3, 2);
  fragments_.push_back({"lstm_step", s.lstm.params(),
                        [&s] {
                          const LstmState next = s.lstm.forward(s.lstm_x, s.lstm_prev);
                          return weighted_sum(next.h, s.lstm_wh) + weighted_sum(next.c, s.lstm_wc);
                        },
                        [&s] {
                          zero_grads(s.lstm.params());
                          LstmCache cache;
                          s.lstm.forward(s.lstm_x, s.lstm_prev, &cache);
                          Matrix dx;
                          LstmState dprev;
                          s.lstm.backward(cache, s.lstm_wh, s.lstm_wc, dx, dprev);
                        }});

  s.embedding = Embedding("embedding", 6, 3);
  s.embedding.init_orthogonal(rng, 1.0);
  s.ids = {0, 2, 2, 5};
  s.emb_w = random_matrix(rng, 3, s.ids.size());
  fragments_.push_back({"embedding", s.embedding.params(),
                        [&s] {
                          double total = 0.0;
                          for (std::size_t j = 0; j < s.ids.size(); ++j) {
                            const auto row = s.embedding.lookup(s.ids[j]);
                            for (std::size_t d = 0; d < row.size(); ++d) {
                              const double v = row[d];
                              total += s.emb_w(d, j) * v * v;
                            }
                          }
                          return total;
                        },
                        [&s] {
                          zero_grads(s.embedding.params());
                          for (std::size_t j = 0; j < s.ids.size(); ++j) {
                            const auto row = s.embedding.lookup(s.ids[j]);
                            std::vector<double> g(row.size());
                            for (std::size_t d = 0; d < row.size(); ++d) g[d] = 2.0 * s.emb_w(d, j) * row[d];
                            s.embedding.accumulate(s.ids[j], g);
                          }
                        }});

  // Small probe set with one head of each output type.
  std::vector<probes::ProbeHeadSpec> specs = {
      {"kill", probes::ProbeTarget::Kill, 0, probes::ProbeKind::Milestone, 0.9, 4},
      {"win", probes::ProbeTarget::Win, 0, probes::ProbeKind::Win, 1.0, 4},
      {"gold_sum", probes::ProbeTarget::GoldSum, 0, probes::ProbeKind::RewardSum, 0.9, 4},
  };
  s.probes = probes::ProbeSet(specs, 5, seed);
  randomize(s.probes.params(), rng, 0.5);
  s.probe_h = random_matrix(rng, 5, 6, 0.8);
  s.probe_labels = Matrix(3, 6);
  for (std::size_t b = 0; b < 6; ++b) {
    s.probe_labels(0, b) = rng.uniform();
    s.probe_labels(1, b) = rng.uniform();
    s.probe_labels(2, b) = 2.0 * rng.normal();
  }
  fragments_.push_back({"probe_heads", s.probes.params(),
                        [&s] {
                          double total = 0.0;
                          for (double l : s.probes.losses(s.probe_h, s.probe_labels)) total += l;
                          return total;
                        },
                        [&s] {
                          zero_grads(s.probes.params());
                          s.probes.backward(s.probe_h, s.probe_labels);
                        }});

  // Real observations from a short random walk in the default environment.
  agent::PolicyConfig pc;
  pc.encoder_width = 6;
  pc.hidden_size = 5;
  pc.embedding_dim = 3;
  s.policy = agent::PolicyNet(s.env, pc, derive_seed(seed, 11));
  randomize(s.policy.params(), rng, 0.3);
  {
    env::Env e(s.env, derive_seed(seed, 12));
    env::Observation obs = e.reset();
    const std::size_t needed = 2 * kGradSuiteBpttSteps;
    while (s.observations.size() < needed) {
      s.observations.push_back(agent::encode_observation(obs, s.env));
      obs = e.step(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(s.env.num_actions())))).observation;
    }
  }

  const std::size_t na = s.policy.num_actions(), hs = s.policy.hidden_size();
  s.step_wl = random_matrix(rng, na, 2);
  s.step_wv = random_matrix(rng, 1, 2);
  s.step_wh = random_matrix(rng, hs, 2);
  s.step_wc = random_matrix(rng, hs, 2);
  s.step_prev = {random_matrix(rng, hs, 2, 0.5), random_matrix(rng, hs, 2, 0.5)};
  fragments_.push_back({"policy_step", s.policy.params(),
                        [&s] {
                          const agent::EncodedObs* batch[] = {&s.observations[0], &s.observations[5]};
                          const auto step = s.policy.forward(batch, s.step_prev);
                          return weighted_sum(step.logits, s.step_wl) + weighted_sum(step.value, s.step_wv) +
                                 weighted_sum(step.state.h, s.step_wh) + weighted_sum(step.state.c, s.step_wc);
                        },
                        [&s] {
                          zero_grads(s.policy.params());
                          const agent::EncodedObs* batch[] = {&s.observations[0], &s.observations[5]};
                          agent::PolicyStepCache cache;
                          s.policy.forward(batch, s.step_prev, &cache);
                          s.policy.backward(cache, s.step_wl, s.step_wv, s.step_wh, s.step_wc);
                        }});

  // Two 16-step windows with carried-in states. Old log-probs sit close to
  // the current ones so every ratio stays strictly inside the clip range and
  // the objective is smooth.
  s.flow_labels.resize(2 * kGradSuiteBpttSteps);
  for (std::size_t w = 0; w < 2; ++w) {
    agent::PpoSequence seq;
    seq.initial = {random_matrix(rng, hs, 1, 0.5), random_matrix(rng, hs, 1, 0.5)};
    nn::LstmState state = seq.initial;
    for (std::size_t t = 0; t < kGradSuiteBpttSteps; ++t) {
      const auto& obs = s.observations[w * kGradSuiteBpttSteps + t];
      const auto step = s.policy.forward(obs, state);
      const Matrix logp = log_softmax_columns(step.logits);
      agent::PpoSample sample;
      sample.obs = &obs;
      sample.action = static_cast<int>(rng.uniform_int(na));
      sample.old_log_prob = logp(static_cast<std::size_t>(sample.action), 0) + 0.05 * (rng.uniform() - 0.5);
      sample.advantage = rng.normal();
      sample.value_target = rng.normal();
      auto& labels = s.flow_labels[w * kGradSuiteBpttSteps + t];
      labels = {rng.uniform(), rng.uniform(), rng.normal()};
      sample.probe_labels = labels;
      seq.steps.push_back(sample);
      state = step.state;
    }
    s.windows.push_back(std::move(seq));
  }
  s.ppo.clip_epsilon = 0.2;
  fragments_.push_back({"bptt_window_16", s.policy.params(),
                        [&s] { return agent::ppo_loss(s.policy, s.windows, s.ppo, false).total; },
                        [&s] {
                          zero_grads(s.policy.params());
                          agent::ppo_loss(s.policy, s.windows, s.ppo, true);
                        }});

  ParamList joint = s.policy.params();
  for (Param* p : s.probes.params()) joint.push_back(p);
  fragments_.push_back({"bptt_window_16_probe_flow", joint,
                        [&s] { return agent::ppo_loss(s.policy, s.windows, s.ppo, false, &s.probes).total; },
                        [&s, joint] {
                          zero_grads(joint);
                          agent::ppo_loss(s.policy, s.windows, s.ppo, true, &s.probes);
                        }});
}

GradSuite::~GradSuite() = default;

std::vector<GradCheckReport> run_grad_suite(std::uint64_t seed, double tolerance) {
  GradSuite suite(seed);
  std::vector<GradCheckReport> reports;
  for (const auto& f : suite.fragments()) reports.push_back(grad_check(f, tolerance));
  return reports;
}

}  // namespace planprobe::nn
