#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "planprobe/checkpoint.hpp"
#include "planprobe/error.hpp"
#include "planprobe/similarity.hpp"
#include "planprobe/trainer.hpp"
#include "support.hpp"

using namespace planprobe;
using namespace planprobe::similarity;

namespace {

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST(Cosine, WorkedExamples) {
  const std::vector<double> v = {0.3, -1.2, 4.0};
  EXPECT_NEAR(cosine(v, v), 1.0, 1e-15);
  EXPECT_EQ(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_NEAR(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 1}), std::sqrt(2.0) / 2.0, 1e-15);
}

TEST(Cosine, ZeroVectorAndLengthMismatch) {
  EXPECT_THROW(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}), DomainError);
  EXPECT_THROW(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 0, 0}), ShapeError);
}

TEST(Cosine, ScaleInvariant) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> u(6), v(6), su(6), sv(6);
    const double a = std::exp(3.0 * rng.normal()), b = std::exp(3.0 * rng.normal());
    for (std::size_t k = 0; k < 6; ++k) {
      u[k] = rng.normal();
      v[k] = rng.normal();
      su[k] = a * u[k];
      sv[k] = b * v[k];
    }
    EXPECT_NEAR(cosine(su, sv), cosine(u, v), 1e-12);
  }
}

TEST(Pairs, DefaultPairsShareClass) {
  const env::EnvConfig envc;
  const auto pairs = default_pairs(envc);
  std::size_t similar = 0;
  for (const auto& p : pairs) {
    if (p.group != "similar") continue;
    ++similar;
    const auto& a = envc.abilities[p.row_a - env::kNumEntityTypes];
    const auto& b = envc.abilities[p.row_b - env::kNumEntityTypes];
    EXPECT_EQ(a.semantic_class, b.semantic_class) << p.name;
    EXPECT_NE(a.semantic_class, env::SemanticClass::NoopFiller);
  }
  EXPECT_EQ(similar, 3u);
  EXPECT_EQ(row_of("enemy_tower", envc), 0u);
  EXPECT_EQ(row_of("heal_small", envc), env::kNumEntityTypes);
  EXPECT_THROW(row_of("nope", envc), DataError);
}

TEST(Pairs, LoadFromJson) {
  const auto dir = fixtures::scratch_dir("pairs");
  std::ofstream(dir / "p.json") << R"({"pairs": [{"name": "x", "a": "heal_small", "b": 7, "group": "control"}]})";
  const auto p = load_pairs(dir / "p.json", env::EnvConfig{});
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].row_b, 7u);
  EXPECT_EQ(p[0].group, "control");
  std::ofstream(dir / "bad.json") << R"({"pairs": [{"a": "heal_small"}]})";
  EXPECT_THROW(load_pairs(dir / "bad.json", env::EnvConfig{}), DataError);
}

TEST(Similarity, FreshInitSimilarPairsMatchBaseline) {
  for (std::uint64_t seed : {1u, 7u, 11u}) {
    RunConfig cfg;
    cfg.seed = seed;
    auto model = make_agent_model(cfg);
    const auto pairs = default_pairs(cfg.env);
    const auto v = measure(model.policy.embedding.table.value, 0, pairs, 1000, seed);
    EXPECT_LE(std::abs(v.group_mean(pairs, "similar") - v.baseline_mean), 0.1);
  }
}

TEST(Similarity, TrajectoryCsvRowsAndDuplicates) {
  const auto dir = fixtures::scratch_dir("sim_traj");
  const auto cfg = fixtures::tiny_config();
  auto model = make_agent_model(cfg);
  Rng rng(3);
  for (double& v : model.policy.embedding.table.value.values()) v = rng.normal();
  persistence::save_model(dir / "ckpt_00000000.pprb", model, cfg, 0);
  const std::vector<std::filesystem::path> list = {dir / "ckpt_00000000.pprb", dir / "ckpt_00000000.pprb"};
  const auto pairs = default_pairs(cfg.env);
  const auto t = trajectory(list, pairs, 200, 5);
  ASSERT_EQ(t.versions.size(), 2u);
  EXPECT_EQ(t.versions[0].cosines, t.versions[1].cosines);
  EXPECT_EQ(t.versions[0].baseline_mean, t.versions[1].baseline_mean);
  const std::string csv = to_csv(t);
  EXPECT_EQ(count_lines(csv), 1 + 2 * (pairs.size() + 1));
  EXPECT_NE(to_svg(t).find("<svg"), std::string::npos);
}

TEST(Similarity, EmptyPairListGivesBaselineOnly) {
  const auto dir = fixtures::scratch_dir("sim_empty");
  const auto cfg = fixtures::tiny_config();
  auto model = make_agent_model(cfg);
  persistence::save_model(dir / "ckpt_00000000.pprb", model, cfg, 0);
  const auto t = trajectory({dir / "ckpt_00000000.pprb"}, {}, 100, 1);
  EXPECT_TRUE(t.versions[0].cosines.empty());
  EXPECT_EQ(count_lines(to_csv(t)), 2u);
  EXPECT_NE(to_csv(t).find(kBaselineRow), std::string::npos);
}

TEST(Similarity, CheckpointWithoutTableIsCompatibilityError) {
  const auto dir = fixtures::scratch_dir("sim_notable");
  persistence::Checkpoint c;
  persistence::write_checkpoint(dir / "ckpt_00000000.pprb", c);
  EXPECT_THROW(trajectory({dir / "ckpt_00000000.pprb"}, {}, 10, 1), CompatibilityError);
}
