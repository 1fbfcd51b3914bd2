// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails. Trains three seeds with the default config into
// the work directory unless --reuse finds finished runs there.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "planprobe/checkpoint.hpp"
#include "planprobe/config.hpp"
#include "planprobe/evaluation.hpp"
#include "planprobe/grad_suite.hpp"
#include "planprobe/labeling.hpp"
#include "planprobe/replay.hpp"
#include "planprobe/rng.hpp"
#include "planprobe/rollout.hpp"
#include "planprobe/similarity.hpp"
#include "planprobe/trainer.hpp"

namespace fs = std::filesystem;
using namespace planprobe;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Outcome> results;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  results.push_back({id, pass, detail});
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---- 1: sliced labels against a direct-sum oracle ----------------------------

// y_t = max_k gamma^(k-t) x_k and y_t = sum_k gamma^(k-t) x_k, k >= t.
std::vector<double> direct_labels(const std::vector<double>& x, double gamma, bool milestone) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double g = 1.0, acc = 0.0;
    for (std::size_t k = t; k < x.size(); ++k, g *= gamma) acc = milestone ? std::max(acc, g * x[k]) : acc + g * x[k];
    y[t] = acc;
  }
  return y;
}

void criterion_label_oracle() {
  const auto start = Clock::now();
  Rng rng(20240601);
  double worst = 0.0;
  std::size_t slices = 0;
  for (int episode = 0; episode < 1000; ++episode) {
    const std::size_t length = 1 + rng.uniform_int(512);
    const double gamma = rng.uniform() < 0.1 ? 1.0 : 0.9 + 0.0999 * rng.uniform();
    const bool milestone = episode % 2 == 0;
    const double rate = 0.002 + 0.05 * rng.uniform();
    std::vector<double> x(length, 0.0);
    for (auto& v : x)
      if (rng.uniform() < rate) v = milestone ? 1.0 : rng.normal();
    const auto oracle = direct_labels(x, gamma, milestone);

    std::vector<std::size_t> cuts = {0, length};
    const std::size_t ncuts = rng.uniform_int(8);
    for (std::size_t c = 0; c < ncuts; ++c) cuts.push_back(rng.uniform_int(length + 1));
    std::ranges::sort(cuts);
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      const std::size_t a = cuts[s], b = cuts[s + 1];
      const std::vector<double> part(x.begin() + static_cast<std::ptrdiff_t>(a), x.begin() + static_cast<std::ptrdiff_t>(b));
      const double bootstrap = b < length ? oracle[b] : 0.0;
      const auto y = milestone ? labeling::milestone_labels({"m", part}, bootstrap, gamma).values
                               : labeling::reward_labels({"r", part}, bootstrap, gamma).values;
      for (std::size_t t = 0; t < y.size(); ++t) worst = std::max(worst, std::abs(y[t] - oracle[a + t]));
      ++slices;
    }
  }
  const double secs = seconds_since(start);
  report(1, worst <= 1e-9 && secs < 10.0,
         fmt("1000 episodes, %zu slices, max |sliced - oracle| %.3g (<= 1e-9), %.2f s (< 10 s)", slices, worst, secs));
}

// ---- 2: gamma^T law ----------------------------------------------------------

void criterion_gamma_law() {
  const auto start = Clock::now();
  Rng rng(77);
  double worst = 0.0;
  bool bitwise = true;
  std::size_t tracks = 0;
  const double dyadic[] = {0.5, 0.25, 0.125};
  for (int trial = 0; trial < 2000; ++trial) {
    const bool representable = trial % 4 == 0;
    const double gamma = representable ? dyadic[rng.uniform_int(3)] : 0.5 + 0.4999 * rng.uniform();
    const std::size_t length = 1 + rng.uniform_int(600);
    const std::size_t event = rng.uniform_int(length);
    std::vector<double> x(length, 0.0);
    x[event] = 1.0;
    const auto y = labeling::milestone_labels({"m", x}, 0.0, gamma).values;
    for (std::size_t t = 0; t < length; ++t) {
      const double expected = t <= event ? std::pow(gamma, static_cast<double>(event - t)) : 0.0;
      if (representable)
        bitwise = bitwise && y[t] == expected;
      else
        worst = std::max(worst, std::abs(y[t] - expected));
    }
    ++tracks;
  }
  const double secs = seconds_since(start);
  report(2, bitwise && worst <= 1e-12 && secs < 1.0,
         fmt("%zu single-event tracks, dyadic gamma bitwise %s, others max err %.3g (<= 1e-12), %.3f s (< 1 s)",
             tracks, bitwise ? "yes" : "no", worst, secs));
}

// ---- 3: gradient verification ---------------------------------------------------

void criterion_gradients() {
  const auto start = Clock::now();
  bool ok = true;
  double worst = 0.0;
  std::string names;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const auto& r : nn::run_grad_suite(seed, 1e-6)) {
      ok = ok && r.pass;
      worst = std::max(worst, r.max_relative_error);
      if (seed == 1) names += (names.empty() ? "" : ",") + r.name;
    }
  }
  const double secs = seconds_since(start);
  report(3, ok && secs < 60.0,
         fmt("fragments [%s] x 3 seeds, max rel err %.3g (< 1e-6), %.1f s (< 60 s)", names.c_str(), worst, secs));
}

// ---- training runs ------------------------------------------------------------

struct Run {
  std::uint64_t seed = 0;
  fs::path dir;
  double train_seconds = 0.0;
  std::uint64_t frames = 0;
  std::vector<fs::path> checkpoints;
};

Run train_or_reuse(std::uint64_t seed, const fs::path& work, bool reuse) {
  Run run;
  run.seed = seed;
  run.dir = work / ("seed_" + std::to_string(seed));
  RunConfig cfg;
  cfg.seed = seed;
  const fs::path stamp = run.dir / "train_seconds.txt";
  const auto final_ckpt = persistence::checkpoint_path(run.dir, cfg.train.steps);
  if (reuse && fs::exists(stamp) && fs::exists(final_ckpt)) {
    std::ifstream(stamp) >> run.train_seconds;
    std::cout << "reusing " << run.dir << "\n";
  } else {
    fs::remove_all(run.dir);
    std::cout << "training seed " << seed << " into " << run.dir << "\n" << std::flush;
    const auto start = Clock::now();
    run_training(cfg, run.dir, &std::cout);
    run.train_seconds = seconds_since(start);
    std::ofstream(stamp) << run.train_seconds << "\n";
  }
  run.checkpoints = persistence::list_checkpoints(run.dir);
  run.frames = persistence::read_checkpoint(run.checkpoints.back()).meta.step_count;
  return run;
}

evaluation::CheckpointEvaluation evaluate(const fs::path& checkpoint) {
  auto loaded = persistence::load_model(checkpoint);
  evaluation::ProbeEvalConfig ec;
  ec.episodes = loaded.config.eval.episodes;
  ec.heldout_episodes = loaded.config.eval.heldout_episodes;
  ec.debounce = loaded.config.eval.debounce_frames;
  ec.histogram_bins = loaded.config.eval.histogram_bins;
  ec.seed = loaded.config.seed;
  return evaluation::evaluate_checkpoint(*loaded.model, loaded.config.env, ec);
}

const evaluation::HeadEvaluation* tower(const evaluation::CheckpointEvaluation& e) {
  return e.find(evaluation::kPooledTowerHead);
}

// ---- 4: agent competence ----------------------------------------------------------

void criterion_competence(const std::vector<Run>& runs, const std::vector<evaluation::CheckpointEvaluation>& finals) {
  int good = 0;
  std::string detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const bool ok = finals[i].win_rate >= 0.9 && runs[i].frames <= 2'000'000 && runs[i].train_seconds <= 1800.0;
    good += ok;
    detail += fmt("seed %llu: win %.3f over %zu eps, %llu frames, %.0f s%s; ",
                  static_cast<unsigned long long>(runs[i].seed), finals[i].win_rate, std::size_t{200},
                  static_cast<unsigned long long>(runs[i].frames), runs[i].train_seconds, ok ? "" : " (miss)");
  }
  report(4, good >= 2, detail + fmt("%d of 3 seeds meet win >= 0.9, <= 2M frames, <= 30 min", good));
}

// ---- 5: probe skill -------------------------------------------------------------------

void criterion_probe_skill(const evaluation::CheckpointEvaluation& final_eval) {
  const auto* h = tower(final_eval);
  if (!h) {
    report(5, false, "no tower_destroyed events on the held-out split");
    return;
  }
  const auto& r = h->report;
  report(5, r.f1 - r.baseline_f1 >= 0.2,
         fmt("version %llu: F1 %.3f vs baseline %.3f (margin %.3f >= 0.2), theta %.4f, H %zu",
             static_cast<unsigned long long>(final_eval.version), r.f1, r.baseline_f1, r.f1 - r.baseline_f1,
             r.theta, r.horizon));
}

// ---- 6: lead-time trend --------------------------------------------------------------

void criterion_lead_trend(const std::vector<evaluation::CheckpointEvaluation>& evals) {
  std::vector<double> medians;
  std::string detail;
  for (const auto& e : evals) {
    const auto* h = tower(e);
    const double m = h ? h->leads.median() : NAN;
    medians.push_back(m);
    detail += fmt("v%llu median %.1f (H %zu); ", static_cast<unsigned long long>(e.version), m,
                  h ? h->report.horizon : std::size_t{0});
  }
  const double first = medians.front(), last = medians.back();
  int inversions = 0;
  for (std::size_t i = 0; i + 1 < medians.size(); ++i) inversions += !(medians[i + 1] > medians[i]);
  const bool ok = last >= 10.0 && last > first && inversions <= 1;
  report(6, ok, detail + fmt("final >= 10: %s, final > earliest: %s, inversions %d (<= 1)", last >= 10.0 ? "yes" : "no",
                             last > first ? "yes" : "no", inversions));
}

// ---- 7: similarity separation --------------------------------------------------------

void criterion_similarity(const Run& run) {
  RunConfig cfg;
  const auto pairs = similarity::default_pairs(cfg.env);
  const std::vector<fs::path> ends = {run.checkpoints.front(), run.checkpoints.back()};
  const auto t = similarity::trajectory(ends, pairs, 1000, run.seed);
  const auto& v0 = t.versions.front();
  const auto& vf = t.versions.back();
  const double s0 = v0.group_mean(pairs, "similar"), sf = vf.group_mean(pairs, "similar");
  const bool ok = std::abs(s0 - v0.baseline_mean) <= 0.1 && sf >= vf.baseline_mean + 0.3;
  report(7, ok,
         fmt("v0 similar %.3f vs baseline %.3f (|diff| %.3f <= 0.1); v%llu similar %.3f vs baseline %.3f (gap %.3f >= 0.3)",
             s0, v0.baseline_mean, std::abs(s0 - v0.baseline_mean), static_cast<unsigned long long>(vf.version), sf,
             vf.baseline_mean, sf - vf.baseline_mean));
}

// ---- 8: win-probability convergence -------------------------------------------------

void criterion_winprob(const Run& run) {
  constexpr std::size_t kReplays = 24;
  auto loaded = persistence::load_model(run.checkpoints.back());
  std::vector<persistence::Replay> replays;
  for (std::size_t i = 0; i < kReplays; ++i) {
    auto trace = rollout::run_episode(*loaded.model, loaded.config.env, derive_seed(run.seed, 5'000'000 + 2 * i),
                                      derive_seed(run.seed, 5'000'001 + 2 * i));
    replays.push_back(std::move(trace.replay));
  }
  // First, one third, two thirds and final version.
  const std::uint64_t last = loaded.meta.model_version;
  const std::uint64_t every = loaded.config.train.checkpoint_every;
  std::vector<fs::path> picked;
  for (std::uint64_t q = 0; q <= 3; ++q) {
    const std::uint64_t v = (last * q / 3) / every * every;
    picked.push_back(persistence::checkpoint_path(run.dir, q == 3 ? last : v));
  }
  const auto curves = evaluation::winprob_replay(picked, replays);
  std::vector<double> outcomes;
  for (const auto& r : replays) outcomes.push_back(rollout::replay_won(r) ? 1.0 : 0.0);

  std::vector<double> mads;
  std::string detail;
  for (const auto& wc : curves) {
    mads.push_back(evaluation::mean_abs_deviation(wc.curves, curves.back().curves));
    detail += fmt("v%llu MAD %.4f; ", static_cast<unsigned long long>(wc.version), mads.back());
  }
  bool nonincreasing = true;
  for (std::size_t i = 0; i + 1 < mads.size(); ++i) nonincreasing = nonincreasing && mads[i + 1] <= mads[i];
  const double brier = evaluation::brier_score(curves.back().curves, outcomes);
  report(8, nonincreasing && brier <= 0.20,
         detail + fmt("%zu replays, nonincreasing %s, final Brier %.4f (<= 0.20)", kReplays,
                      nonincreasing ? "yes" : "no", brier));
}

// ---- 9: determinism and formats ----------------------------------------------------------

void criterion_determinism(const fs::path& work, const Run& run) {
  RunConfig cfg;
  cfg.seed = 11;
  cfg.train.steps = 4;
  cfg.train.checkpoint_every = 2;
  const fs::path a = work / "det_a", b = work / "det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  run_training(cfg, a, nullptr);
  run_training(cfg, b, nullptr);
  bool same_run = slurp(a / "metrics.csv") == slurp(b / "metrics.csv");
  const auto la = persistence::list_checkpoints(a), lb = persistence::list_checkpoints(b);
  same_run = same_run && la.size() == lb.size();
  for (std::size_t i = 0; same_run && i < la.size(); ++i) same_run = slurp(la[i]) == slurp(lb[i]);

  for (const auto& dir : {a, b}) {
    auto m = persistence::load_model(persistence::list_checkpoints(dir).back());
    const auto trace = rollout::run_episode(*m.model, m.config.env, 101, 102);
    persistence::write_replay(dir / "replay.jsonl", trace.replay);
  }
  const bool same_replays = slurp(a / "replay.jsonl") == slurp(b / "replay.jsonl");

  // Round trip of the final trained checkpoint.
  const std::string original = slurp(run.checkpoints.back());
  auto loaded = persistence::load_model(run.checkpoints.back());
  const fs::path again = work / "roundtrip.pprb";
  persistence::save_model(again, *loaded.model, loaded.config, loaded.meta.step_count, loaded.meta.f32_downcast);
  const bool round_trip = slurp(again) == original;

  // Single-byte corruption: every header byte, then evenly spaced positions.
  std::size_t tried = 0, detected = 0;
  auto flip = [&](std::size_t pos) {
    std::string bad = original;
    bad[pos] = static_cast<char>(bad[pos] ^ 0x5a);
    ++tried;
    try {
      persistence::decode_checkpoint(bad);
    } catch (const persistence::CheckpointError&) {
      ++detected;
    }
  };
  const std::size_t header = std::min<std::size_t>(original.size(), 4096);
  for (std::size_t p = 0; p < header; ++p) flip(p);
  const std::size_t stride = std::max<std::size_t>(1, original.size() / 3000);
  for (std::size_t p = header; p < original.size(); p += stride) flip(p);

  report(9, same_run && same_replays && round_trip && detected == tried,
         fmt("same-seed metrics+checkpoints identical %s, replays identical %s, round trip bit-exact %s, "
             "corruption detected %zu/%zu",
             same_run ? "yes" : "no", same_replays ? "yes" : "no", round_trip ? "yes" : "no", detected, tried));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string work = (fs::temp_directory_path() / "planprobe_acceptance").string();
  bool reuse = false;
  std::vector<std::uint64_t> seeds = {7, 8, 9};
  app.add_option("--work-dir", work, "directory for training runs");
  app.add_flag("--reuse", reuse, "reuse finished training runs in the work directory");
  app.add_option("--seeds", seeds, "three training seeds")->expected(3);
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  criterion_label_oracle();
  criterion_gamma_law();
  criterion_gradients();

  std::vector<Run> runs;
  for (auto s : seeds) runs.push_back(train_or_reuse(s, work, reuse));

  std::vector<evaluation::CheckpointEvaluation> finals;
  for (const auto& r : runs) finals.push_back(evaluate(r.checkpoints.back()));
  criterion_competence(runs, finals);

  const Run& main_run = runs.front();
  criterion_probe_skill(finals.front());

  // Earliest post-warmup checkpoint (the first one after version 0), the
  // midpoint and the final checkpoint.
  const auto& ck = main_run.checkpoints;
  std::vector<evaluation::CheckpointEvaluation> trend = {evaluate(ck[1]), evaluate(ck[ck.size() / 2]), finals.front()};
  criterion_lead_trend(trend);

  criterion_similarity(main_run);
  criterion_winprob(main_run);
  criterion_determinism(work, main_run);

  const bool all = std::ranges::all_of(results, [](const Outcome& o) { return o.pass; });
  std::printf("%s: %zu of %zu criteria pass\n", all ? "PASS" : "FAIL",
              static_cast<std::size_t>(std::ranges::count_if(results, [](const Outcome& o) { return o.pass; })),
              results.size());
  return all ? 0 : 1;
}
