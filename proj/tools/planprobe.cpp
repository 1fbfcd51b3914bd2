// planprobe command line: train, evaluate probes, embedding similarity,
// replay annotation, win-probability replay, gradient checks, rollouts.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "planprobe/annotate.hpp"
#include "planprobe/checkpoint.hpp"
#include "planprobe/config.hpp"
#include "planprobe/evaluation.hpp"
#include "planprobe/grad_suite.hpp"
#include "planprobe/replay.hpp"
#include "planprobe/rollout.hpp"
#include "planprobe/similarity.hpp"
#include "planprobe/svg.hpp"
#include "planprobe/trainer.hpp"

namespace fs = std::filesystem;
using namespace planprobe;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Writes config.resolved.json with the tool version and the command line
/// that produced the directory.
void write_resolved(const fs::path& out, const RunConfig& config, const std::string& command, const json& args) {
  fs::create_directories(out);
  json doc = to_json(config);
  doc["tool_version"] = kToolVersion;
  doc["command"] = command;
  doc["arguments"] = args;
  std::ofstream f(out / "config.resolved.json");
  f << doc.dump(2) << "\n";
}

std::vector<fs::path> require_checkpoints(const fs::path& dir) {
  auto list = persistence::list_checkpoints(dir);
  if (list.empty()) throw DataError("no ckpt_*.pprb files in " + dir.string());
  return list;
}

/// A replay file, or every *.jsonl file of a directory in name order.
std::vector<persistence::Replay> load_replays(const fs::path& path) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::ranges::sort(files);
  } else {
    files.push_back(path);
  }
  if (files.empty()) throw DataError("no replay files in " + path.string());
  std::vector<persistence::Replay> out;
  for (const auto& f : files) out.push_back(persistence::load_replay(f));
  return out;
}

RunConfig config_from_checkpoint(const fs::path& path) {
  auto cfg = persistence::load_model(path).config;
  apply_seed_override(cfg);
  return cfg;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config, out;
  std::optional<std::size_t> steps, workers;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.steps) cfg.train.steps = *a.steps;
  if (a.workers) cfg.slicing.workers = *a.workers;
  apply_seed_override(cfg);
  cfg.validate();
  const auto result = run_training(cfg, a.out, &std::cout);
  std::cout << "trained to version " << result.final_version << " over " << result.frames << " frames; "
            << result.checkpoints.size() << " checkpoints in " << a.out << "\n";
  return 0;
}

// ---- eval-probes -------------------------------------------------------------

struct EvalArgs {
  std::string checkpoints, out, versions;
  std::optional<std::size_t> episodes, heldout;
};

int cmd_eval_probes(const EvalArgs& a) {
  auto list = require_checkpoints(a.checkpoints);
  if (!a.versions.empty()) {
    std::vector<fs::path> picked;
    std::stringstream ss(a.versions);
    for (std::string v; std::getline(ss, v, ',');) {
      const auto p = persistence::checkpoint_path(a.checkpoints, std::stoull(v));
      if (!fs::exists(p)) throw DataError("no checkpoint for version " + v);
      picked.push_back(p);
    }
    list = picked;
  }
  RunConfig cfg = config_from_checkpoint(list.back());
  if (a.episodes) cfg.eval.episodes = *a.episodes;
  if (a.heldout) cfg.eval.heldout_episodes = *a.heldout;
  write_resolved(a.out, cfg, "eval-probes",
                 {{"checkpoints", a.checkpoints}, {"episodes", cfg.eval.episodes},
                  {"heldout_episodes", cfg.eval.heldout_episodes}, {"versions", a.versions}});

  std::ofstream metrics(fs::path(a.out) / "probe_metrics.csv");
  metrics << "version,head,theta,horizon,heldout_f1,precision,recall,f1,prior_rate,baseline_f1,"
             "median_lead,matched_events,unmatched_events,win_rate\n";
  std::ofstream hist(fs::path(a.out) / "leadtime_hist.csv");
  hist << "version,head,bin_lo,bin_hi,count\n";

  std::map<std::string, svg::Series> lead_series, f1_series;
  for (const auto& path : list) {
    auto loaded = persistence::load_model(path);
    evaluation::ProbeEvalConfig ec;
    ec.episodes = cfg.eval.episodes;
    ec.heldout_episodes = cfg.eval.heldout_episodes;
    ec.debounce = cfg.eval.debounce_frames;
    ec.histogram_bins = cfg.eval.histogram_bins;
    ec.seed = cfg.seed;
    const auto r = evaluation::evaluate_checkpoint(*loaded.model, loaded.config.env, ec);
    std::cout << "version " << r.version << ": win rate " << fmt(r.win_rate) << "\n";
    for (const auto& h : r.heads) {
      const auto& t = h.report;
      metrics << r.version << ',' << t.head << ',' << fmt(t.theta) << ',' << t.horizon << ',' << fmt(t.heldout_f1)
              << ',' << fmt(t.precision) << ',' << fmt(t.recall) << ',' << fmt(t.f1) << ',' << fmt(t.prior_rate)
              << ',' << fmt(t.baseline_f1) << ',' << fmt(h.leads.median()) << ',' << h.leads.lead_times.size()
              << ',' << h.leads.unmatched << ',' << fmt(r.win_rate) << '\n';
      for (std::size_t b = 0; b < h.leads.bin_counts.size(); ++b)
        hist << r.version << ',' << t.head << ',' << fmt(h.leads.bin_edges[b]) << ','
             << fmt(h.leads.bin_edges[b + 1]) << ',' << h.leads.bin_counts[b] << '\n';
      auto& ls = lead_series[t.head];
      ls.name = t.head;
      ls.x.push_back(static_cast<double>(r.version));
      ls.y.push_back(h.leads.median());
      auto& fs1 = f1_series[t.head];
      fs1.name = t.head;
      fs1.x.push_back(static_cast<double>(r.version));
      fs1.y.push_back(t.f1);
      if (t.head == evaluation::kPooledTowerHead) {
        std::cout << "  tower_destroyed: F1 " << fmt(t.f1) << " (baseline " << fmt(t.baseline_f1) << "), theta "
                  << fmt(t.theta) << ", H " << t.horizon << ", median lead " << fmt(h.leads.median()) << "\n";
        svg::write_file((fs::path(a.out) / ("leadtime_hist_" + std::to_string(r.version) + ".svg")).string(),
                        svg::histogram("tower_destroyed lead times, version " + std::to_string(r.version),
                                       "lead time (frames)", h.leads.bin_edges, h.leads.bin_counts));
      }
    }
  }
  auto chart = [&](const std::map<std::string, svg::Series>& series, const std::string& title,
                   const std::string& ylabel, const std::string& file) {
    svg::Chart c;
    c.title = title;
    c.x_label = "version";
    c.y_label = ylabel;
    for (const auto& [name, s] : series)
      if (name.rfind("tower", 0) == 0 || name == "kill" || name == "death") c.series.push_back(s);
    svg::write_file((fs::path(a.out) / file).string(), svg::line_chart(c));
  };
  chart(lead_series, "median lead time by version", "median lead (frames)", "leadtime_trend.svg");
  chart(f1_series, "probe F1 by version", "F1", "probe_f1.svg");

  std::ofstream trend(fs::path(a.out) / "leadtime_trend.csv");
  trend << "head,version,median_lead\n";
  for (const auto& [name, s] : lead_series)
    for (std::size_t i = 0; i < s.x.size(); ++i) trend << name << ',' << s.x[i] << ',' << fmt(s.y[i]) << '\n';
  return 0;
}

// ---- similarity --------------------------------------------------------------

struct SimilarityArgs {
  std::string checkpoints, pairs, out;
  std::size_t samples = 1000;
};

int cmd_similarity(const SimilarityArgs& a) {
  const auto list = require_checkpoints(a.checkpoints);
  RunConfig cfg = config_from_checkpoint(list.front());
  const auto pairs = a.pairs.empty() ? similarity::default_pairs(cfg.env) : similarity::load_pairs(a.pairs, cfg.env);
  write_resolved(a.out, cfg, "similarity",
                 {{"checkpoints", a.checkpoints}, {"pairs", a.pairs}, {"samples", a.samples}});
  const auto t = similarity::trajectory(list, pairs, a.samples, cfg.seed);
  svg::write_file((fs::path(a.out) / "similarity.csv").string(), similarity::to_csv(t));
  svg::write_file((fs::path(a.out) / "similarity.svg").string(), similarity::to_svg(t));
  for (const auto& v : t.versions)
    std::cout << "version " << v.version << ": similar " << fmt(v.group_mean(pairs, "similar")) << ", control "
              << fmt(v.group_mean(pairs, "control")) << ", random baseline " << fmt(v.baseline_mean) << " (std "
              << fmt(v.baseline_std) << ")\n";
  return 0;
}

// ---- annotate-replay -----------------------------------------------------------

struct AnnotateArgs {
  std::string replay, checkpoint, out;
  std::optional<double> threshold;
  std::optional<std::size_t> horizon;
};

int cmd_annotate(const AnnotateArgs& a) {
  auto loaded = persistence::load_model(a.checkpoint);
  apply_seed_override(loaded.config);
  const auto replay = persistence::load_replay(a.replay);
  annotate::AnnotationConfig ac;
  ac.threshold = a.threshold.value_or(loaded.config.eval.annotation_threshold);
  ac.horizon = a.horizon.value_or(loaded.config.eval.annotation_horizon);
  write_resolved(a.out, loaded.config, "annotate-replay",
                 {{"replay", a.replay}, {"checkpoint", a.checkpoint}, {"threshold", ac.threshold},
                  {"horizon", ac.horizon}});
  const auto ann = annotate::annotate(*loaded.model, loaded.config.env, replay, ac);
  svg::write_file((fs::path(a.out) / "annotations.csv").string(), annotate::to_csv(ann));
  svg::write_file((fs::path(a.out) / "timeline.svg").string(), annotate::timeline_svg(ann, ac));
  svg::write_file((fs::path(a.out) / "map.svg").string(), annotate::map_svg(ann, replay.header.env));
  std::size_t fight = 0, flight = 0;
  for (const auto& f : ann.frames) fight += f.fight, flight += f.flight;
  std::cout << ann.frames.size() << " frames: " << fight << " fight, " << flight << " flight\n";
  if (ann.logged_deviation)
    std::cout << "max deviation from logged probe outputs: " << fmt(*ann.logged_deviation) << "\n";
  return 0;
}

// ---- winprob-replay ----------------------------------------------------------

struct WinprobArgs {
  std::string replay, checkpoints, out;
};

int cmd_winprob(const WinprobArgs& a) {
  const auto list = require_checkpoints(a.checkpoints);
  RunConfig cfg = config_from_checkpoint(list.back());
  const auto replays = load_replays(a.replay);
  write_resolved(a.out, cfg, "winprob-replay", {{"replay", a.replay}, {"checkpoints", a.checkpoints}});
  const auto curves = evaluation::winprob_replay(list, replays);
  std::vector<double> outcomes;
  for (const auto& r : replays) outcomes.push_back(rollout::replay_won(r) ? 1.0 : 0.0);

  std::ofstream summary(fs::path(a.out) / "winprob_summary.csv");
  summary << "version,mean_abs_deviation_to_final,brier\n";
  svg::Chart chart;
  chart.title = "win probability, replay 0";
  chart.x_label = "frame";
  chart.y_label = "P(win)";
  for (const auto& wc : curves) {
    std::ofstream f(fs::path(a.out) / ("winprob_" + std::to_string(wc.version) + ".csv"));
    f << "replay,frame,win_prob\n";
    for (std::size_t r = 0; r < wc.curves.size(); ++r)
      for (std::size_t t = 0; t < wc.curves[r].size(); ++t)
        f << r << ',' << replays[r].frames[t].frame << ',' << fmt(wc.curves[r][t]) << '\n';
    const double mad = evaluation::mean_abs_deviation(wc.curves, curves.back().curves);
    const double brier = evaluation::brier_score(wc.curves, outcomes);
    summary << wc.version << ',' << fmt(mad) << ',' << fmt(brier) << '\n';
    std::cout << "version " << wc.version << ": deviation from final " << fmt(mad) << ", Brier " << fmt(brier)
              << "\n";
    svg::Series s{"v" + std::to_string(wc.version), {}, wc.curves.front(), false};
    for (std::size_t t = 0; t < s.y.size(); ++t) s.x.push_back(static_cast<double>(t));
    chart.series.push_back(std::move(s));
  }
  svg::write_file((fs::path(a.out) / "winprob.svg").string(), svg::line_chart(chart));
  return 0;
}

// ---- grad-check ----------------------------------------------------------------

int cmd_grad_check(std::uint64_t seed, const std::string& out) {
  const auto reports = nn::run_grad_suite(seed);
  bool ok = true;
  std::ostringstream csv;
  csv << "fragment,params,max_relative_error,worst_param,pass\n";
  for (const auto& r : reports) {
    std::printf("%-28s %6zu params  max rel err %.3e  %s\n", r.name.c_str(), r.num_params, r.max_relative_error,
                r.pass ? "PASS" : "FAIL");
    csv << r.name << ',' << r.num_params << ',' << fmt(r.max_relative_error) << ',' << r.worst_param << ','
        << (r.pass ? 1 : 0) << '\n';
    ok = ok && r.pass;
  }
  if (!out.empty()) {
    RunConfig cfg;
    cfg.seed = seed;
    write_resolved(out, cfg, "grad-check", {{"seed", seed}});
    svg::write_file((fs::path(out) / "grad_check.csv").string(), csv.str());
  }
  if (!ok) {
    std::cerr << "error: gradient check failed\n";
    return NumericError("").exit_code();
  }
  return 0;
}

// ---- rollout -------------------------------------------------------------------

struct RolloutArgs {
  std::string checkpoint, out;
  std::size_t episodes = 20;
  bool full_obs = false;
  bool greedy = false;
};

int cmd_rollout(const RolloutArgs& a) {
  auto loaded = persistence::load_model(a.checkpoint);
  apply_seed_override(loaded.config);
  write_resolved(a.out, loaded.config, "rollout",
                 {{"checkpoint", a.checkpoint}, {"episodes", a.episodes}, {"full_obs", a.full_obs},
                  {"greedy", a.greedy}});
  std::size_t wins = 0;
  for (std::size_t i = 0; i < a.episodes; ++i) {
    rollout::EpisodeOptions opts;
    opts.full_obs = a.full_obs;
    opts.greedy = a.greedy;
    const auto trace = rollout::run_episode(*loaded.model, loaded.config.env,
                                            derive_seed(loaded.config.seed, 7'000'000 + 2 * i),
                                            derive_seed(loaded.config.seed, 7'000'001 + 2 * i), opts);
    wins += trace.outcome == env::Outcome::Win;
    char name[32];
    std::snprintf(name, sizeof name, "replay_%04zu.jsonl", i);
    persistence::write_replay(fs::path(a.out) / name, trace.replay);
  }
  std::cout << a.episodes << " episodes, " << wins << " wins\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planprobe: recurrent PPO agent with hidden-state probes on a lane gridworld"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train the agent and its probes");
  t->add_option("--config", train.config, "run config JSON (defaults when omitted)")->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "output directory")->required();
  t->add_option("--steps", train.steps, "optimizer updates");
  t->add_option("--workers", train.workers, "rollout worker threads");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval-probes", "threshold selection, F1 and lead times per checkpoint");
  e->add_option("--checkpoints", eval.checkpoints, "checkpoint directory")->required();
  e->add_option("--episodes", eval.episodes, "evaluation episodes per checkpoint");
  e->add_option("--heldout", eval.heldout, "held-out episodes for threshold selection");
  e->add_option("--versions", eval.versions, "comma-separated versions (default: all)");
  e->add_option("--out", eval.out, "output directory")->required();

  SimilarityArgs sim;
  auto* s = app.add_subcommand("similarity", "embedding cosine similarity across checkpoints");
  s->add_option("--checkpoints", sim.checkpoints, "checkpoint directory")->required();
  s->add_option("--pairs", sim.pairs, "pair list JSON (default: same-class ability pairs)");
  s->add_option("--samples", sim.samples, "random row pairs for the baseline");
  s->add_option("--out", sim.out, "output directory")->required();

  AnnotateArgs ann;
  auto* an = app.add_subcommand("annotate-replay", "fight/flight and predicted-target annotations");
  an->add_option("--replay", ann.replay, "replay JSONL")->required()->check(CLI::ExistingFile);
  an->add_option("--checkpoint", ann.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  an->add_option("--threshold", ann.threshold, "kill/death spike threshold");
  an->add_option("--horizon", ann.horizon, "predicted-target horizon in frames");
  an->add_option("--out", ann.out, "output directory")->required();

  WinprobArgs win;
  auto* w = app.add_subcommand("winprob-replay", "teacher-forced win probability per checkpoint");
  w->add_option("--replay", win.replay, "replay JSONL or a directory of them")->required()->check(CLI::ExistingPath);
  w->add_option("--checkpoints", win.checkpoints, "checkpoint directory")->required();
  w->add_option("--out", win.out, "output directory")->required();

  std::uint64_t grad_seed = 1;
  std::string grad_out;
  auto* g = app.add_subcommand("grad-check", "finite-difference gradient verification");
  g->add_option("--seed", grad_seed, "fragment initialization seed");
  g->add_option("--out", grad_out, "optional output directory for grad_check.csv");

  RolloutArgs roll;
  auto* r = app.add_subcommand("rollout", "play episodes with a checkpoint and write replays");
  r->add_option("--checkpoint", roll.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  r->add_option("--episodes", roll.episodes, "number of episodes");
  r->add_flag("--full-obs", roll.full_obs, "store encoded observations in the replay");
  r->add_flag("--greedy", roll.greedy, "argmax actions instead of sampling");
  r->add_option("--out", roll.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : ConfigError("").exit_code();
  }

  try {
    if (*t) return cmd_train(train);
    if (*e) return cmd_eval_probes(eval);
    if (*s) return cmd_similarity(sim);
    if (*an) return cmd_annotate(ann);
    if (*w) return cmd_winprob(win);
    if (*g) return cmd_grad_check(grad_seed, grad_out);
    if (*r) return cmd_rollout(roll);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return err.exit_code();
  } catch (const nlohmann::json::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return DataError("").exit_code();
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
