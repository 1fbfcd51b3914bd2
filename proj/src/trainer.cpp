#include "planprobe/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "planprobe/checkpoint.hpp"

namespace planprobe {

AgentModel make_agent_model(const RunConfig& config) {
  auto specs = probes::default_probe_specs(config.env, config.probes.gamma, config.probes.hidden_width);
  return AgentModel{agent::PolicyNet(config.env, config.policy, derive_seed(config.seed, 1)),
                    probes::ProbeSet(std::move(specs), config.policy.hidden_size, derive_seed(config.seed, 2)), 0};
}

std::uint64_t worker_env_seed(const RunConfig& config, std::uint64_t i) {
  return derive_seed(derive_seed(config.seed, config.env.rng_seed), 1000 + i);
}

std::uint64_t worker_policy_seed(const RunConfig& config, std::uint64_t i) {
  return derive_seed(config.seed, 5000 + i);
}

Trainer::Trainer(RunConfig config) : config_(std::move(config)) {
  config_.validate();
  model_ = std::make_unique<AgentModel>(make_agent_model(config_));
  learner_ = std::make_unique<agent::PpoLearner>(*model_, config_.ppo, config_.probes.train, derive_seed(config_.seed, 3));
  for (std::size_t i = 0; i < config_.slicing.num_envs; ++i)
    workers_.emplace_back(config_.env, worker_env_seed(config_, i), worker_policy_seed(config_, i),
                          config_.slicing.slice_length, i);
}

UpdateRecord Trainer::step() {
  slicing::ParameterSnapshot snapshot{model_->version, std::make_shared<const AgentModel>(*model_)};
  std::vector<slicing::Slice> slices;
  slices.reserve(workers_.size());
  for (auto& w : workers_) slices.push_back(w.next_slice(snapshot));
  for (auto& w : workers_)
    for (const auto& e : w.take_finished()) {
      window_.push_back(e);
      ++episodes_;
    }
  return apply(std::move(slices), 0);
}

UpdateRecord Trainer::apply(std::vector<slicing::Slice> slices, std::size_t dropped) {
  while (window_.size() > config_.train.metrics_window) window_.pop_front();
  for (const auto& s : slices) frames_ += s.size();
  auto batch = slicing::assemble_batch(std::move(slices), config_.ppo.bptt_horizon);

  UpdateRecord rec;
  rec.ppo = learner_->update(batch);
  ++model_->version;
  rec.version = model_->version;
  rec.frames = frames_;
  rec.episodes = episodes_;
  rec.stale_dropped = dropped;
  rec.window_size = window_.size();
  for (const auto& e : window_) {
    rec.window_return += e.total_return;
    rec.window_win_rate += e.outcome == env::Outcome::Win ? 1.0 : 0.0;
  }
  if (!window_.empty()) {
    rec.window_return /= static_cast<double>(window_.size());
    rec.window_win_rate /= static_cast<double>(window_.size());
  }
  return rec;
}

ParallelTrainer::ParallelTrainer(RunConfig config, std::size_t workers)
    : inner_(std::move(config)), queue_(inner_.config().slicing.queue_capacity) {
  if (workers == 0) throw ConfigError("slicing.workers: must be >= 1");
  if (workers > inner_.workers_.size()) throw ConfigError("slicing.workers: must not exceed slicing.num_envs");
  publish();
  for (std::size_t t = 0; t < workers; ++t) {
    threads_.emplace_back([this, t, workers] {
      try {
        while (!stop_.load()) {
          for (std::size_t i = t; i < inner_.workers_.size() && !stop_.load(); i += workers) {
            auto slice = inner_.workers_[i].next_slice(slot_.current());
            inner_.workers_[i].take_finished();
            if (!queue_.push(std::move(slice))) return;
          }
        }
      } catch (...) {
        {
          std::lock_guard lock(error_mutex_);
          if (!worker_error_) worker_error_ = std::current_exception();
        }
        queue_.close();
      }
    });
  }
}

ParallelTrainer::~ParallelTrainer() {
  stop_.store(true);
  queue_.close();
  for (auto& t : threads_) t.join();
}

void ParallelTrainer::publish() {
  slot_.publish({inner_.model_->version, std::make_shared<const AgentModel>(*inner_.model_)});
}

UpdateRecord ParallelTrainer::step() {
  const std::size_t want = inner_.workers_.size();
  const std::uint64_t current = inner_.model_->version;
  std::vector<slicing::Slice> kept;
  std::size_t dropped = 0;
  while (kept.size() < want) {
    auto s = queue_.pop();
    if (!s) {
      std::lock_guard lock(error_mutex_);
      if (worker_error_) std::rethrow_exception(worker_error_);
      throw Error("rollout worker stopped unexpectedly");
    }
    // Episode bookkeeping sees every produced slice, stale or not.
    auto& [ret, len] = running_[s->worker_id];
    for (const auto& tr : s->transitions) ret += tr.reward();
    len += s->size();
    if (s->terminal) {
      inner_.window_.push_back({s->worker_id, s->episode_index, len, ret, s->outcome});
      ++inner_.episodes_;
      ret = 0.0;
      len = 0;
    }
    if (current - s->parameter_version > inner_.config_.slicing.max_staleness) {
      ++dropped;
      continue;
    }
    max_staleness_seen_ = std::max(max_staleness_seen_, current - s->parameter_version);
    kept.push_back(std::move(*s));
  }
  auto rec = inner_.apply(std::move(kept), dropped);
  publish();
  return rec;
}

std::string metrics_csv_header() {
  return "version,frames,episodes,win_rate,mean_return,window,policy_loss,value_loss,entropy,clip_fraction,"
         "approx_kl,grad_norm,probe_loss,stale_dropped";
}

std::string metrics_csv_row(const UpdateRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%llu,%llu,%llu,%.6f,%.6f,%zu,%.9g,%.9g,%.9g,%.6f,%.9g,%.9g,%.9g,%zu",
                static_cast<unsigned long long>(r.version), static_cast<unsigned long long>(r.frames),
                static_cast<unsigned long long>(r.episodes), r.window_win_rate, r.window_return, r.window_size,
                r.ppo.policy_loss, r.ppo.value_loss, r.ppo.entropy, r.ppo.clip_fraction, r.ppo.approx_kl,
                r.ppo.grad_norm, r.ppo.mean_probe_loss(), r.stale_dropped);
  return buf;
}

TrainResult run_training(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream* log) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream cfg(out_dir / "config.resolved.json");
    auto doc = to_json(config);
    doc["tool_version"] = kToolVersion;
    cfg << doc.dump(2) << "\n";
  }
  std::ofstream metrics(out_dir / "metrics.csv");
  metrics << metrics_csv_header() << "\n";

  TrainResult result;
  auto save = [&](AgentModel& model, std::uint64_t frames) {
    auto path = persistence::checkpoint_path(out_dir, model.version);
    persistence::save_model(path, model, config, frames);
    result.checkpoints.push_back(path);
  };
  auto log_line = [&](const UpdateRecord& r) {
    if (!log) return;
    char buf[200];
    std::snprintf(buf, sizeof buf, "update %llu frames %llu episodes %llu win_rate %.3f return %.3f entropy %.3f\n",
                  static_cast<unsigned long long>(r.version), static_cast<unsigned long long>(r.frames),
                  static_cast<unsigned long long>(r.episodes), r.window_win_rate, r.window_return, r.ppo.entropy);
    *log << buf << std::flush;
  };

  auto drive = [&](auto& trainer) {
    save(trainer.model(), 0);
    for (std::size_t i = 0; i < config.train.steps; ++i) {
      const UpdateRecord r = trainer.step();
      metrics << metrics_csv_row(r) << "\n";
      if (r.version % config.train.checkpoint_every == 0 || i + 1 == config.train.steps) {
        save(trainer.model(), r.frames);
        log_line(r);
      }
    }
    result.final_version = trainer.model().version;
    result.frames = trainer.frames();
  };

  if (config.slicing.workers <= 1) {
    Trainer trainer(config);
    drive(trainer);
  } else {
    ParallelTrainer trainer(config, config.slicing.workers);
    drive(trainer);
  }
  return result;
}

}  // namespace planprobe
