#include "planprobe/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "planprobe/rollout.hpp"
#include "planprobe/svg.hpp"

namespace planprobe::annotate {

ReplayAnnotation annotate(const AgentModel& model, const env::EnvConfig& model_env,
                          const persistence::Replay& replay, const AnnotationConfig& config) {
  const auto tf = rollout::teacher_force(model, model_env, replay);
  std::vector<agent::EncodedObs> rebuilt;
  if (!replay.header.full_obs) rebuilt = rollout::reconstruct_observations(replay);

  ReplayAnnotation out;
  for (std::size_t k = 0; k < model.probes.size(); ++k) out.heads.push_back(model.probes.spec(k).name);
  out.outputs = tf.probe_outputs;

  std::optional<std::size_t> kill, death;
  for (std::size_t k = 0; k < model.probes.size(); ++k) {
    if (model.probes.spec(k).target == probes::ProbeTarget::Kill) kill = k;
    if (model.probes.spec(k).target == probes::ProbeTarget::Death) death = k;
  }

  const double g1 = static_cast<double>(replay.header.env.grid_size - 1);
  for (std::size_t t = 0; t < replay.frames.size(); ++t) {
    const auto& obs = replay.header.full_obs ? *replay.frames[t].obs : rebuilt[t];
    FrameAnnotation f;
    f.frame = replay.frames[t].frame;
    f.agent_x = static_cast<int>(std::lround(obs.numeric[0] * g1));
    f.agent_y = static_cast<int>(std::lround(obs.numeric[1] * g1));
    if (kill) f.kill = out.outputs(*kill, t);
    if (death) f.death = out.outputs(*death, t);
    f.fight = f.kill > config.threshold;
    f.flight = f.death > config.threshold;
    for (std::size_t k = 0; k < model.probes.size(); ++k) {
      const auto& spec = model.probes.spec(k);
      if (spec.kind != probes::ProbeKind::Milestone) continue;
      const double level = std::pow(spec.gamma, static_cast<double>(config.horizon));
      if (out.outputs(k, t) < level) continue;
      if (spec.target == probes::ProbeTarget::ReachRegion) f.regions.push_back(spec.index);
      if (spec.target == probes::ProbeTarget::TowerDestroyed) f.towers.push_back(spec.index);
    }
    out.frames.push_back(std::move(f));
  }

  if (replay.header.probe_heads == out.heads) {
    double worst = 0.0;
    bool any = false;
    for (std::size_t t = 0; t < replay.frames.size(); ++t) {
      const auto& logged = replay.frames[t].probes;
      if (!logged) continue;
      any = true;
      for (std::size_t k = 0; k < logged->size(); ++k)
        worst = std::max(worst, std::abs((*logged)[k] - out.outputs(k, t)));
    }
    if (any) out.logged_deviation = worst;
  }
  return out;
}

namespace {

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

std::string to_csv(const ReplayAnnotation& a) {
  std::ostringstream o;
  o << "frame,agent_x,agent_y,kill,death,fight,flight,predicted_regions,predicted_towers\n";
  char buf[64];
  for (const auto& f : a.frames) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", f.kill, f.death);
    o << f.frame << ',' << f.agent_x << ',' << f.agent_y << ',' << buf << ',' << int(f.fight) << ','
      << int(f.flight) << ',' << join(f.regions) << ',' << join(f.towers) << '\n';
  }
  return o.str();
}

std::string timeline_svg(const ReplayAnnotation& a, const AnnotationConfig& config) {
  svg::Chart chart;
  chart.title = "kill / death predictions";
  chart.x_label = "frame";
  chart.y_label = "probability";
  svg::Series kill{"kill", {}, {}, false}, death{"death", {}, {}, false};
  svg::Series thr{"threshold", {}, {}, true}, fight{"fight", {}, {}, false}, flight{"flight", {}, {}, false};
  for (const auto& f : a.frames) {
    const double x = f.frame;
    kill.x.push_back(x);
    kill.y.push_back(f.kill);
    death.x.push_back(x);
    death.y.push_back(f.death);
    fight.x.push_back(x);
    fight.y.push_back(f.fight ? 1.02 : NAN);
    flight.x.push_back(x);
    flight.y.push_back(f.flight ? 1.05 : NAN);
  }
  if (!a.frames.empty()) {
    thr.x = {static_cast<double>(a.frames.front().frame), static_cast<double>(a.frames.back().frame)};
    thr.y = {config.threshold, config.threshold};
  }
  chart.series = {kill, death, thr, fight, flight};
  return svg::line_chart(chart);
}

std::string map_svg(const ReplayAnnotation& a, const env::EnvConfig& env_config, std::size_t stride) {
  const env::Env env(env_config, 0);
  const int g = env_config.grid_size;
  const double cell = 24.0, pad = 30.0;
  const double size = pad * 2 + cell * g;
  auto px = [&](int x) { return pad + cell * (x + 0.5); };
  auto py = [&](int y) { return pad + cell * (g - 1 - y + 0.5); };

  std::ostringstream o;
  o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size << "' height='" << size + 20 << "'>\n";
  o << "<rect width='100%' height='100%' fill='white'/>\n";
  o << "<rect x='" << pad << "' y='" << pad << "' width='" << cell * g << "' height='" << cell * g
    << "' fill='#f4f4f4' stroke='#999'/>\n";
  o << "<text x='" << size / 2 << "' y='20' text-anchor='middle' font-size='14'>predicted tower targets (red)</text>\n";
  auto square = [&](int x, int y, const char* color, const std::string& label) {
    o << "<rect x='" << px(x) - cell * 0.4 << "' y='" << py(y) - cell * 0.4 << "' width='" << cell * 0.8
      << "' height='" << cell * 0.8 << "' fill='" << color << "'><title>" << svg::escape(label)
      << "</title></rect>\n";
  };
  const auto [ox, oy] = env.own_base_pos();
  const auto [ex, ey] = env.enemy_base_pos();
  square(ox, oy, "#2ca02c", "own base");
  square(ex, ey, "#8c564b", "enemy base");
  for (int k = 0; k < env_config.num_towers; ++k) {
    const auto [tx, ty] = env.tower_pos(k);
    square(tx, ty, "#7f7f7f", "tower " + std::to_string(k));
  }

  o << "<polyline fill='none' stroke='#1f77b4' stroke-width='1.5' stroke-opacity='0.6' points='";
  for (const auto& f : a.frames) o << px(f.agent_x) << ',' << py(f.agent_y) << ' ';
  o << "'/>\n";
  const std::size_t step = std::max<std::size_t>(stride, 1);
  for (std::size_t i = 0; i < a.frames.size(); i += step) {
    const auto& f = a.frames[i];
    for (int k : f.towers) {
      const auto [tx, ty] = env.tower_pos(k);
      o << "<line x1='" << px(f.agent_x) << "' y1='" << py(f.agent_y) << "' x2='" << px(tx) << "' y2='" << py(ty)
        << "' stroke='#d62728' stroke-opacity='0.35'><title>frame " << f.frame << "</title></line>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace planprobe::annotate
