#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "planprobe/model.hpp"
#include "planprobe/replay.hpp"

namespace planprobe::annotate {

struct AnnotationConfig {
  double threshold = 0.5;    // kill/death spike level
  std::size_t horizon = 60;  // display window for predicted targets, frames
};

struct FrameAnnotation {
  std::uint32_t frame = 0;
  int agent_x = 0;
  int agent_y = 0;
  double kill = 0.0;
  double death = 0.0;
  bool fight = false;   // kill head above threshold
  bool flight = false;  // death head above threshold
  std::vector<int> regions;  // predicted to be reached within the horizon
  std::vector<int> towers;   // predicted to fall within the horizon
};

struct ReplayAnnotation {
  std::vector<std::string> heads;
  Matrix outputs;  // heads x T, teacher-forced
  std::vector<FrameAnnotation> frames;
  /// Largest |teacher-forced - logged| probe output when the replay carries
  /// probe outputs from a model with the same heads.
  std::optional<double> logged_deviation;
};

/// Teacher-forces the replay through `model` and marks fight/flight frames
/// and predicted targets. A milestone head predicts its event within the
/// horizon when its output is at least gamma^horizon.
ReplayAnnotation annotate(const AgentModel& model, const env::EnvConfig& model_env,
                          const persistence::Replay& replay, const AnnotationConfig& config = {});

std::string to_csv(const ReplayAnnotation& a);
/// Kill/death probabilities over time with fight/flight bands.
std::string timeline_svg(const ReplayAnnotation& a, const AnnotationConfig& config);
/// Lane map: agent path, structures, and a red line from the agent to each
/// tower it is predicted to destroy, sampled every `stride` frames.
std::string map_svg(const ReplayAnnotation& a, const env::EnvConfig& env, std::size_t stride = 8);

}  // namespace planprobe::annotate
