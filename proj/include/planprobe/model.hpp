#pragma once

#include <cstdint>

#include "planprobe/policy.hpp"
#include "planprobe/probes.hpp"

namespace planprobe {

/// Everything that is versioned together: the recurrent policy (with its
/// embedding table) and the hidden-state decoder heads.
struct AgentModel {
  agent::PolicyNet policy;
  probes::ProbeSet probes;
  std::uint64_t version = 0;

  nn::ParamList policy_params() { return policy.params(); }
  nn::ParamList probe_params() { return probes.params(); }
  nn::ParamList all_params() {
    auto p = policy.params();
    for (auto* x : probes.params()) p.push_back(x);
    return p;
  }
};

}  // namespace planprobe
