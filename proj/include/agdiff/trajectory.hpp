#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "agdiff/particle_state.hpp"

namespace agdiff {

/// One diagnostics sample; CSV column order follows the member order.
struct DiagnosticsRow {
  double t = 0.0;
  double min_gap = 0.0;
  double max_density = 0.0;
  double energy = 0.0;
  double interaction_energy = 0.0;
  double internal_energy = 0.0;
  double w12 = 0.0;
  double tv_phi = 0.0;
  double w1_from_init = 0.0;
  double energy_rate = 0.0;
};

inline const char* diagnostics_header() {
  return "t,min_gap,max_density,energy,interaction_energy,internal_energy,w12,tv_phi,w1_from_init,energy_rate";
}

struct Termination {
  enum class Kind { completed, gap_collapse, step_floor };
  Kind kind = Kind::completed;
  double t = 0.0;
  std::size_t index = 0; // offending gap for gap_collapse
};

inline const char* to_string(Termination::Kind k) {
  switch (k) {
    case Termination::Kind::completed: return "completed";
    case Termination::Kind::gap_collapse: return "gap_collapse";
    case Termination::Kind::step_floor: return "step_floor";
  }
  return "?";
}

struct StepStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  double dt_min = 0.0;
  double dt_max = 0.0;
};

struct Trajectory {
  std::vector<ParticleState> snapshots; // strictly increasing times
  std::vector<DiagnosticsRow> rows;
  Termination termination;
  StepStats stats;
  double local_existence_time = 0.0; // 1 / (2 ||K'||_inf ||rho^N(0)||_inf)

  bool completed() const { return termination.kind == Termination::Kind::completed; }
};

} // namespace agdiff
