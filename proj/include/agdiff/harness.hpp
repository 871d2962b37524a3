#pragma once

// Experiment orchestration behind the command-line tool: single runs, the
// N / L / vacuum-floor sweeps, assumption validation and reference solves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agdiff/config.hpp"
#include "agdiff/diagnostics.hpp"
#include "agdiff/dynamics.hpp"
#include "agdiff/initial_data.hpp"
#include "agdiff/kernels.hpp"
#include "agdiff/nonlinearity.hpp"
#include "agdiff/oracle.hpp"
#include "agdiff/parallel.hpp"
#include "agdiff/particle_state.hpp"

namespace agdiff {

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    require(static_cast<bool>(os), "cannot write " + tmp.string());
    os << content;
    require(static_cast<bool>(os), "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Random ordered state: base particle uniform in the window, gaps drawn
/// log-uniformly over `decades` orders of magnitude and scaled to fill L.
template <class Rng>
ParticleState random_state(const TorusDomain& d, std::size_t n, Rng& rng, double decades = 3.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> g(n);
  double total = 0.0;
  for (double& v : g) {
    v = std::pow(10.0, -decades * u(rng));
    total += v;
  }
  std::vector<double> x(n);
  x[0] = d.left() + d.length() * u(rng);
  if (x[0] >= d.right()) x[0] = d.left();
  for (std::size_t k = 1; k < n; ++k) x[k] = x[k - 1] + g[k - 1] * d.length() / total;
  return ParticleState(d, std::move(x));
}

struct Problem {
  RunConfig cfg;
  Kernel kernel;
  Nonlinearity nl;
  DensityProfile profile;
  ParticleState initial;
};

inline Problem make_problem(const RunConfig& cfg) {
  Kernel k = build_kernel(cfg.kernel);
  Nonlinearity nl = build_nonlinearity(cfg.phi);
  DensityProfile p = make_profile(cfg.initial, cfg.domain);
  ParticleState s = init_from_density(p, cfg.n_particles, cfg.domain);
  return Problem{cfg, std::move(k), std::move(nl), std::move(p), std::move(s)};
}

struct RunResult {
  Trajectory traj;
  DiagnosticsResult diag;
  std::optional<HolderFit> holder;

  double max_density() const {
    double m = 0.0;
    for (const auto& r : diag.rows) m = std::max(m, r.max_density);
    return m;
  }
};

inline RunResult run_problem(const Problem& p) {
  RunResult r;
  r.traj = simulate(p.initial, p.kernel, p.nl, p.cfg.integrator);
  DiagnosticsOptions opt;
  opt.check_points = p.cfg.check_points;
  r.diag = compute_diagnostics(r.traj.snapshots, p.kernel, p.nl, opt);
  r.traj.rows = r.diag.rows;
  if (r.traj.snapshots.size() >= 2) r.holder = holder_fit(r.traj.snapshots);
  return r;
}

inline std::string diagnostics_csv(const std::vector<DiagnosticsRow>& rows) {
  std::ostringstream os;
  os << diagnostics_header() << '\n';
  for (const auto& r : rows) {
    os << format_double(r.t) << ',' << format_double(r.min_gap) << ',' << format_double(r.max_density) << ','
       << format_double(r.energy) << ',' << format_double(r.interaction_energy) << ','
       << format_double(r.internal_energy) << ',' << format_double(r.w12) << ',' << format_double(r.tv_phi) << ','
       << format_double(r.w1_from_init) << ',' << format_double(r.energy_rate) << '\n';
  }
  return os.str();
}

inline std::string grid_csv(const GridDensity& g) {
  std::ostringstream os;
  write_grid_csv(os, g);
  return os.str();
}

inline nlohmann::json termination_json(const Termination& t) {
  nlohmann::json j;
  j["kind"] = to_string(t.kind);
  j["t"] = t.t;
  if (t.kind == Termination::Kind::gap_collapse) j["index"] = t.index;
  return j;
}

/// True when the run ended early before cfg.min_time.
inline bool premature(const RunConfig& cfg, const Trajectory& traj) {
  return !traj.completed() && traj.termination.t < cfg.min_time;
}

/// simulate subcommand: diagnostics.csv, final_state.csv, summary.json in
/// `dir`. Returns the process exit status.
inline int run_simulate(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& log = std::cerr) {
  const Problem p = make_problem(cfg);
  const RunResult r = run_problem(p);
  write_file_atomic(dir / "diagnostics.csv", diagnostics_csv(r.diag.rows));
  write_file_atomic(dir / "final_state.csv", grid_csv(to_grid(r.traj.snapshots.back(), cfg.grid_cells)));

  nlohmann::ordered_json s;
  s["termination"] = termination_json(r.traj.termination);
  s["n_particles"] = cfg.n_particles;
  s["max_density"] = r.max_density();
  s["energy_initial"] = r.diag.rows.front().energy;
  s["energy_final"] = r.diag.rows.back().energy;
  s["holder_constant"] = r.holder ? r.holder->constant : 0.0;
  s["holder_max_ratio"] = r.holder ? r.holder->max_ratio : 0.0;
  s["inequality_violations"] = r.diag.violations;
  s["max_positive_energy_rate"] = max_positive_rate(r.diag.rows);
  s["local_existence_time"] = r.traj.local_existence_time;
  s["winding_differs"] = r.diag.winding_differs;
  s["steps"] = r.traj.stats.steps;
  s["rejected_steps"] = r.traj.stats.rejected;
  s["dt_min"] = r.traj.stats.dt_min;
  s["dt_max"] = r.traj.stats.dt_max;
  write_file_atomic(dir / "summary.json", s.dump(2) + "\n");

  for (const auto& note : r.diag.violation_notes) log << "inequality violated: " << note << '\n';
  if (r.diag.winding_differs) log << "warning: net winding; anchored and periodic W1 may differ\n";
  if (premature(cfg, r.traj)) {
    log << "run ended with " << to_string(r.traj.termination.kind) << " at t=" << r.traj.termination.t
        << " before integrator.min_time=" << cfg.min_time << '\n';
    return 2;
  }
  return r.diag.violations == 0 ? 0 : 1;
}

/// Runs fn(i) for i in [0, jobs) as independent parallel jobs.
template <class Fn>
void run_jobs(std::size_t jobs, Fn&& fn) {
  parallel_for(jobs, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) fn(i);
  }, 1);
}

struct SweepNRow {
  std::size_t n = 0;
  Termination termination;
  double l1_spacetime = 0.0;
  double l1_final = 0.0;
  double max_positive_rate = 0.0;
  double max_density = 0.0;
  StepStats stats;
};

struct SweepNResult {
  std::vector<SweepNRow> rows;
  std::size_t oracle_cells = 0;
  bool monotone = true;
  std::vector<std::string> warnings;
};

inline std::vector<double> reference_times(const RunConfig& cfg) {
  return sample_times(cfg.integrator.t_end, cfg.integrator.sample_every);
}

/// Errors of each N against one finite-volume reference on oracle_m cells.
/// Monotone means every completed error is at most 1.1 times the previous one.
inline SweepNResult sweep_n(const RunConfig& cfg, const std::vector<std::size_t>& ns, std::size_t oracle_m) {
  require(ns.size() >= 3, "sweep-n needs at least three particle counts");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    require(ns[i] >= 32, "sweep-n particle counts must be >= 32");
    if (i > 0) require(ns[i] > ns[i - 1], "sweep-n particle counts must increase");
  }
  require(oracle_m >= 16, "oracle cell count must be at least 16");
  SweepNResult out;
  out.oracle_cells = oracle_m;
  out.rows.resize(ns.size());

  const Kernel kernel = build_kernel(cfg.kernel);
  const Nonlinearity nl = build_nonlinearity(cfg.phi);
  const DensityProfile profile = make_profile(cfg.initial, cfg.domain);
  FVConfig fv;
  fv.cell_count = oracle_m;
  fv.cfl = cfg.oracle_cfl;
  fv.t_end = cfg.integrator.t_end;
  fv.snapshot_times = reference_times(cfg);

  // job 0 is the reference; jobs 1.. are the particle runs
  FVResult ref;
  std::vector<Trajectory> trajs(ns.size());
  run_jobs(ns.size() + 1, [&](std::size_t job) {
    if (job == 0) {
      ref = fv_solve(sample_profile(profile, cfg.domain.length(), oracle_m), kernel, nl, fv);
      return;
    }
    const ParticleState s0 = init_from_density(profile, ns[job - 1], cfg.domain);
    trajs[job - 1] = simulate(s0, kernel, nl, cfg.integrator);
  });

  run_jobs(ns.size(), [&](std::size_t i) {
    SweepNRow& row = out.rows[i];
    const Trajectory& tr = trajs[i];
    row.n = ns[i];
    row.termination = tr.termination;
    row.stats = tr.stats;
    DiagnosticsOptions opt;
    opt.check_points = 0;
    const auto d = compute_diagnostics(tr.snapshots, kernel, nl, opt);
    row.max_positive_rate = max_positive_rate(d.rows);
    for (const auto& r : d.rows) row.max_density = std::max(row.max_density, r.max_density);
    const auto errs = compare_trajectories(tr.snapshots, ref.snapshots, oracle_m);
    row.l1_spacetime = space_time_l1(errs);
    row.l1_final = errs.back().l1;
  });

  std::optional<double> prev;
  for (const auto& row : out.rows) {
    if (row.termination.kind != Termination::Kind::completed) {
      out.warnings.push_back("N=" + std::to_string(row.n) + " ended with " + to_string(row.termination.kind) +
                             "; excluded from the monotonicity check");
      continue;
    }
    if (prev && row.l1_spacetime > 1.1 * *prev) out.monotone = false;
    prev = row.l1_spacetime;
  }
  return out;
}

inline std::string sweep_n_csv(const SweepNResult& r) {
  std::ostringstream os;
  os << "n,termination,t_reached,l1_spacetime,l1_final,max_positive_energy_rate,max_density,steps,rejected,dt_min,"
        "dt_max,oracle_cells\n";
  for (const auto& row : r.rows)
    os << row.n << ',' << to_string(row.termination.kind) << ',' << format_double(row.termination.t) << ','
       << format_double(row.l1_spacetime) << ',' << format_double(row.l1_final) << ','
       << format_double(row.max_positive_rate) << ',' << format_double(row.max_density) << ',' << row.stats.steps
       << ',' << row.stats.rejected << ',' << format_double(row.stats.dt_min) << ','
       << format_double(row.stats.dt_max) << ',' << r.oracle_cells << '\n';
  return os.str();
}

struct ChainRow {
  double param = 0.0; // L or eps
  std::size_t n = 0;
  Termination termination;
  double diff_to_prev = 0.0; // L1 difference to the previous entry (0 for the first)
  double max_density = 0.0;
  double seam_mass = 0.0;     // mass within 5% of the seam at t_end (sweep-domain)
  bool flagged = false;
  StepStats stats;
};

struct ChainResult {
  std::vector<ChainRow> rows;
  bool decreasing = true;
  std::vector<std::string> warnings;
};

namespace detail {

inline double seam_mass(const GridDensity& g) {
  const double band = 0.05 * g.length;
  double m = 0.0;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const double mid = g.cell_left(i) + 0.5 * g.cell_width();
    if (std::abs(mid) > 0.5 * g.length - band) m += g.values[i] * g.cell_width();
  }
  return m;
}

/// Cells of g (a grid on the larger torus) covering the window of length w.
inline GridDensity window(const GridDensity& g, double w) {
  const double h = g.cell_width();
  const double skip = 0.5 * (g.length - w) / h;
  const auto first = static_cast<std::size_t>(std::llround(skip));
  const auto cells = static_cast<std::size_t>(std::llround(w / h));
  require(std::abs(skip - static_cast<double>(first)) < 1e-6 && std::abs(w / h - static_cast<double>(cells)) < 1e-6,
          "domain lengths do not align on a common grid");
  return GridDensity(w, std::vector<double>(g.values.begin() + static_cast<std::ptrdiff_t>(first),
                                            g.values.begin() + static_cast<std::ptrdiff_t>(first + cells)));
}

inline void mark_decreasing(ChainResult& r) {
  for (std::size_t i = 2; i < r.rows.size(); ++i)
    if (!(r.rows[i].diff_to_prev < r.rows[i - 1].diff_to_prev)) r.decreasing = false;
}

} // namespace detail

/// Solves at each L with N/L fixed to cfg.n_particles / cfg.domain.L and
/// compares consecutive final densities on the smaller window.
inline ChainResult sweep_domain(const RunConfig& cfg, const std::vector<double>& ls) {
  require(ls.size() >= 2, "sweep-domain needs at least two domain lengths");
  for (std::size_t i = 1; i < ls.size(); ++i) require(ls[i] > ls[i - 1], "sweep-domain lengths must increase");
  const double density = static_cast<double>(cfg.n_particles) / cfg.domain.length();
  const double h = ls.front() / static_cast<double>(cfg.grid_cells);
  ChainResult out;
  out.rows.resize(ls.size());
  std::vector<GridDensity> finals(ls.size());

  {
    // first-moment hypothesis, checked on the largest window
    const TorusDomain big(ls.back(), cfg.domain.mass());
    const DensityProfile p = make_profile(cfg.initial, big);
    const TorusDomain small(ls.front(), cfg.domain.mass());
    const double inside = p.cumulative(0.5 * ls.front()) - p.cumulative(-0.5 * ls.front());
    if (inside < cfg.domain.mass() * (1.0 - 1e-9))
      out.warnings.push_back("initial datum carries mass outside the smallest window; c_L is held fixed");
    if (!std::isfinite(first_moment(p, ls.back())))
      out.warnings.push_back("initial datum has no finite first moment");
    (void)small;
  }

  run_jobs(ls.size(), [&](std::size_t i) {
    RunConfig c = cfg;
    c.domain = TorusDomain(ls[i], cfg.domain.mass());
    c.n_particles = static_cast<std::size_t>(std::llround(density * ls[i]));
    const Problem p = make_problem(c);
    const Trajectory tr = simulate(p.initial, p.kernel, p.nl, c.integrator);
    ChainRow& row = out.rows[i];
    row.param = ls[i];
    row.n = c.n_particles;
    row.termination = tr.termination;
    row.stats = tr.stats;
    for (const auto& s : tr.snapshots) row.max_density = std::max(row.max_density, s.max_density());
    const auto cells = static_cast<std::size_t>(std::llround(ls[i] / h));
    finals[i] = to_grid(tr.snapshots.back(), cells);
    row.seam_mass = detail::seam_mass(finals[i]);
    row.flagged = tr.snapshots.back().winding() != tr.snapshots.front().winding() ||
                  row.seam_mass > 1e-6 * cfg.domain.mass();
  });
  for (std::size_t i = 1; i < ls.size(); ++i)
    out.rows[i].diff_to_prev = l1_distance(detail::window(finals[i], ls[i - 1]), finals[i - 1]);
  for (const auto& row : out.rows) {
    if (row.flagged) out.warnings.push_back("L=" + format_double(row.param) + ": support reaches the seam");
    if (row.termination.kind != Termination::Kind::completed)
      out.warnings.push_back("L=" + format_double(row.param) + " ended with " + to_string(row.termination.kind));
  }
  detail::mark_decreasing(out);
  return out;
}

/// Solves with each vacuum floor and compares consecutive final densities.
inline ChainResult sweep_positivity(const RunConfig& cfg, const std::vector<double>& eps) {
  require(eps.size() >= 2, "sweep-positivity needs at least two floors");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    require(eps[i] > 0.0, "sweep-positivity floors must be positive");
    if (i > 0) require(eps[i] <= eps[i - 1], "sweep-positivity floors must not increase");
  }
  ChainResult out;
  out.rows.resize(eps.size());
  std::vector<GridDensity> finals(eps.size());
  run_jobs(eps.size(), [&](std::size_t i) {
    RunConfig c = cfg;
    c.initial.vacuum_floor = eps[i];
    const Problem p = make_problem(c);
    const Trajectory tr = simulate(p.initial, p.kernel, p.nl, c.integrator);
    ChainRow& row = out.rows[i];
    row.param = eps[i];
    row.n = c.n_particles;
    row.termination = tr.termination;
    row.stats = tr.stats;
    for (const auto& s : tr.snapshots) row.max_density = std::max(row.max_density, s.max_density());
    finals[i] = to_grid(tr.snapshots.back(), cfg.grid_cells);
  });
  for (std::size_t i = 1; i < eps.size(); ++i) out.rows[i].diff_to_prev = l1_distance(finals[i], finals[i - 1]);
  for (const auto& row : out.rows)
    if (row.termination.kind != Termination::Kind::completed)
      out.warnings.push_back("eps=" + format_double(row.param) + " ended with " + to_string(row.termination.kind));
  detail::mark_decreasing(out);
  return out;
}

inline std::string chain_csv(const ChainResult& r, const std::string& param_name) {
  std::ostringstream os;
  os << param_name << ",n,termination,t_reached,l1_to_prev,max_density,seam_mass,flagged,steps,rejected,dt_min,dt_max\n";
  for (const auto& row : r.rows)
    os << format_double(row.param) << ',' << row.n << ',' << to_string(row.termination.kind) << ','
       << format_double(row.termination.t) << ',' << format_double(row.diff_to_prev) << ','
       << format_double(row.max_density) << ',' << format_double(row.seam_mass) << ',' << (row.flagged ? 1 : 0)
       << ',' << row.stats.steps << ',' << row.stats.rejected << ',' << format_double(row.stats.dt_min) << ','
       << format_double(row.stats.dt_max) << '\n';
  return os.str();
}

struct ValidateOutcome {
  ValidationReport kernel;
  ValidationReport nonlinearity;
  std::size_t states = 0;
  std::size_t violations = 0;
  std::vector<std::string> warnings;
  int exit_code = 0;
};

/// Kernel and nonlinearity assumptions plus 100 random states through
/// check_inequalities. A failing W >= 0 check for m = 1 is only a warning.
inline ValidateOutcome run_validate(const RunConfig& cfg) {
  ValidateOutcome out;
  const Kernel k = build_kernel(cfg.kernel);
  const Nonlinearity nl = build_nonlinearity(cfg.phi);
  out.kernel = validate_kernel(k, 10000, 1e-9);
  const double rho_max = std::max(10.0, 10.0 * cfg.domain.mass() / cfg.domain.length());
  out.nonlinearity = validate_nonlinearity(nl, rho_max, 1000);

  std::mt19937_64 rng(20240613);
  const std::size_t n = std::clamp<std::size_t>(cfg.n_particles, 2, 64);
  out.states = 100;
  for (std::size_t i = 0; i < out.states; ++i) {
    const ParticleState s = random_state(cfg.domain, n, rng);
    out.violations += check_inequalities(s, k, nl, 4).violations();
  }

  bool ok = out.kernel.all_passed() && out.violations == 0;
  for (const auto& c : out.nonlinearity.checks) {
    if (c.passed) continue;
    if (c.name == "W_nonnegative" && nl.is_power_law() && nl.exponent() == 1.0) {
      out.warnings.push_back("m = 1: W(rho) = rho log rho - rho is negative on (0, e); expected, not an error");
      continue;
    }
    ok = false;
  }
  out.exit_code = ok ? 0 : 1;
  return out;
}

inline void print_report(std::ostream& os, const std::string& title, const ValidationReport& r) {
  os << title << '\n';
  for (const auto& c : r.checks) {
    os << "  " << (c.passed ? "ok   " : "FAIL ") << c.name;
    if (!c.passed) {
      if (c.witness) os << " witness=" << format_double(*c.witness);
      if (!c.detail.empty()) os << " (" << c.detail << ")";
    }
    os << '\n';
  }
}

struct OracleOutcome {
  FVResult fv;
  std::vector<TimedError> barenblatt_errors; // filled for K = 0 with a Barenblatt datum
};

/// Finite-volume reference at every sample time; with K = 0 and a Barenblatt
/// datum also the L1 error against the exact profile at t0 + t.
inline OracleOutcome run_oracle(const RunConfig& cfg, std::size_t m) {
  const Kernel k = build_kernel(cfg.kernel);
  const Nonlinearity nl = build_nonlinearity(cfg.phi);
  FVConfig fv;
  fv.cell_count = m;
  fv.cfl = cfg.oracle_cfl;
  fv.t_end = cfg.integrator.t_end;
  fv.snapshot_times = reference_times(cfg);
  const bool exact = k.is_zero() && cfg.initial.kind == InitialSpec::Kind::barenblatt && nl.is_power_law() &&
                     nl.exponent() == cfg.initial.m && cfg.initial.vacuum_floor == 0.0;
  GridDensity rho0;
  std::optional<Barenblatt> b;
  if (exact) {
    b.emplace(cfg.initial.m, cfg.domain.mass());
    require(std::abs(cfg.initial.center) + b->support_radius(cfg.initial.t0 + fv.t_end) < 0.5 * cfg.domain.length(),
            "Barenblatt support reaches the seam before t_end; enlarge domain.L");
    rho0 = barenblatt_grid(*b, cfg.initial.t0, cfg.domain.length(), m, cfg.initial.center);
  } else {
    rho0 = sample_profile(make_profile(cfg.initial, cfg.domain), cfg.domain.length(), m);
  }
  OracleOutcome out;
  out.fv = fv_solve(rho0, k, nl, fv);
  if (exact)
    for (const auto& s : out.fv.snapshots)
      out.barenblatt_errors.push_back(
          {s.t, l1_distance(s.density, barenblatt_grid(*b, cfg.initial.t0 + s.t, cfg.domain.length(), m,
                                                       cfg.initial.center))});
  return out;
}

} // namespace agdiff
