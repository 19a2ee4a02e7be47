/// Experiment driver: executes a validated scenario to t_end (or early
/// termination), writes the diagnostics time series (CSV schema v1), a final
/// checkpoint, and a JSON summary, and returns the collated report.  Also the
/// one-parameter sweep used by the scaling studies.
///
/// Determinism contract: identical config (and seed) produces byte-identical
/// CSV output; all floating-point text is printed with 17 significant digits.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "pksns/checkpoint.hpp"
#include "pksns/config.hpp"
#include "pksns/diagnostics.hpp"
#include "pksns/norms.hpp"
#include "pksns/projectors.hpp"
#include "pksns/transforms.hpp"

namespace pksns {

/// CSV schema v1: the column set is fixed by the format version.
inline constexpr const char* kCsvHeaderV1 =
    "t,M_total,M_zero,min_n,div_residual,E11,E12,E13,E21,E22,E3,linf_n,"
    "l2_n_neq,clipped_mass,dt";

struct RunPaths {
  std::string directory, csv, checkpoint, summary;
};

struct RunReport {
  std::string name;
  RunClass classification = RunClass::inconclusive;
  std::string termination;  ///< "t_end", "dt_floor", "solver_error", "max_steps"
  std::string reason;       ///< solver message for early termination
  long long steps = 0;
  Real final_t = 0.0;
  Real final_dt = 0.0;
  Real initial_mass = 0.0;
  Real final_mass = 0.0;
  Real max_mass_ratio = 1.0;  ///< max over samples of M_total(t)/M_total(0)
  Real clipped_mass = 0.0;
  EnergyValues energies{};
  MassDecayReport mass_decay{};
  DecayFit neq_fit{};  ///< late-window decay fit of ||n_neq||_{L^2}
  RunPaths paths{};
};

/// Output root: $PKSNS_OUTPUT_ROOT if set, else ./out.
inline std::string output_root() {
  const char* env = std::getenv("PKSNS_OUTPUT_ROOT");
  return (env != nullptr && env[0] != '\0') ? std::string(env)
                                            : std::string("out");
}

namespace detail {

/// Lossless float-to-text (17 significant digits).
inline std::string fmt17(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string run_directory(const ScenarioConfig& cfg) {
  return cfg.output_dir.empty()
             ? (std::filesystem::path(output_root()) / cfg.name).string()
             : cfg.output_dir;
}

/// Core loop shared by fresh runs and resumes.  `initial_last_dt` seeds the
/// adaptive pacing (dt_init/2 for a fresh run, the checkpointed dt on resume).
inline RunReport drive(const ScenarioConfig& cfg, State s,
                       Real initial_last_dt) {
  const Params& p = cfg.params;
  const GridPtr grid = s.n.grid_ptr();
  const Grid& g = *grid;

  RunReport rep;
  rep.name = cfg.name;
  rep.termination = "t_end";

  const std::filesystem::path dir(run_directory(cfg));
  std::filesystem::create_directories(dir);
  rep.paths.directory = dir.string();
  rep.paths.csv = (dir / (cfg.name + ".csv")).string();
  rep.paths.checkpoint = (dir / (cfg.name + ".ckpt")).string();
  rep.paths.summary = (dir / (cfg.name + ".json")).string();

  std::ofstream csv(rep.paths.csv, std::ios::trunc);
  if (!csv) throw SolverError("runner: cannot open " + rep.paths.csv);
  csv << kCsvHeaderV1 << "\n";

  Stepper stepper(grid, p);
  stepper.seed_last_dt(initial_last_dt);
  NormAccumulators acc(grid, p);
  TrapezoidAccumulator n0_l2l2;  // int ||n_0||_{L^2}^2 dt (mass-decay bound)
  std::vector<Real> ts, m_zero, l2_neq;
  std::vector<RunSample> history;
  rep.initial_mass = lp_norm(s.n, 1);

  const auto sample = [&](Real dt_row) {
    DiagnosticsRecord rec = compute_energies(s, acc, p);
    rec.clipped_mass = stepper.clipped_mass();
    const Real linf = s.n.max_abs();
    const Real l2n = l2_norm(project_nonzero_mode(forward_transform(s.n)));
    n0_l2l2.add(s.t, std::pow(lp_norm(g, zero_mode_plane(s.n), 2), 2));
    ts.push_back(s.t);
    m_zero.push_back(rec.M_zero);
    l2_neq.push_back(l2n);
    rep.final_mass = rec.M_total;
    if (rep.initial_mass > 0.0)
      rep.max_mass_ratio =
          std::max(rep.max_mass_ratio, rec.M_total / rep.initial_mass);
    const Real row[] = {s.t,      rec.M_total, rec.M_zero, rec.min_n,
                        rec.div_residual, rec.E11, rec.E12, rec.E13,
                        rec.E21,  rec.E22,     rec.E3,     linf,
                        l2n,      rec.clipped_mass, dt_row};
    for (std::size_t i = 0; i < std::size(row); ++i)
      csv << (i == 0 ? "" : ",") << fmt17(row[i]);
    csv << "\n";
  };

  sample(0.0);
  history.push_back({s.t, s.n.max_abs(), 0.0});

  const Real t_tol = 1e-12 * std::max(Real(1), p.t_end);
  long long steps = 0;
  while (s.t < p.t_end - t_tol) {
    if (steps >= cfg.max_steps) {
      rep.termination = "max_steps";
      break;
    }
    try {
      Real dt = adapt_dt(s, p, stepper.last_dt());
      const Real remaining = p.t_end - s.t;
      // Land on t_end without proposing a below-floor stub step (a stub
      // would masquerade as a dt collapse in the classification).
      if (remaining <= dt) dt = std::max(remaining, 2.0 * p.dt_min);
      s = stepper.step_fixed(s, dt);
    } catch (const SolverError& err) {
      rep.reason = err.what();
      if (rep.reason.find("below dt_min") != std::string::npos) {
        rep.termination = "dt_floor";
        history.push_back({s.t, s.n.max_abs(), p.dt_min});
      } else {
        rep.termination = "solver_error";
        history.push_back({s.t, s.n.max_abs(), stepper.last_dt()});
      }
      break;
    }
    ++steps;
    history.push_back({s.t, s.n.max_abs(), stepper.last_dt()});
    if (steps % cfg.sample_every == 0) sample(stepper.last_dt());
  }
  rep.steps = steps;
  if (ts.back() != s.t) sample(stepper.last_dt());
  csv.flush();
  if (!csv) throw SolverError("runner: write failed for " + rep.paths.csv);

  rep.final_t = s.t;
  rep.final_dt = stepper.last_dt();
  rep.clipped_mass = stepper.clipped_mass();
  rep.energies = acc.energies();
  rep.classification = classify_run(history, p);
  rep.mass_decay = mass_decay_check(ts, m_zero, n0_l2l2.value(), p);
  try {
    rep.neq_fit =
        fit_nonzero_decay(ts, l2_neq, p.t_end / 3.0, rep.final_t + t_tol);
  } catch (const SolverError&) {
    rep.neq_fit = DecayFit{};  // too few usable samples: report a null fit
  }

  save_checkpoint(rep.paths.checkpoint, s, p, stepper.last_dt());

  nlohmann::ordered_json j;
  j["name"] = rep.name;
  j["classification"] = to_string(rep.classification);
  j["termination"] = rep.termination;
  if (!rep.reason.empty()) j["reason"] = rep.reason;
  j["steps"] = rep.steps;
  j["final_t"] = rep.final_t;
  j["final_dt"] = rep.final_dt;
  j["energies"] = {{"E11", rep.energies.e11}, {"E12", rep.energies.e12},
                   {"E13", rep.energies.e13}, {"E21", rep.energies.e21},
                   {"E22", rep.energies.e22}, {"E3", rep.energies.e3}};
  j["mass"] = {{"initial", rep.initial_mass},
               {"final", rep.final_mass},
               {"max_ratio", rep.max_mass_ratio},
               {"clipped", rep.clipped_mass}};
  j["mass_decay"] = {{"applicable", rep.mass_decay.applicable},
                     {"notice", rep.mass_decay.notice},
                     {"pointwise_ok", rep.mass_decay.pointwise_ok},
                     {"max_excess", rep.mass_decay.max_excess},
                     {"integral_ok", rep.mass_decay.integral_ok},
                     {"integral_lhs", rep.mass_decay.integral_lhs},
                     {"integral_rhs", rep.mass_decay.integral_rhs},
                     {"delta", rep.mass_decay.delta}};
  j["decay_fit"] = {{"rate", rep.neq_fit.rate},
                    {"r2", rep.neq_fit.r2},
                    {"used", rep.neq_fit.used}};
  j["outputs"] = {{"csv", cfg.name + ".csv"},
                  {"checkpoint", cfg.name + ".ckpt"}};
  std::ofstream summary(rep.paths.summary, std::ios::trunc);
  if (!summary) throw SolverError("runner: cannot open " + rep.paths.summary);
  summary << j.dump(2) << "\n";
  return rep;
}

}  // namespace detail

/// Execute one scenario from scratch (or from its configured checkpoint).
inline RunReport run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.initial.kind == InitialKind::checkpoint) {
    CheckpointData ck = load_checkpoint(cfg.initial.checkpoint);
    const Grid& cg = ck.state.n.grid();
    if (cg.nx() != cfg.nx || cg.ny() != cfg.ny || cg.nz() != cfg.nz)
      throw SolverError("runner: config grid differs from checkpoint grid");
    return detail::drive(cfg, std::move(ck.state), ck.last_dt);
  }
  const GridPtr grid = make_grid(cfg.nx, cfg.ny, cfg.nz);
  State s = zero_state(grid);
  s.n = build_initial_density(grid, cfg.initial);
  HelmholtzSolver hs(grid);
  refresh_chemoattractant(hs, s);
  initialize_u10_split(s);
  // Seed pacing at half the configured initial dt: the first CFL proposal is
  // growth-capped to dt_init exactly.
  return detail::drive(cfg, std::move(s), 0.5 * cfg.params.dt_init);
}

/// Continue a checkpointed run under the supplied scenario (typically the
/// checkpoint's own parameters with an extended t_end).
inline RunReport resume_run(const std::string& checkpoint_path,
                            ScenarioConfig cfg) {
  CheckpointData ck = load_checkpoint(checkpoint_path);
  const Grid& cg = ck.state.n.grid();
  cfg.nx = cg.nx();
  cfg.ny = cg.ny();
  cfg.nz = cg.nz();
  cfg.validate();
  return detail::drive(cfg, std::move(ck.state), ck.last_dt);
}

// ---------------------------------------------------------------------------
// Parameter sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  Real value = 0.0;
  Real rate = 0.0;
  Real r2 = 0.0;
  RunClass classification = RunClass::inconclusive;
  std::string run_name;
};

struct SweepReport {
  std::string parameter;
  std::vector<SweepRow> rows;
  std::string csv_path;
};

namespace detail {

inline void apply_sweep_value(ScenarioConfig& cfg, const std::string& parameter,
                              Real value) {
  if (parameter == "A" || parameter == "params.A") {
    cfg.params.A = value;
  } else if (parameter == "mu" || parameter == "params.mu") {
    cfg.params.mu = value;
  } else if (parameter == "t_end" || parameter == "params.t_end") {
    cfg.params.t_end = value;
  } else {
    throw SolverError("sweep: unsupported parameter '" + parameter +
                      "' (supported: A, mu, t_end)");
  }
}

inline std::string short_number(Real v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace detail

/// Run the scenario once per value of one parameter and collate the fitted
/// nonzero-mode decay rates and classifications.  All sub-configs are
/// validated before anything runs; fewer than two values is an error.
inline SweepReport sweep(const ScenarioConfig& base, const std::string& parameter,
                         const std::vector<Real>& values) {
  if (values.size() < 2)
    throw SolverError("sweep: need at least 2 parameter values");
  std::vector<ScenarioConfig> cfgs;
  for (Real v : values) {
    ScenarioConfig cfg = base;
    detail::apply_sweep_value(cfg, parameter, v);
    cfg.name = base.name + "_" + parameter + "=" + detail::short_number(v);
    if (cfg.output_dir.empty())
      cfg.output_dir =
          (std::filesystem::path(output_root()) / base.name / cfg.name).string();
    else
      cfg.output_dir =
          (std::filesystem::path(base.output_dir) / cfg.name).string();
    cfg.validate();  // reject the whole sweep before any run starts
    cfgs.push_back(std::move(cfg));
  }

  SweepReport rep;
  rep.parameter = parameter;
  const std::filesystem::path dir =
      base.output_dir.empty()
          ? std::filesystem::path(output_root()) / base.name
          : std::filesystem::path(base.output_dir);
  std::filesystem::create_directories(dir);
  rep.csv_path = (dir / (base.name + "_sweep.csv")).string();

  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const RunReport r = run_scenario(cfgs[i]);
    SweepRow row;
    row.value = values[i];
    row.rate = r.neq_fit.rate;
    row.r2 = r.neq_fit.r2;
    row.classification = r.classification;
    row.run_name = r.name;
    rep.rows.push_back(row);
  }

  std::ofstream csv(rep.csv_path, std::ios::trunc);
  if (!csv) throw SolverError("sweep: cannot open " + rep.csv_path);
  csv << "value,rate,classification\n";
  for (const SweepRow& row : rep.rows)
    csv << detail::fmt17(row.value) << "," << detail::fmt17(row.rate) << ","
        << to_string(row.classification) << "\n";
  return rep;
}

}  // namespace pksns
