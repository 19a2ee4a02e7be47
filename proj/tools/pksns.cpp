/// Command-line front end: run one scenario, sweep a parameter, estimate the
/// interpolation constant behind the mass threshold, audit the inequality
/// catalog against a checkpoint, or resume a checkpointed run.
///
/// Exit codes: 0 success (a run that terminates at the adaptive-step floor is
/// a normal, reportable outcome), 1 usage/configuration/I-O error,
/// 3 inequality-catalog violation.
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pksns/gn_constant.hpp"
#include "pksns/runner.hpp"

namespace {

using namespace pksns;

ScenarioConfig load_config(const std::string& path,
                           const std::vector<std::string>& overrides,
                           const std::string& out_dir) {
  ConfigTable table = ConfigTable::parse_file(path);
  for (const std::string& kv : overrides) table.set_override(kv);
  ScenarioConfig cfg = ScenarioConfig::from_table(table);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  return cfg;
}

void print_report(const RunReport& rep) {
  std::cout << "run:            " << rep.name << "\n"
            << "classification: " << to_string(rep.classification) << "\n"
            << "termination:    " << rep.termination
            << (rep.reason.empty() ? "" : " (" + rep.reason + ")") << "\n"
            << "steps:          " << rep.steps << "\n"
            << "final t:        " << detail::fmt17(rep.final_t) << "\n"
            << "mass:           " << detail::fmt17(rep.initial_mass) << " -> "
            << detail::fmt17(rep.final_mass) << "\n"
            << "decay rate:     " << detail::fmt17(rep.neq_fit.rate)
            << "  (r2 = " << detail::fmt17(rep.neq_fit.r2) << ", "
            << rep.neq_fit.used << " samples)\n"
            << "outputs:        " << rep.paths.directory << "\n";
}

int cmd_run(const std::string& config_path,
            const std::vector<std::string>& overrides,
            const std::string& out_dir) {
  const ScenarioConfig cfg = load_config(config_path, overrides, out_dir);
  print_report(run_scenario(cfg));
  return 0;
}

int cmd_sweep(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& out_dir, const std::string& parameter,
              const std::vector<Real>& values) {
  const ScenarioConfig base = load_config(config_path, overrides, out_dir);
  const SweepReport rep = sweep(base, parameter, values);
  std::cout << "sweep over " << rep.parameter << ":\n";
  for (const SweepRow& row : rep.rows)
    std::cout << "  " << rep.parameter << " = " << detail::fmt17(row.value)
              << "  rate = " << detail::fmt17(row.rate)
              << "  r2 = " << detail::fmt17(row.r2) << "  "
              << to_string(row.classification) << "  [" << row.run_name
              << "]\n";
  std::cout << "table: " << rep.csv_path << "\n";
  return 0;
}

int cmd_cstar(int restarts, unsigned long long seed, int threads) {
  CStarOptions opt;
  opt.seed = seed;
  opt.threads = threads;
  const CStarResult res = estimate_C_star(restarts, opt);
  nlohmann::ordered_json j;
  j["estimate"] = res.estimate;
  j["estimate_cubed"] = res.estimate_cubed;
  j["critical_mass"] = res.critical_mass;
  j["restarts"] = res.restarts;
  j["degenerate_restarts"] = res.degenerate_restarts;
  const std::vector<Real> spec = res.best_trial.spectrum();  // row-major
  const Index kz = res.best_trial.kz_modes();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Index m = 0; m < res.best_trial.my_modes(); ++m) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Index k = 0; k < kz; ++k)
      row.push_back(spec[static_cast<std::size_t>(m * kz + k)]);
    rows.push_back(row);
  }
  j["best_trial"] = {{"my_modes", res.best_trial.my_modes()},
                     {"kz_modes", res.best_trial.kz_modes()},
                     {"spectrum", rows}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_check_inequalities(const std::string& checkpoint_path,
                           int extra_fields, unsigned seed) {
  const CheckpointData ck = load_checkpoint(checkpoint_path);
  const GridPtr grid = ck.state.n.grid_ptr();
  std::vector<PhysicalField> corpus = {
      ck.state.n,  ck.state.c,        ck.state.u1,        ck.state.u2,
      ck.state.u3, ck.state.u10_hat,  ck.state.u10_tilde};
  for (int i = 0; i < extra_fields; ++i) {
    const bool wall_zero = (i % 2 == 1);
    corpus.push_back(realize(
        random_field_spec(seed + static_cast<unsigned>(i) * 7919u, 3, 3, 4,
                          0.6, wall_zero),
        grid));
  }
  const InequalityReport rep = check_inequality_catalog(corpus);
  nlohmann::ordered_json j;
  j["checkpoint"] = checkpoint_path;
  j["corpus_size"] = corpus.size();
  j["all_passed"] = rep.all_passed;
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const InequalityItem& it : rep.items)
    items.push_back({{"name", it.name},
                     {"constant_free", it.constant_free},
                     {"max_ratio", it.max_ratio},
                     {"used", it.used},
                     {"excluded", it.excluded},
                     {"passed", it.passed}});
  j["items"] = items;
  std::cout << j.dump(2) << "\n";
  return rep.all_passed ? 0 : 3;
}

int cmd_resume(const std::string& checkpoint_path, double t_end,
               const std::string& name, const std::string& out_dir,
               long long sample_every, long long max_steps) {
  const CheckpointData ck = load_checkpoint(checkpoint_path);
  ScenarioConfig cfg;
  cfg.params = ck.params;
  if (t_end > 0.0) cfg.params.t_end = t_end;
  cfg.name = name.empty() ? "resume" : name;
  cfg.output_dir = out_dir;
  cfg.sample_every = sample_every;
  cfg.max_steps = max_steps;
  print_report(resume_run(checkpoint_path, cfg));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"channel chemotaxis-flow simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, parameter, checkpoint_path, run_name;
  std::vector<std::string> overrides;
  std::vector<Real> values;
  int restarts = 32, threads = 0, extra_fields = 16;
  unsigned long long cstar_seed = 2026;
  unsigned corpus_seed = 1234;
  double new_t_end = 0.0;
  long long sample_every = 1, max_steps = 200000;

  CLI::App* run = app.add_subcommand("run", "execute one scenario");
  run->add_option("config", config_path, "scenario config file")->required();
  run->add_option("--set", overrides,
                  "override a config key, e.g. --set params.A=512");
  run->add_option("--out", out_dir, "output directory (overrides config)");

  CLI::App* sw =
      app.add_subcommand("sweep", "run a scenario once per parameter value");
  sw->add_option("config", config_path, "scenario config file")->required();
  sw->add_option("--param", parameter, "parameter to vary (A, mu, t_end)")
      ->required();
  sw->add_option("--values", values, "comma-separated parameter values")
      ->required()
      ->delimiter(',');
  sw->add_option("--set", overrides, "override a config key");
  sw->add_option("--out", out_dir, "output directory (overrides config)");

  CLI::App* cs = app.add_subcommand(
      "cstar", "estimate the interpolation constant and critical mass");
  cs->add_option("--restarts", restarts, "random restarts (default 32)");
  cs->add_option("--seed", cstar_seed, "base seed for the restarts");
  cs->add_option("--threads", threads, "worker threads (0 = auto)");

  CLI::App* ci = app.add_subcommand(
      "check-inequalities", "audit the inequality catalog on a checkpoint");
  ci->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();
  ci->add_option("--extra", extra_fields,
                 "additional random smooth corpus fields (default 16)");
  ci->add_option("--seed", corpus_seed, "seed for the random corpus fields");

  CLI::App* rs =
      app.add_subcommand("resume", "continue a run from its checkpoint");
  rs->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();
  rs->add_option("--t-end", new_t_end, "new end time (default: keep stored)");
  rs->add_option("--name", run_name, "run name (default: resume)");
  rs->add_option("--out", out_dir, "output directory");
  rs->add_option("--sample-every", sample_every, "diagnostic cadence (steps)");
  rs->add_option("--max-steps", max_steps, "hard step cap");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, overrides, out_dir);
    if (sw->parsed())
      return cmd_sweep(config_path, overrides, out_dir, parameter, values);
    if (cs->parsed()) return cmd_cstar(restarts, cstar_seed, threads);
    if (ci->parsed())
      return cmd_check_inequalities(checkpoint_path, extra_fields,
                                    corpus_seed);
    if (rs->parsed())
      return cmd_resume(checkpoint_path, new_t_end, run_name, out_dir,
                        sample_every, max_steps);
  } catch (const std::exception& err) {
    std::cerr << "pksns: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
