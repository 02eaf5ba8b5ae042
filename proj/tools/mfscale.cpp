// Command-line driver: generate, compose, train, sweep, analyze, plot.
#include "mfscale/composer.hpp"
#include "mfscale/csv.hpp"
#include "mfscale/errors.hpp"
#include "mfscale/metrics.hpp"
#include "mfscale/pool.hpp"
#include "mfscale/scaling.hpp"
#include "mfscale/surrogate.hpp"
#include "mfscale/sweep.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <optional>

using namespace mfscale;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c, bool with_seed = true) {
  app->add_option("--config", c.config, "JSON config file");
  app->add_option("--out", c.out, "output directory or file");
  app->add_option("--workers", c.workers, "worker threads (0 = all cores)");
  if (with_seed) app->add_option("--seed", c.seed, "seed override");
}

SweepConfig resolve_config(const Common& c) {
  SweepConfig cfg = c.config.empty() ? SweepConfig{} : load_sweep_config(c.config);
  apply_env_overrides(cfg);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.workers) cfg.workers = *c.workers;
  return cfg;
}

void log_line(const std::string& m) { std::fprintf(stderr, "%s\n", m.c_str()); }

int cmd_generate(const Common& c) {
  auto cfg = resolve_config(c);
  if (c.seed) cfg.pool_seed = *c.seed;
  PoolOptions opt;
  opt.workers = cfg.workers;
  auto pool = generate_pool(cfg.pool_size, cfg.pool_seed, opt);
  const auto dir = cfg.output_dir / "pool";
  save_pool(pool, dir);
  auto gap = fidelity_gap_report(pool);
  write_file_atomic(cfg.output_dir / "fidelity_gap.csv", fidelity_gap_csv(gap));
  std::printf("pool: %zu pairs (%zu dropped) -> %s\n", pool.size(), pool.dropped_case_ids.size(),
              dir.string().c_str());
  std::printf("mean work units: low %.1f high %.1f ratio %.3f\n", pool.cost_model.avg_cost_low,
              pool.cost_model.avg_cost_high, pool.cost_model.ratio());
  std::printf("fidelity gap nMAE: u %.5f tau_w %.5f\n", gap.nmae_u, gap.nmae_tau);
  return 0;
}

int cmd_compose(const Common& c, const std::string& pool_dir, double budget, double dc, const std::string& mode) {
  if (pool_dir.empty()) throw ConfigError("compose needs --pool");
  auto pool = load_pool(pool_dir);
  DatasetBudgetSpec spec{budget, dc, parse_composition_mode(mode)};
  auto sel = compose_dataset(pool, spec, c.seed.value_or(0));
  const std::string out = c.out.empty() ? "selection.csv" : c.out;
  save_selection(sel, pool, out);
  std::printf("selection: %zu low, %zu high, cost %.0f of %.0f, achieved dc %.4f -> %s\n", sel.low_ids.size(),
              sel.high_ids.size(), sel.total_cost, budget, sel.achieved_dc, out.c_str());
  return 0;
}

int cmd_train(const Common& c, const std::string& pool_dir, const std::string& selection_path,
              const std::string& test_pool_dir) {
  if (pool_dir.empty() || selection_path.empty()) throw ConfigError("train needs --pool and --selection");
  auto cfg = resolve_config(c);
  if (c.seed) {
    cfg.network.seed = mix_seed(cfg.network.seed, *c.seed);
    cfg.training.seed = mix_seed(cfg.training.seed, *c.seed);
  }
  auto pool = load_pool(pool_dir);
  auto sel = load_selection(selection_path, pool, cfg.mode);
  auto model = train(sel, pool, cfg.network, cfg.training);
  const std::string out = c.out.empty() ? "model.bin" : c.out;
  save_model(model, out);
  std::printf("trained %d epochs, best val loss %.6g (u %.6g, tau_w %.6g) -> %s\n", model.epochs_run,
              model.best_val_loss, model.field_report.best_val_loss, model.scalar_report.best_val_loss, out.c_str());
  if (!test_pool_dir.empty()) {
    auto rep = evaluate_model(model, load_pool(test_pool_dir));
    std::printf("%s", field_error_csv(rep).c_str());
  }
  return 0;
}

int cmd_sweep(const Common& c) {
  auto cfg = resolve_config(c);
  if (c.seed) cfg.pool_seed = *c.seed;
  validate(cfg);
  auto res = run_sweep(cfg, log_line);
  std::printf("%zu rows (%zu resumed, %zu failed) -> %s\n", res.n_records, res.n_resumed, res.n_failed,
              res.results_path.string().c_str());
  return res.n_failed ? 1 : 0;
}

int cmd_analyze(const Common& c, const std::string& results) {
  if (results.empty()) throw ConfigError("analyze needs --results");
  auto records = read_results(results);
  auto a = analyze(records);
  std::filesystem::path dir = c.out.empty() ? std::filesystem::path(results).parent_path() : std::filesystem::path(c.out);
  write_file_atomic(dir / "cells.csv", cells_csv(a.cells));
  write_file_atomic(dir / "fits.csv", fits_csv(a));
  write_file_atomic(dir / "verdicts.csv", verdicts_csv(a.verdicts));
  auto summary = summary_text(a, records);
  write_file_atomic(dir / "summary.txt", summary);
  std::printf("%s", summary.c_str());
  return 0;
}

int cmd_plot(const Common& c, const std::string& results) {
  if (results.empty()) throw ConfigError("plot needs --results");
  std::filesystem::path dir = c.out.empty() ? std::filesystem::path(results).parent_path() : std::filesystem::path(c.out);
  for (const auto& p : emit_plots(results, dir)) std::printf("%s\n", p.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-fidelity dataset scaling laboratory"};
  app.require_subcommand(1);

  Common gen_c, comp_c, train_c, sweep_c, an_c, plot_c;
  auto* gen = app.add_subcommand("generate", "solve a matched low/high pool");
  add_common(gen, gen_c);

  auto* comp = app.add_subcommand("compose", "select a dataset under a budget");
  add_common(comp, comp_c);
  std::string comp_pool, comp_mode = "budget_share";
  double budget = 0.0, dc = 0.5;
  comp->add_option("--pool", comp_pool, "pool directory")->required();
  comp->add_option("--budget", budget, "budget D_b in work units")->required();
  comp->add_option("--dc", dc, "composition D_c in [0, 1]")->required();
  comp->add_option("--mode", comp_mode, "budget_share or count_share");

  auto* tr = app.add_subcommand("train", "train a surrogate on a selection");
  add_common(tr, train_c);
  std::string tr_pool, tr_sel, tr_test;
  tr->add_option("--pool", tr_pool, "pool directory")->required();
  tr->add_option("--selection", tr_sel, "selection CSV")->required();
  tr->add_option("--test-pool", tr_test, "optional pool to evaluate on");

  auto* sw = app.add_subcommand("sweep", "run the budget x composition x seed sweep");
  add_common(sw, sweep_c);

  auto* an = app.add_subcommand("analyze", "aggregate, fit and judge a results file");
  add_common(an, an_c, false);
  std::string an_results;
  an->add_option("--results", an_results, "results CSV")->required();

  auto* pl = app.add_subcommand("plot", "write one SVG per field");
  add_common(pl, plot_c, false);
  std::string pl_results;
  pl->add_option("--results", pl_results, "results CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_generate(gen_c);
    if (*comp) return cmd_compose(comp_c, comp_pool, budget, dc, comp_mode);
    if (*tr) return cmd_train(train_c, tr_pool, tr_sel, tr_test);
    if (*sw) return cmd_sweep(sweep_c);
    if (*an) return cmd_analyze(an_c, an_results);
    if (*pl) return cmd_plot(plot_c, pl_results);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
