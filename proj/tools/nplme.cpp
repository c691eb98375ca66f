// nplme: simulate data, fit the NPL estimator and run the benchmark protocols.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "nplme/bench.hpp"
#include "nplme/dataset_io.hpp"
#include "nplme/error.hpp"
#include "nplme/estimator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nplme;

namespace {

struct Common {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string methods;
  std::size_t threads = 0;
};

void add_common(CLI::App* app, Common& c, bool data, bool methods) {
  app->add_option("--config", c.config, "experiment config (JSON)");
  if (data) app->add_option("--data", c.data, "dataset CSV (w,y[,x][,group])")->required();
  app->add_option("--out", c.out, "output directory (file for simulate)");
  app->add_option("--seed", c.seed, "master seed, overrides the config");
  if (methods) app->add_option("--methods", c.methods, "comma-separated methods");
  app->add_option("--threads", c.threads, "worker threads");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? parse_config(json::object()) : load_config_file(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
  } else if (!cfg.seed_given) {
    if (const char* env = std::getenv("NPL_SEED")) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("NPL_SEED: not an integer: ") + env);
      }
    }
  }
  if (c.threads > 0) {
    cfg.threads = c.threads;
    cfg.npl.threads = c.threads;
  }
  cfg.npl.seed = cfg.seed;
  if (!c.methods.empty()) cfg.methods = parse_method_list(c.methods);
  return cfg;
}

fs::path out_dir(const Common& c, const ExperimentConfig& cfg) {
  fs::path p = c.out.empty() ? fs::path(cfg.output_dir) : fs::path(c.out);
  fs::create_directories(p);
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  return f;
}

void write_json(const fs::path& p, const json& j) {
  auto f = open_out(p);
  f << j.dump(2) << '\n';
}

int cmd_simulate(const Common& c) {
  const ExperimentConfig cfg = load(c);
  Rng rng = Rng::stream(cfg.seed, {0x51});
  const Dataset d = simulate_from_config(cfg, cfg.dgp.me.sigma_N_true, cfg.dgp.n, rng);
  const fs::path p = c.out.empty() ? fs::path(cfg.output_dir) / "data.csv" : fs::path(c.out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_dataset_csv_file(p.string(), d);
  std::cout << "wrote " << p.string() << " (" << d.size() << " rows)\n";
  return 0;
}

int cmd_fit(const Common& c) {
  ExperimentConfig cfg = load(c);
  const Dataset data = read_dataset_csv_file(c.data);
  const FamilyPtr model = make_family(cfg.dgp.model);
  const fs::path dir = out_dir(c, cfg);
  const std::string hash = config_hash(cfg);

  Rng rng = Rng::stream(cfg.seed, {0xF1});
  BootstrapEnsemble e = fit(data, model, cfg.dgp.me, cfg.npl, rng);
  e.config_hash = hash;
  {
    auto f = open_out(dir / "ensemble.csv");
    write_ensemble_csv(f, e, cfg.seed);
  }

  const auto [lo, hi] = std::minmax_element(data.w.begin(), data.w.end());
  std::vector<double> grid(50);
  for (std::size_t g = 0; g < grid.size(); ++g)
    grid[g] = *lo + (*hi - *lo) * static_cast<double>(g) / static_cast<double>(grid.size() - 1);
  const EnsembleSummary s = summarize(e, *model, grid);
  json j;
  j["seed"] = cfg.seed;
  j["config_hash"] = hash;
  j["method"] = cfg.npl.pseudo ? "npl_hmc" : "npl_nopseudo";
  j["B_boot"] = e.size();
  j["converged"] = std::count(e.converged_flags.begin(), e.converged_flags.end(), true);
  j["theta_mean"] = s.theta_mean;
  j["theta_sd"] = s.theta_sd;
  j["curve"] = {{"x", s.x_grid}, {"median", s.curve_median}, {"lo", s.curve_lo}, {"hi", s.curve_hi}};
  if (!c.methods.empty()) {
    Rng brng = Rng::stream(cfg.seed, {0xF2});
    j["baselines"] = json::object();
    for (const auto& est : estimate_methods(data, model, cfg.dgp.me, cfg, cfg.methods, brng)) {
      j["baselines"][est.method] = est.ok ? json(est.theta) : json({{"error", est.error}});
    }
  }
  write_json(dir / "summary.json", j);
  std::cout << "wrote " << (dir / "ensemble.csv").string() << " and " << (dir / "summary.json").string() << '\n';
  return 0;
}

int cmd_bench(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const fs::path dir = out_dir(c, cfg);
  const RmseTable t = run_bench(cfg, [](const std::string& msg) { std::cerr << msg << '\n'; });
  {
    auto f = open_out(dir / "rmse.csv");
    write_rmse_csv(f, t, cfg);
  }
  {
    auto f = open_out(dir / "rmse_replications.csv");
    write_rmse_replications_csv(f, t, cfg);
  }
  for (const auto& r : t.rows)
    std::cout << r.method << " me_scale=" << format_double(r.me_scale) << " theta_rmse=" << format_double(r.theta_rmse)
              << " failures=" << r.failures << '\n';
  return 0;
}

int cmd_diagnose(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const fs::path dir = out_dir(c, cfg);
  const DiagnoseReport r = run_diagnose(cfg);
  auto f = open_out(dir / "diagnostics.csv");
  write_diagnostics_csv(f, r, cfg);
  for (std::size_t k = 0; k < r.names.size(); ++k)
    std::cout << r.names[k] << " mean=" << format_double(r.mean[k]) << " r_hat=" << format_double(r.r_hat[k])
              << " ess_bulk=" << format_double(r.ess_bulk[k]) << '\n';
  std::cout << "divergences=" << r.divergences << '\n';
  return 0;
}

int cmd_two_sample(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const fs::path dir = out_dir(c, cfg);
  const FamilyPtr model = make_family(cfg.dgp.model);
  const auto& ts = cfg.two_sample;
  ExperimentConfig pc = cfg;
  pc.dgp.me = preset_me(cfg, ts.sigma_N);
  Rng data_rng = Rng::stream(cfg.seed, {0x7A});
  const Dataset data = simulate_from_config(pc, ts.sigma_N, ts.n, data_rng);
  Rng rng = Rng::stream(cfg.seed, {0x7B});
  const auto res = compare_pseudo_regimes(data, model, pc.dgp.me,
                                          ThetaPrior::isotropic(model->dim_theta(), cfg.npl.theta_prior_sd),
                                          cfg.npl.m, pseudo_regime_from_string(ts.regime_a),
                                          pseudo_regime_from_string(ts.regime_b), cfg.hmc, ts.n_perm, ts.n_boot, rng);
  json j;
  j["seed"] = cfg.seed;
  j["config_hash"] = config_hash(cfg);
  j["regime_a"] = ts.regime_a;
  j["regime_b"] = ts.regime_b;
  j["me_kind"] = to_string(pc.dgp.me.kind);
  j["mmd2_u"] = res.test.mmd2_u;
  j["p_value"] = res.test.p_value;
  j["ci"] = {res.test.ci_low, res.test.ci_high};
  j["n_permutations"] = res.test.n_permutations;
  j["bandwidth"] = res.test.bandwidth;
  write_json(dir / "two_sample.json", j);
  std::cout << "mmd2_u=" << format_double(res.test.mmd2_u) << " p=" << format_double(res.test.p_value) << '\n';
  return 0;
}

int cmd_stability(const Common& c) {
  ExperimentConfig cfg = load(c);
  if (!c.methods.empty()) cfg.stability.methods = cfg.methods;
  const Dataset data = read_dataset_csv_file(c.data);
  const fs::path dir = out_dir(c, cfg);
  const auto& st = cfg.stability;
  const StabilityReport r = run_stability_protocol(data, st.rho_grid, st.subsamples, st.subsample_frac, cfg);
  write_json(dir / "stability.json", stability_json(r, cfg));
  for (const auto& m : r.methods) std::cout << m.method << " S_hat=" << format_double(m.S_hat) << '\n';
  return 0;
}

int cmd_contamination(const Common& c) {
  ExperimentConfig cfg = load(c);
  if (!c.methods.empty()) cfg.contamination.methods = cfg.methods;
  const Dataset data = read_dataset_csv_file(c.data);
  const fs::path dir = out_dir(c, cfg);
  const ContaminationReport r = run_contamination_protocol(data, cfg.contamination.r_grid, cfg);
  auto f = open_out(dir / "contamination.csv");
  write_contamination_csv(f, r, cfg);
  for (const auto& row : r.rows)
    std::cout << "r_y=" << format_double(row.r_y) << ' ' << row.method << " theta_rmse=" << format_double(row.theta_rmse)
              << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric learning under measurement error"};
  app.require_subcommand(1);
  Common c;
  auto* sim = app.add_subcommand("simulate", "draw a dataset from the configured DGP");
  add_common(sim, c, false, false);
  auto* fitc = app.add_subcommand("fit", "posterior-bootstrap fit of a dataset");
  add_common(fitc, c, true, true);
  auto* bench = app.add_subcommand("bench", "replication sweep over ME scales");
  add_common(bench, c, false, true);
  auto* diag = app.add_subcommand("diagnose", "HMC diagnostics on the preset dataset");
  add_common(diag, c, false, false);
  auto* two = app.add_subcommand("test-two-sample", "compare two pseudo-sampling regimes");
  add_common(two, c, false, false);
  auto* stab = app.add_subcommand("stability", "rho-sensitivity and subsample stability");
  add_common(stab, c, true, true);
  auto* cont = app.add_subcommand("contamination", "response-contamination sweep");
  add_common(cont, c, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(c);
    if (fitc->parsed()) return cmd_fit(c);
    if (bench->parsed()) return cmd_bench(c);
    if (diag->parsed()) return cmd_diagnose(c);
    if (two->parsed()) return cmd_two_sample(c);
    if (stab->parsed()) return cmd_stability(c);
    if (cont->parsed()) return cmd_contamination(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
