#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "nplme/bench.hpp"
#include "nplme/dataset_io.hpp"
#include "nplme/error.hpp"

using namespace nplme;
using nlohmann::json;

namespace {

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg = parse_config(json::parse(R"({
    "seed": 3, "replications": 2, "me_scale_grid": [1.0],
    "dgp": {"n": 30, "me": {"sigma_N": 0.5, "tau_N": 0.7}},
    "methods": ["npl_nopseudo", "nls"],
    "npl": {"B_boot": 3, "optimizer": {"iters": 30}},
    "hmc": {"n_chains": 2, "warmup": 100, "iters": 100},
    "simex": {"B_sim": 5}
  })"));
  return cfg;
}

}  // namespace

TEST_CASE("config errors name the offending path") {
  CHECK(config_error(json::parse(R"({"npl": {"optimizer": {"iters": -1}}})")).rfind("$.npl.optimizer.iters", 0) == 0);
  CHECK(config_error(json::parse(R"({"dgp": {"theta_true": [1, 2]}})")).rfind("$.dgp.theta_true", 0) == 0);
  CHECK(config_error(json::parse(R"({"methods": ["nls", "magic"]})")).rfind("$.methods[1]", 0) == 0);
  CHECK(config_error(json::parse(R"({"hmc": {"warmpu": 10}})")).find("warmpu") != std::string::npos);
  CHECK(config_error(json::parse(R"({"dgp": {"me": {"kind": "both"}}})")).rfind("$.dgp.me.kind", 0) == 0);
  CHECK(config_error(json::parse(R"({"seed": 4})")).empty());
}

TEST_CASE("config hash is canonical") {
  const auto a = parse_config(json::parse(R"({"seed": 4, "replications": 20})"));
  const auto b = parse_config(json::parse(R"({"replications": 20, "seed": 4})"));
  const auto c = parse_config(json::parse(R"({"seed": 5})"));
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 16);
  CHECK(parse_config(to_json(a)).seed == 4);
  CHECK(config_hash(parse_config(to_json(a))) == config_hash(a));
}

TEST_CASE("method lists are validated") {
  CHECK(parse_method_list("nls, simex") == std::vector<std::string>{"nls", "simex"});
  CHECK_THROWS_AS(parse_method_list("nls,bogus"), ConfigError);
}

TEST_CASE("bench produces one row per method and scale and is reproducible") {
  const ExperimentConfig cfg = tiny_config();
  const RmseTable t = run_bench(cfg);
  CHECK(t.rows.size() == 2);
  CHECK(t.replications.size() == 4);
  REQUIRE(t.find("nls", 1.0) != nullptr);
  CHECK(t.find("nls", 1.0)->count == 2);
  const RmseTable u = run_bench(cfg);
  CHECK(u.find("npl_nopseudo", 1.0)->theta_rmse == t.find("npl_nopseudo", 1.0)->theta_rmse);

  std::ostringstream os;
  write_rmse_csv(os, t, cfg);
  CHECK(os.str().rfind("# seed=3,config_hash=" + config_hash(cfg), 0) == 0);
}

TEST_CASE("method estimates do not depend on which other methods run") {
  const ExperimentConfig cfg = tiny_config();
  Rng g(1);
  const Dataset d = simulate_from_config(cfg, 0.5, 30, g);
  Rng r1(2), r2(2);
  const auto both = estimate_methods(d, make_family("sigmoid"), cfg.dgp.me, cfg, {"nls", "simex"}, r1);
  const auto one = estimate_methods(d, make_family("sigmoid"), cfg.dgp.me, cfg, {"simex"}, r2);
  REQUIRE(both[1].ok);
  CHECK(both[1].theta == one[0].theta);
}

TEST_CASE("histogram weights and curve deviation") {
  const std::vector<double> w{0.0, 0.1, 0.2, 0.9, 1.0};
  const std::vector<double> grid{0.05, 0.5, 0.95};
  const auto h = histogram_weights(w, grid, 2);
  CHECK(std::accumulate(h.begin(), h.end(), 0.0) == doctest::Approx(1.0));
  CHECK(h[0] > h[2]);
  const std::vector<std::vector<double>> same(3, std::vector<double>{1.0, 2.0, 3.0});
  CHECK(curve_deviation(QuadraticFamily(), same, w, 50, 5) == doctest::Approx(0.0));
  const std::vector<std::vector<double>> shifted{{0.0, 0.0, 0.0}, {2.0, 0.0, 0.0}};
  CHECK(curve_deviation(QuadraticFamily(), shifted, w, 50, 5) == doctest::Approx(1.0));
}

TEST_CASE("contamination protocol reports one row per rate and method") {
  ExperimentConfig cfg = tiny_config();
  cfg.contamination.methods = {"nls", "simex"};
  cfg.contamination.r_grid = {0.1, 0.2};
  Rng g(3);
  Dataset d;
  for (int i = 0; i < 80; ++i) {
    d.w.push_back(g.normal());
    d.y.push_back(1.0 + d.w.back() + 0.3 * d.w.back() * d.w.back() + 0.2 * g.normal());
  }
  const auto rep = run_contamination_protocol(d, cfg.contamination.r_grid, cfg);
  CHECK(rep.rows.size() == 4);
  CHECK(rep.rows[2].n_contaminated == 16);
  CHECK(rep.sigma_N > 0.0);
  CHECK(rep.oracle_theta.size() == 3);
}

TEST_CASE("stability protocol with a single rho has zero across-rho variance") {
  ExperimentConfig cfg = tiny_config();
  cfg.stability.methods = {"simex"};
  Rng g(4);
  Dataset d;
  for (int i = 0; i < 60; ++i) {
    const double u = g.normal();
    d.w.push_back(std::exp(u + 0.2 * g.normal()));
    d.y.push_back(1.0 + u - 0.2 * u * u + 0.1 * g.normal());
  }
  const auto rep = run_stability_protocol(d, {0.4}, 3, 0.8, cfg);
  REQUIRE(rep.methods.size() == 1);
  for (double v : rep.methods[0].across_rho_var) CHECK(v == 0.0);
  CHECK(rep.methods[0].S_hat >= 0.0);
  CHECK(stability_json(rep, cfg).contains("methods"));
}

TEST_CASE("csv fields are quoted when needed") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("dataset CSV round trip") {
  Dataset d;
  d.w = {0.5, -1.25};
  d.y = {1.0, 2.0};
  d.x_latent = std::vector<double>{0.4, -1.0};
  std::ostringstream os;
  write_dataset_csv(os, d);
  std::istringstream is(os.str());
  const Dataset r = read_dataset_csv(is);
  CHECK(r.w == d.w);
  CHECK(r.y == d.y);
  CHECK(*r.x_latent == *d.x_latent);
  std::istringstream bad("w,y\n1,abc\n");
  CHECK_THROWS_AS(read_dataset_csv(bad), InvalidInput);
}
