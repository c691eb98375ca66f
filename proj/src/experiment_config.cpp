#include "nplme/experiment_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "nplme/error.hpp"
#include "nplme/pseudo_sampling.hpp"

namespace nplme {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering its path and which keys were consumed.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
    }
  }

  void count(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) fail(at(key), "expected a nonnegative integer");
      out = v->get<std::size_t>();
    }
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) fail(at(key), "expected a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(at(key), "expected an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back((*v)[i].get<double>());
      }
    }
  }

  void strings(const std::string& key, std::vector<std::string>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(at(key), "expected an array of strings");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_string()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a string");
        out.push_back((*v)[i].get<std::string>());
      }
    }
  }

  // Rejects keys that were never looked up.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Runs a validate() and rewrites its failure as a config error at `path`.
template <class F>
void check(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void check_methods(const std::vector<std::string>& methods, const std::string& path) {
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (std::find(kMethodNames.begin(), kMethodNames.end(), methods[i]) == kMethodNames.end())
      Block::fail(path + "[" + std::to_string(i) + "]", "unknown method '" + methods[i] + "'");
  }
}

void parse_me(const json& j, const std::string& path, MEConfig& me) {
  Block b(j, path);
  std::string kind = to_string(me.kind);
  b.string("kind", kind);
  check(b.at("kind"), [&] { me.kind = me_kind_from_string(kind); });
  b.number("sigma_N", me.sigma_N_true);
  b.number("tau_N", me.tau_N);
  b.number("sigma_E", me.sigma_E_true);
  b.number("tau_E", me.tau_E);
  b.number("eps", me.eps);
  b.number("eta_E", me.eta_E);
  b.finish();
  check(path, [&] { me.validate(); });
}

void parse_dgp(const json& j, DgpBlock& d) {
  Block b(j, "$.dgp");
  b.string("model", d.model);
  FamilyPtr fam;
  check(b.at("model"), [&] { fam = make_family(d.model); });
  b.numbers("theta_true", d.theta_true);
  if (d.theta_true.size() != fam->dim_theta())
    Block::fail(b.at("theta_true"), "expected " + std::to_string(fam->dim_theta()) + " values for model '" +
                                        d.model + "'");
  if (const json* me = b.find("me")) parse_me(*me, b.at("me"), d.me);
  b.count("n", d.n);
  if (d.n < 10) Block::fail(b.at("n"), "must be at least 10");
  std::string design = to_string(d.design.design);
  b.string("design", design);
  check(b.at("design"), [&] { d.design.design = design_from_string(design); });
  b.count("group_size", d.design.group_size);
  if (d.design.group_size < 1) Block::fail(b.at("group_size"), "must be positive");
  b.number("w_variance", d.design.w_variance);
  if (!(d.design.w_variance > 0.0)) Block::fail(b.at("w_variance"), "must be positive");
  b.number("x_variance", d.design.x_variance);
  if (!(d.design.x_variance > 0.0)) Block::fail(b.at("x_variance"), "must be positive");
  b.finish();
}

void parse_optimizer(const json& j, AdamSettings& o) {
  Block b(j, "$.npl.optimizer");
  b.number("step_size", o.step_size);
  b.number("beta1", o.beta1);
  b.number("beta2", o.beta2);
  b.number("eps", o.eps);
  b.count("iters", o.iters);
  b.number("tol", o.tol);
  b.count("patience", o.patience);
  b.count("max_halvings", o.max_halvings);
  b.finish();
  check(b.path(), [&] { o.validate(); });
}

void parse_npl(const json& j, NPLConfig& n) {
  Block b(j, "$.npl");
  b.number("c", n.c);
  b.count("m", n.m);
  b.count("truncation", n.truncation);
  b.count("B_boot", n.B_boot);
  b.boolean("pseudo", n.pseudo);
  std::string regime = to_string(n.regime);
  b.string("regime", regime);
  check(b.at("regime"), [&] { n.regime = pseudo_regime_from_string(regime); });
  b.number("prune_threshold", n.prune_threshold);
  b.number("theta_prior_sd", n.theta_prior_sd);
  if (const json* o = b.find("optimizer")) parse_optimizer(*o, n.optimizer);
  b.finish();
}

void parse_hmc(const json& j, HMCConfig& h) {
  Block b(j, "$.hmc");
  b.count("n_chains", h.n_chains);
  b.count("warmup", h.warmup);
  b.count("iters", h.iters);
  b.number("step_size", h.step_size);
  b.count("n_leapfrog", h.n_leapfrog);
  b.number("max_divergence_energy", h.max_divergence_energy);
  b.number("target_accept", h.target_accept);
  b.number("step_jitter", h.step_jitter);
  b.finish();
  check(b.path(), [&] { h.validate(); });
}

void parse_simex(const json& j, SimexConfig& s) {
  Block b(j, "$.simex");
  b.numbers("lambda_grid", s.lambda_grid);
  b.count("B_sim", s.B_sim);
  b.finish();
  check(b.path(), [&] { s.validate(); });
}

void parse_contamination(const json& j, ContaminationBlock& c) {
  Block b(j, "$.contamination");
  b.numbers("r_grid", c.r_grid);
  for (std::size_t i = 0; i < c.r_grid.size(); ++i)
    if (!(c.r_grid[i] >= 0.0 && c.r_grid[i] < 1.0))
      Block::fail(b.at("r_grid") + "[" + std::to_string(i) + "]", "must lie in [0, 1)");
  b.number("shift_sds", c.shift_sds);
  b.count("n_bins", c.n_bins);
  b.string("model", c.model);
  check(b.at("model"), [&] { make_family(c.model); });
  b.number("sigma_N", c.sigma_N);
  b.number("sigma_E", c.sigma_E);
  b.strings("methods", c.methods);
  check_methods(c.methods, b.at("methods"));
  b.finish();
}

void parse_stability(const json& j, StabilityBlock& s) {
  Block b(j, "$.stability");
  b.numbers("rho_grid", s.rho_grid);
  if (s.rho_grid.empty()) Block::fail(b.at("rho_grid"), "must not be empty");
  for (std::size_t i = 0; i < s.rho_grid.size(); ++i)
    if (!(s.rho_grid[i] >= 0.0)) Block::fail(b.at("rho_grid") + "[" + std::to_string(i) + "]", "must be nonnegative");
  b.count("subsamples", s.subsamples);
  if (s.subsamples < 1) Block::fail(b.at("subsamples"), "must be positive");
  b.number("subsample_frac", s.subsample_frac);
  if (!(s.subsample_frac > 0.0 && s.subsample_frac <= 1.0)) Block::fail(b.at("subsample_frac"), "must lie in (0, 1]");
  b.count("grid_points", s.grid_points);
  if (s.grid_points < 2) Block::fail(b.at("grid_points"), "must be at least 2");
  b.count("hist_bins", s.hist_bins);
  if (s.hist_bins < 1) Block::fail(b.at("hist_bins"), "must be positive");
  b.strings("methods", s.methods);
  check_methods(s.methods, b.at("methods"));
  b.finish();
}

void parse_diagnose(const json& j, DiagnoseBlock& d) {
  Block b(j, "$.diagnose");
  b.number("sigma_N", d.sigma_N);
  b.number("eps", d.eps);
  b.number("eta_E", d.eta_E);
  b.number("tau_N", d.tau_N);
  b.count("warmup", d.warmup);
  b.count("iters", d.iters);
  if (d.iters < 4) Block::fail(b.at("iters"), "must be at least 4");
  b.finish();
}

void parse_two_sample(const json& j, TwoSampleBlock& t) {
  Block b(j, "$.two_sample");
  b.string("regime_a", t.regime_a);
  check(b.at("regime_a"), [&] { pseudo_regime_from_string(t.regime_a); });
  b.string("regime_b", t.regime_b);
  check(b.at("regime_b"), [&] { pseudo_regime_from_string(t.regime_b); });
  b.count("n", t.n);
  if (t.n < 10) Block::fail(b.at("n"), "must be at least 10");
  b.number("sigma_N", t.sigma_N);
  if (!(t.sigma_N > 0.0)) Block::fail(b.at("sigma_N"), "must be positive");
  b.count("n_perm", t.n_perm);
  if (t.n_perm < 100) Block::fail(b.at("n_perm"), "must be at least 100");
  b.count("n_boot", t.n_boot);
  b.finish();
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  Block b(doc, "$");
  b.seed("seed", cfg.seed);
  cfg.seed_given = doc.is_object() && doc.contains("seed");
  b.string("output_dir", cfg.output_dir);
  b.count("replications", cfg.replications);
  if (cfg.replications < 1) Block::fail(b.at("replications"), "must be positive");
  b.count("threads", cfg.threads);
  if (cfg.threads < 1) Block::fail(b.at("threads"), "must be positive");
  b.numbers("me_scale_grid", cfg.me_scale_grid);
  if (cfg.me_scale_grid.empty()) Block::fail(b.at("me_scale_grid"), "must not be empty");
  for (std::size_t i = 0; i < cfg.me_scale_grid.size(); ++i)
    if (!(cfg.me_scale_grid[i] >= 0.0))
      Block::fail(b.at("me_scale_grid") + "[" + std::to_string(i) + "]", "must be nonnegative");
  if (const json* v = b.find("dgp")) parse_dgp(*v, cfg.dgp);
  b.strings("methods", cfg.methods);
  if (cfg.methods.empty()) Block::fail(b.at("methods"), "must not be empty");
  check_methods(cfg.methods, b.at("methods"));
  if (const json* v = b.find("npl")) parse_npl(*v, cfg.npl);
  if (const json* v = b.find("hmc")) parse_hmc(*v, cfg.hmc);
  if (const json* v = b.find("simex")) parse_simex(*v, cfg.simex);
  if (const json* v = b.find("contamination")) parse_contamination(*v, cfg.contamination);
  if (const json* v = b.find("stability")) parse_stability(*v, cfg.stability);
  if (const json* v = b.find("diagnose")) parse_diagnose(*v, cfg.diagnose);
  if (const json* v = b.find("two_sample")) parse_two_sample(*v, cfg.two_sample);
  b.finish();

  cfg.npl.hmc = cfg.hmc;
  cfg.npl.seed = cfg.seed;
  cfg.npl.threads = cfg.threads;
  check("$.npl", [&] { cfg.npl.validate(); });
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  const auto& me = c.dgp.me;
  const auto& o = c.npl.optimizer;
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["replications"] = c.replications;
  j["threads"] = c.threads;
  j["me_scale_grid"] = c.me_scale_grid;
  j["dgp"] = {{"model", c.dgp.model},
              {"theta_true", c.dgp.theta_true},
              {"me",
               {{"kind", to_string(me.kind)},
                {"sigma_N", me.sigma_N_true},
                {"tau_N", me.tau_N},
                {"sigma_E", me.sigma_E_true},
                {"tau_E", me.tau_E},
                {"eps", me.eps},
                {"eta_E", me.eta_E}}},
              {"n", c.dgp.n},
              {"design", to_string(c.dgp.design.design)},
              {"group_size", c.dgp.design.group_size},
              {"w_variance", c.dgp.design.w_variance},
              {"x_variance", c.dgp.design.x_variance}};
  j["methods"] = c.methods;
  j["npl"] = {{"c", c.npl.c},
              {"m", c.npl.m},
              {"truncation", c.npl.truncation},
              {"B_boot", c.npl.B_boot},
              {"pseudo", c.npl.pseudo},
              {"regime", to_string(c.npl.regime)},
              {"prune_threshold", c.npl.prune_threshold},
              {"theta_prior_sd", c.npl.theta_prior_sd},
              {"optimizer",
               {{"step_size", o.step_size},
                {"beta1", o.beta1},
                {"beta2", o.beta2},
                {"eps", o.eps},
                {"iters", o.iters},
                {"tol", o.tol},
                {"patience", o.patience},
                {"max_halvings", o.max_halvings}}}};
  j["hmc"] = {{"n_chains", c.hmc.n_chains},
              {"warmup", c.hmc.warmup},
              {"iters", c.hmc.iters},
              {"step_size", c.hmc.step_size},
              {"n_leapfrog", c.hmc.n_leapfrog},
              {"max_divergence_energy", c.hmc.max_divergence_energy},
              {"target_accept", c.hmc.target_accept},
              {"step_jitter", c.hmc.step_jitter}};
  j["simex"] = {{"lambda_grid", c.simex.lambda_grid}, {"B_sim", c.simex.B_sim}};
  j["contamination"] = {{"r_grid", c.contamination.r_grid},
                        {"shift_sds", c.contamination.shift_sds},
                        {"n_bins", c.contamination.n_bins},
                        {"model", c.contamination.model},
                        {"sigma_N", c.contamination.sigma_N},
                        {"sigma_E", c.contamination.sigma_E},
                        {"methods", c.contamination.methods}};
  j["stability"] = {{"rho_grid", c.stability.rho_grid},
                    {"subsamples", c.stability.subsamples},
                    {"subsample_frac", c.stability.subsample_frac},
                    {"grid_points", c.stability.grid_points},
                    {"hist_bins", c.stability.hist_bins},
                    {"methods", c.stability.methods}};
  j["diagnose"] = {{"sigma_N", c.diagnose.sigma_N}, {"eps", c.diagnose.eps},     {"eta_E", c.diagnose.eta_E},
                   {"tau_N", c.diagnose.tau_N},     {"warmup", c.diagnose.warmup}, {"iters", c.diagnose.iters}};
  j["two_sample"] = {{"regime_a", c.two_sample.regime_a}, {"regime_b", c.two_sample.regime_b},
                     {"n", c.two_sample.n},               {"sigma_N", c.two_sample.sigma_N},
                     {"n_perm", c.two_sample.n_perm},     {"n_boot", c.two_sample.n_boot}};
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string dump = to_json(cfg).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> parse_method_list(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
    out.push_back(item);
  }
  if (out.empty()) throw ConfigError("--methods: empty method list");
  check_methods(out, "--methods");
  return out;
}

}  // namespace nplme
