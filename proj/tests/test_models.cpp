#include <cmath>
#include <set>

#include "doctest.h"
#include "nplme/error.hpp"
#include "nplme/models.hpp"

using namespace nplme;

TEST_CASE("family derivatives match central differences") {
  Rng r(1);
  for (const char* name : {"sigmoid", "linear", "proportional", "quadratic", "log_quadratic"}) {
    const FamilyPtr f = make_family(name);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> th(f->dim_theta());
      for (auto& v : th) v = r.normal();
      const double x = f->positive_domain() ? 0.2 + 3.0 * r.uniform() : 2.0 * r.normal();
      std::vector<double> grad(f->dim_theta());
      CHECK(f->g_and_dtheta(x, th, grad) == doctest::Approx(f->g(x, th)));
      const double h = 1e-6;
      for (std::size_t k = 0; k < th.size(); ++k) {
        auto p = th, m = th;
        p[k] += h;
        m[k] -= h;
        CHECK(grad[k] == doctest::Approx((f->g(x, p) - f->g(x, m)) / (2 * h)).epsilon(1e-6));
      }
      const double fd = (f->g(x + 1e-6, th) - f->g(x - 1e-6, th)) / 2e-6;
      CHECK(f->dg_dx(x, th) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  CHECK_THROWS_AS(make_family("cubic"), InvalidInput);
}

TEST_CASE("sigmoid stays finite for extreme exponents") {
  const std::vector<double> th{5.0, 1e4, 0.0};
  CHECK(sigmoid_g(-10.0, th) >= 0.0);
  CHECK(sigmoid_g(10.0, th) == doctest::Approx(5.0));
  std::vector<double> g(3);
  SigmoidFamily().g_and_dtheta(-10.0, th, g);
  for (double v : g) CHECK(std::isfinite(v));
}

TEST_CASE("contaminated noise has the mixture scale") {
  MEConfig me;
  me.sigma_E_true = 0.5;
  me.eps = 0.1;
  me.eta_E = 9.0;
  Rng r(2);
  double s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double e = draw_outcome_noise(me, r);
    s2 += e * e;
  }
  // sqrt(0.9 * 0.25 + 0.1 * 81 * 0.25) = 1.5
  CHECK(std::sqrt(s2 / n) == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("simulated designs") {
  const LinearFamily lin;
  const std::vector<double> th{1.0, 2.0};
  MEConfig me;
  me.sigma_N_true = 0.5;
  me.sigma_E_true = 0.0;
  Rng r(3);
  DesignConfig cls;
  const Dataset d = simulate_dgp(lin, th, me, 20000, cls, r);
  REQUIRE(d.has_latent());
  std::vector<double> diff(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    diff[i] = d.w[i] - (*d.x_latent)[i];
    CHECK(d.y[i] == doctest::Approx(1.0 + 2.0 * (*d.x_latent)[i]));
  }
  CHECK(std::sqrt(sample_variance(diff)) == doctest::Approx(0.5).epsilon(0.03));
  CHECK(sample_variance(*d.x_latent) == doctest::Approx(3.0).epsilon(0.05));

  DesignConfig brk;
  brk.design = Design::berkson_grouped;
  const Dataset b = simulate_dgp(lin, th, me, 30, brk, r);
  REQUIRE(b.group_ids.has_value());
  for (std::size_t i = 0; i < 30; i += 3) {
    CHECK(b.w[i] == b.w[i + 1]);
    CHECK(b.w[i] == b.w[i + 2]);
    CHECK((*b.x_latent)[i] != (*b.x_latent)[i + 1]);
  }
  const Dataset odd = simulate_dgp(lin, th, me, 31, brk, r);
  CHECK(odd.size() == 31);
  CHECK((*odd.group_ids)[30] == 10);
}

TEST_CASE("classical conditional is the conjugate posterior") {
  const GaussianLaw prior{1.0, 2.0};
  const GaussianLaw post = classical_conditional(3.0, 1.0, prior);
  CHECK(post.mean == doctest::Approx((4.0 * 3.0 + 1.0 * 1.0) / 5.0));
  CHECK(post.sd == doctest::Approx(std::sqrt(4.0 / 5.0)));
  const GaussianLaw exact = classical_conditional(3.0, 0.0, prior);
  CHECK(exact.mean == 3.0);
  CHECK(exact.sd == 0.0);
  Rng r(4);
  CHECK(centring_classical(3.0, 0.0, prior)(r) == 3.0);
  CHECK_THROWS_AS(centring_berkson(0.0, 0.0), InvalidParameter);
}

TEST_CASE("working prior clamps the latent variance") {
  const std::vector<double> w{-1.0, 0.0, 1.0};  // var 1
  CHECK(working_prior_x(w, 0.5).sd == doctest::Approx(std::sqrt(0.75)));
  CHECK(working_prior_x(w, 5.0).sd == doctest::Approx(std::sqrt(0.1)));
}

TEST_CASE("bin means and response contamination") {
  const std::vector<double> v{0.0, 0.1, 0.9, 1.0};
  const auto b = bin_means_transform(v, 2);
  CHECK(b.w[0] == doctest::Approx(0.05));
  CHECK(b.w[3] == doctest::Approx(0.95));
  CHECK(b.edges.size() == 3);

  std::vector<double> y(40);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i % 5);
  Rng r(5);
  std::vector<std::size_t> chosen;
  const auto c = contaminate_responses(y, 0.25, 6.0, r, &chosen);
  CHECK(chosen.size() == 10);
  CHECK(std::set<std::size_t>(chosen.begin(), chosen.end()).size() == 10);
  std::size_t moved = 0;
  const double shift = 6.0 * std::sqrt(sample_variance(y));
  for (std::size_t i = 0; i < y.size(); ++i)
    if (c[i] != y[i]) {
      ++moved;
      CHECK(c[i] - y[i] == doctest::Approx(shift));
    }
  CHECK(moved == 10);
  CHECK_THROWS_AS(contaminate_responses(y, 1.0, 6.0, r), PreconditionError);
}

TEST_CASE("theta prior density gradient") {
  const ThetaPrior p = ThetaPrior::isotropic(2, 3.0, 1.0);
  const std::vector<double> th{0.5, 2.0};
  std::vector<double> g(2, 0.0);
  p.log_density(th, g);
  CHECK(g[0] == doctest::Approx(0.5 / 9.0));
  CHECK(g[1] == doctest::Approx(-1.0 / 9.0));
}
