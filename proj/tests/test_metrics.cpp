#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "matgen/metrics.hpp"

using namespace matgen;
using metrics::SampleSet;

TEST_CASE("energy distance: hand values") {
  SampleSet x(1, 1), y(1, 1);
  x << 0.0;
  y << 1.0;
  // 2*1 - 0 - 0 = 2
  CHECK(metrics::energy_distance_sq(x, y) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(metrics::energy_distance_sq(x, x) == doctest::Approx(0.0).epsilon(1e-14));

  SampleSet a(2, 1), b(2, 1);
  a << 0.0, 2.0;
  b << 1.0, 1.0;
  // E||x-y|| = 1, E||x-x'|| = (0+2+2+0)/4 = 1, E||y-y'|| = 0 -> 2 - 1 - 0 = 1
  CHECK(metrics::energy_distance_sq(a, b) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("energy distance: symmetry, non-negativity, sensitivity to shift") {
  std::mt19937_64 rng(1);
  auto draw = [&](int n, double mean) {
    SampleSet s(n, 3);
    std::normal_distribution<double> gauss(mean, 1.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) s(i, j) = gauss(rng);
    return s;
  };
  const SampleSet x = draw(200, 0.0);
  const SampleSet y = draw(200, 0.0);
  const SampleSet z = draw(200, 2.0);

  const double dxy = metrics::energy_distance_sq(x, y);
  CHECK(dxy == doctest::Approx(metrics::energy_distance_sq(y, x)).epsilon(1e-9));
  CHECK(dxy >= 0.0);
  // same distribution: small; shifted distribution: much larger
  const double dxz = metrics::energy_distance_sq(x, z);
  CHECK(dxz > 10.0 * std::max(dxy, 1e-6));
}

TEST_CASE("GMM EM recovers two well-separated components") {
  std::mt19937_64 rng(2);
  const int n = 400;
  SampleSet s(n, 2);
  for (int i = 0; i < n; ++i) {
    const double c = i < n / 2 ? -3.0 : 3.0;
    std::normal_distribution<double> gauss(c, 0.5);
    s(i, 0) = gauss(rng);
    s(i, 1) = gauss(rng);
  }
  const metrics::GmmModel m = metrics::gmm_fit_em(s, 2, 7);
  REQUIRE(m.means.size() == 2);
  std::vector<double> centers{m.means[0][0], m.means[1][0]};
  std::sort(centers.begin(), centers.end());
  CHECK(centers[0] == doctest::Approx(-3.0).epsilon(0.1));
  CHECK(centers[1] == doctest::Approx(3.0).epsilon(0.1));
  CHECK(m.weights[0] == doctest::Approx(0.5).epsilon(0.1));
  for (const auto& C : m.covs) {
    CHECK(C(0, 0) == doctest::Approx(0.25).epsilon(0.3));
    CHECK(std::abs(C(0, 1)) < 0.1);
  }
}

TEST_CASE("GMM EM log-likelihood is monotone and the fit deterministic") {
  std::mt19937_64 rng(3);
  SampleSet s(150, 2);
  for (int i = 0; i < 150; ++i) {
    std::normal_distribution<double> gauss(i % 3 - 1.0, 0.4);
    s(i, 0) = gauss(rng);
    s(i, 1) = gauss(rng);
  }
  const metrics::GmmModel a = metrics::gmm_fit_em(s, 3, 11);
  for (size_t i = 1; i < a.ll_history.size(); ++i)
    CHECK(a.ll_history[i] >= a.ll_history[i - 1] - 1e-7);

  const metrics::GmmModel b = metrics::gmm_fit_em(s, 3, 11);
  CHECK(a.log_likelihood == b.log_likelihood);
  for (int k = 0; k < 3; ++k)
    CHECK((a.means[k] - b.means[k]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("GMM sampling round-trips the fitted distribution") {
  std::mt19937_64 rng(4);
  SampleSet s(500, 1);
  for (int i = 0; i < 500; ++i) {
    std::normal_distribution<double> gauss(i % 2 ? 4.0 : -4.0, 0.7);
    s(i, 0) = gauss(rng);
  }
  const metrics::GmmModel m = metrics::gmm_fit_em(s, 2, 5);
  const SampleSet gen = metrics::gmm_sample(m, 500, rng);
  CHECK(metrics::energy_distance_sq(s, gen) < 0.05);
}

TEST_CASE("KDE integrates to one and is symmetric for symmetric data") {
  std::mt19937_64 rng(5);
  SampleSet s(300, 1);
  for (int i = 0; i < 300; ++i) s(i, 0) = std::normal_distribution<double>(0.0, 1.0)(rng);

  // trapezoid quadrature of the density over a wide interval
  const int nq = 2001;
  SampleSet q(nq, 1);
  for (int i = 0; i < nq; ++i) q(i, 0) = -8.0 + 16.0 * i / (nq - 1);
  const Eigen::VectorXd pdf = metrics::kde_pdf(s, q);
  double integral = 0.0;
  for (int i = 0; i + 1 < nq; ++i)
    integral += 0.5 * (pdf[i] + pdf[i + 1]) * (q(i + 1, 0) - q(i, 0));
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));

  // explicitly symmetric data gives an exactly symmetric estimate
  SampleSet sym(4, 1);
  sym << -2.0, -0.5, 0.5, 2.0;
  SampleSet qq(2, 1);
  qq << -1.3, 1.3;
  const Eigen::VectorXd p2 = metrics::kde_pdf(sym, qq);
  CHECK(p2[0] == doctest::Approx(p2[1]).epsilon(1e-12));
}

TEST_CASE("KDE of a single point is a Gaussian bump at that point") {
  SampleSet s(1, 1);
  s << 1.5;
  SampleSet q(3, 1);
  q << 1.5, 1.0, 2.0;
  const Eigen::VectorXd p = metrics::kde_pdf(s, q, 0.3);
  CHECK(p[0] == doctest::Approx(1.0 / (0.3 * std::sqrt(2.0 * M_PI))).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(p[2]).epsilon(1e-12));
  CHECK(p[1] < p[0]);
}

TEST_CASE("KDE rejects zero-variance data under automatic bandwidth") {
  SampleSet s(5, 1);
  s.setConstant(2.0);
  SampleSet q(1, 1);
  q << 2.0;
  CHECK_THROWS_AS(metrics::kde_pdf(s, q), std::invalid_argument);
}

TEST_CASE("stress quantity of interest evaluates each parameter vector") {
  node::NodeArch arch;
  arch.kind = node::ArchKind::Iso2;
  node::ConstitutiveModel model(arch, 9);
  std::mt19937_64 rng(6);
  std::vector<Eigen::VectorXd> phis;
  for (int i = 0; i < 4; ++i) phis.push_back(testutil::randn(model.individual_dim(), rng));

  const SampleSet qoi =
      metrics::qoi_stress_samples(phis, model, mech::Protocol::Equibiaxial, 1.2);
  REQUIRE(qoi.rows() == 4);
  REQUIRE(qoi.cols() == 1);
  for (int i = 0; i < 4; ++i) {
    node::ConstitutiveModel m2 = model;
    m2.set_individual(phis[i]);
    CHECK(qoi(i, 0) ==
          doctest::Approx(m2.predict_stress(mech::Protocol::Equibiaxial, 1.2).sxx)
              .epsilon(1e-14));
  }
}
