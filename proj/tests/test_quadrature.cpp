#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sonine/error.hpp"
#include "sonine/kernels.hpp"
#include "sonine/quadrature.hpp"

using namespace sonine;
using namespace sonine::quad;

// int_0^1 (1-z)^{a-1} z^{-a} z^k dz
static double jacobi_moment(double a, int k) { return std::beta(k + 1.0 - a, a); }

TEST_CASE("Gauss-Legendre on [0,1]") {
  for (int n : {1, 2, 5, 12}) {
    const GaussRule& r = gauss_legendre(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double sum = 0.0;
      for (std::size_t j = 0; j < r.nodes.size(); ++j) sum += r.weights[j] * std::pow(r.nodes[j], k);
      CHECK(sum == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
    }
  }
  CHECK(&gauss_legendre(4) == &gauss_legendre(4));
}

TEST_CASE("Jacobi rule moments") {
  for (double a : {0.3, 0.5, 0.7}) {
    for (int n : {4, 16, 32}) {
      const JacobiRule r = jacobi_rule(a, n);
      REQUIRE(r.nodes.size() == static_cast<std::size_t>(n));
      for (std::size_t j = 0; j + 1 < r.nodes.size(); ++j) CHECK(r.nodes[j] < r.nodes[j + 1]);
      CHECK(r.nodes.front() > 0.0);
      CHECK(r.nodes.back() < 1.0);
      for (int k = 0; k <= 2 * n - 1; ++k) {
        const double got = r.apply([k](double z) { return std::pow(z, k); });
        CHECK(got == doctest::Approx(jacobi_moment(a, k)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("sqrt-mapped Jacobi rule") {
  for (double a : {0.3, 0.5, 0.7}) {
    const JacobiRule r = jacobi_rule_sqrt(a, 32);
    double total = 0.0;
    for (double w : r.weights) {
      CHECK(w > 0.0);
      total += w;
    }
    CHECK(total == doctest::Approx(kernels::kappa(a)).epsilon(1e-13));
    for (int k = 0; k <= 31; ++k)
      CHECK(r.apply([k](double z) { return std::pow(z, k); }) == doctest::Approx(jacobi_moment(a, k)).epsilon(1e-12));
    // half-integer powers are polynomials after z = y^2
    for (int k = 0; k <= 14; ++k)
      CHECK(r.apply([k](double z) { return std::pow(z, k + 0.5); }) ==
            doctest::Approx(std::beta(k + 1.5 - a, a)).epsilon(1e-12));
  }
}

TEST_CASE("Jacobi rule input validation") {
  CHECK_THROWS_AS(jacobi_rule(0.0, 8), ValidationError);
  CHECK_THROWS_AS(jacobi_rule(1.0, 8), ValidationError);
  CHECK_THROWS_AS(jacobi_rule(0.5, 0), ValidationError);
}

TEST_CASE("graded mesh") {
  const Mesh m = Mesh::graded(2.0, 8, 3.0);
  CHECK(m.steps() == 8);
  CHECK(m[0] == 0.0);
  CHECK(m[8] == 2.0);
  CHECK(m[4] == doctest::Approx(2.0 * std::pow(0.5, 3)));
  for (int i = 1; i <= 8; ++i) CHECK(m.step(i) > 0.0);
  CHECK(Mesh::uniform(1.0, 4).is_uniform());
  CHECK_FALSE(m.is_uniform());
  CHECK_THROWS_AS(Mesh::graded(1.0, 0, 2.0), ValidationError);
  CHECK_THROWS_AS(Mesh::graded(-1.0, 4, 2.0), ValidationError);
  CHECK_THROWS_AS(Mesh::graded(1.0, 4, 0.5), ValidationError);
  CHECK(default_grading(0.5) == 4.0);
  CHECK(default_grading(0.3) == doctest::Approx(2.0 / 0.3));
}

TEST_CASE("panel moments agree across the series switch") {
  for (double beta : {0.3, 0.5, 0.9}) {
    for (double near : {0.0, 1e-9, 0.4999, 0.5001, 3.0}) {
      const double h = 1.0;
      const PanelMoments pm = panel_moments(beta, near, near + h);
      const double total = (std::pow(near + h, 1 - beta) - std::pow(near, 1 - beta)) / (1 - beta);
      CHECK(pm.total == doctest::Approx(total).epsilon(1e-13));
      // int u^{-beta} (far - u)/h du
      const double far = near + h;
      const double nh = (far * total - (std::pow(far, 2 - beta) - std::pow(near, 2 - beta)) / (2 - beta)) / h;
      CHECK(pm.near_hat == doctest::Approx(nh).epsilon(1e-11));
    }
  }
}

TEST_CASE("power_conv_weights row sums and linear exactness") {
  for (double beta : {0.3, 0.5, 0.7}) {
    const Mesh m = Mesh::graded(1.0, 40, 2.5);
    for (int i : {1, 7, 40}) {
      const auto w = power_conv_weights(beta, m, i);
      REQUIRE(w.size() == static_cast<std::size_t>(i) + 1);
      double sum = 0.0, lin = 0.0;
      for (int j = 0; j <= i; ++j) {
        sum += w[static_cast<std::size_t>(j)];
        lin += w[static_cast<std::size_t>(j)] * m[j];
      }
      const double ti = m[i];
      CHECK(sum == doctest::Approx(std::pow(ti, 1 - beta) / (1 - beta)).epsilon(1e-13));
      CHECK(lin == doctest::Approx(std::pow(ti, 2 - beta) * std::beta(2.0, 1 - beta)).epsilon(1e-12));
    }
  }
}

TEST_CASE("product weights at either singular end") {
  const std::vector<double> x{0.0, 0.1, 0.35, 0.6, 1.0};
  const double beta = 0.4;
  const auto left = product_weights(beta, x, SingularEnd::Left);
  const auto right = product_weights(beta, x, SingularEnd::Right);
  double l0 = 0.0, r0 = 0.0, l1 = 0.0, r1 = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    l0 += left[j];
    r0 += right[j];
    l1 += left[j] * x[j];
    r1 += right[j] * x[j];
  }
  CHECK(l0 == doctest::Approx(1.0 / 0.6).epsilon(1e-13));
  CHECK(r0 == doctest::Approx(1.0 / 0.6).epsilon(1e-13));
  CHECK(l1 == doctest::Approx(1.0 / 1.6).epsilon(1e-13));                      // int s^{0.6} ds
  CHECK(r1 == doctest::Approx(std::beta(2.0, 0.6)).epsilon(1e-13));            // int (1-s)^{-0.4} s ds
}

TEST_CASE("graded panel quadrature") {
  CHECK(graded_panel_quad([](double x) { return std::pow(x, -0.5); }, 0.0, 1.0, SingularEnd::Left) ==
        doctest::Approx(2.0).epsilon(1e-10));
  CHECK(graded_panel_quad([](double x) { return std::pow(x, -0.9); }, 0.0, 1.0, SingularEnd::Left) ==
        doctest::Approx(10.0).epsilon(1e-8));
  CHECK(graded_panel_quad([](double x) { return std::pow(x, -0.5) * std::log(x); }, 0.0, 1.0, SingularEnd::Left) ==
        doctest::Approx(-4.0).epsilon(1e-12));
  // away from 0 the distance to the end is only known to a few ulps
  CHECK(graded_panel_quad([](double x) { return std::pow(2.0 - x, -0.5) * std::log(2.0 - x); }, 1.0, 2.0,
                          SingularEnd::Right) == doctest::Approx(-4.0).epsilon(1e-7));
  CHECK(graded_panel_quad([](double x) { return std::pow(2.0 - x, -0.5); }, 1.0, 2.0, SingularEnd::Right) ==
        doctest::Approx(2.0).epsilon(1e-8));
  CHECK(graded_panel_quad([](double x) { return std::cos(x); }, 0.0, 2.0, SingularEnd::Left) ==
        doctest::Approx(std::sin(2.0)).epsilon(1e-13));
  CHECK_THROWS_AS(graded_panel_quad([](double) { return std::nan(""); }, 0.0, 1.0, SingularEnd::Left),
                  NumericalError);
  int count = 0;
  graded_panel_nodes(0.0, 1.0, SingularEnd::Left, 4, 3, [&](double x, double w) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
    CHECK(w > 0.0);
    ++count;
  });
  CHECK(count == 5 * 3);
}
