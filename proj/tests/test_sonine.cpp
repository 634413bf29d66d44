#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "sonine/error.hpp"
#include "sonine/sonine.hpp"

using namespace sonine;
using kernels::KernelPair;
using kernels::Normalization;
using kernels::VarExponent;
using kernels::Weight;

namespace {

KernelPair pair_of(const std::string& alpha, Normalization n = Normalization::Plain) {
  return KernelPair(VarExponent(expr::parse(alpha), 1.0), 1.0, n);
}
Weight weight_of(const char* w) { return Weight(expr::parse(w), 1.0); }

// int_0^t w(s, z+s) K(t-z) k(z) dz, straight from the definition
double g_oracle(const KernelPair& p, const Weight& w, double s, double t) {
  boost::math::quadrature::tanh_sinh<double> ts;
  auto f = [&](double z, double zc) {
    const double right = zc > 0 ? zc : t - z;
    return w(s, z + s) * kernels::eval_K(p, right) * kernels::eval_k(p, z);
  };
  return ts.integrate(f, 0.0, t);
}

// int_0^t w(s, z+s) k(t-z) K(z) dz
double G_oracle(const KernelPair& p, const Weight& w, double s, double t) {
  boost::math::quadrature::tanh_sinh<double> ts;
  auto f = [&](double z, double zc) {
    const double right = zc > 0 ? zc : t - z;
    return w(s, z + s) * kernels::eval_k(p, right) * kernels::eval_K(p, z);
  };
  return ts.integrate(f, 0.0, t);
}

}  // namespace

TEST_CASE("CSC residual for constant exponents") {
  for (double a : {0.2, 0.5, 0.8}) {
    for (auto n : {Normalization::Plain, Normalization::Gamma}) {
      const KernelPair p = pair_of(std::to_string(a), n);
      for (double t : {1e-6, 0.01, 0.5, 1.0}) CHECK(csc_residual(p, t) <= 1e-13);
    }
  }
  CHECK(csc_residual(pair_of("0.5+0.2*t"), 0.5) > 1e-3);
  CHECK_THROWS_AS(csc_residual(pair_of("0.5"), 0.0), DomainError);
  CHECK_THROWS_AS(csc_residual(pair_of("0.5"), 1.5), DomainError);
}

TEST_CASE("g against the defining integral") {
  const KernelPair p = pair_of("0.5+0.2*t");
  const Weight w = weight_of("1+s*t");
  const SonineData d(p, w);
  for (auto [s, t] : {std::pair{0.0, 0.3}, {0.2, 0.5}, {0.5, 0.5}, {0.1, 0.9}}) {
    CAPTURE(s);
    CAPTURE(t);
    CHECK(eval_g(d, s, t) == doctest::Approx(g_oracle(p, w, s, t)).epsilon(1e-9));
  }
  const SonineData e(pair_of("0.3+0.1*sin(t)", Normalization::Gamma), weight_of("exp(-(t-s))"));
  CHECK(eval_g(e, 0.25, 0.6) == doctest::Approx(g_oracle(e.pair(), e.weight(), 0.25, 0.6)).epsilon(1e-9));
}

TEST_CASE("g closed form for a bilinear weight") {
  // constant exponent 1/2, w = 1 + s t: g(s,t) = 1 + s^2 + s t / 2, g_2 = s / 2
  const SonineData d(pair_of("0.5"), weight_of("1+s*t"));
  for (double s : {0.0, 0.3, 0.6})
    for (double t : {0.1, 0.4}) {
      CHECK(eval_g(d, s, t) == doctest::Approx(1 + s * s + s * t / 2).epsilon(1e-12));
      CHECK(eval_g2(d, s, t) == doctest::Approx(s / 2).epsilon(1e-12));
    }
}

TEST_CASE("g at t = 0 is exact and continuous") {
  const SonineData d(pair_of("0.5+0.2*t"), weight_of("1+s*t"));
  for (double s : {0.0, 0.25, 0.5}) {
    CHECK(eval_g(d, s, 0.0) == 1.0 + s * s);
    CHECK(std::abs(eval_g(d, s, 1e-6) - (1.0 + s * s)) <= 1e-4);
  }
  CHECK_THROWS_AS(eval_g(d, 0.6, 0.6), DomainError);
  CHECK_THROWS_AS(eval_g2(d, 0.1, 0.0), DomainError);
}

TEST_CASE("g_2 against differences of g") {
  const SonineData d(pair_of("0.5+0.2*sin(t)"), weight_of("exp(-(t-s))"));
  for (auto [s, t] : {std::pair{0.0, 0.2}, {0.3, 0.5}, {0.1, 0.85}}) {
    const double h = 1e-5;
    const double fd = (eval_g(d, s, t + h) - eval_g(d, s, t - h)) / (2 * h);
    CHECK(eval_g2(d, s, t) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("G, its t = 0 value and closed form") {
  const KernelPair p = pair_of("0.5");
  const Weight w = weight_of("1+s*t");
  for (double s : {0.0, 0.25, 0.5}) CHECK(eval_G(p, w, s, 0.0) == w(s, s));
  for (double t : {0.2, 0.7}) {
    CHECK(eval_G(p, w, 0.0, t) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eval_G(p, w, 0.3, t) == doctest::Approx(1.09 + 0.15 * t).epsilon(1e-12));
  }
  const KernelPair q = pair_of("0.3", Normalization::Gamma);
  const Weight e = weight_of("exp(-(t-s))");
  CHECK(eval_G(q, e, 0.2, 0.6) == doctest::Approx(G_oracle(q, e, 0.2, 0.6)).epsilon(1e-9));
  const double h = 1e-4;
  CHECK(eval_G2(q, e, 0.2, 0.5) ==
        doctest::Approx((eval_G(q, e, 0.2, 0.5 + h) - eval_G(q, e, 0.2, 0.5 - h)) / (2 * h)).epsilon(1e-6));
  CHECK_THROWS_AS(eval_G(pair_of("0.5+0.2*t"), w, 0.0, 0.5), UnsupportedError);
}

TEST_CASE("WSC1 screening") {
  const SonineData ok(pair_of("0.5+0.2*t"), weight_of("1+s*t"));
  CHECK(ok.wsc1_valid());
  CHECK(ok.g00() == 1.0);
  CHECK(ok.g2_bound_sample() > 0.0);
  const SonineData bad(pair_of("0.5"), weight_of("t"));
  CHECK_FALSE(bad.wsc1_valid());
  CHECK(bad.wsc1_failure().rfind("(i)/(a)", 0) == 0);
}

TEST_CASE("verification reports") {
  const auto grid = uniform_grid(0.0, 1.0, 5);
  CHECK(grid.size() == 5);
  CHECK(grid[2] == 0.5);
  const KernelPair p = pair_of("0.5");
  const Weight w = weight_of("1+s*t");
  const SonineData d(p, w);

  const auto times = uniform_grid(0.1, 1.0, 10);
  const auto csc = csc_report(p, times);
  CHECK(csc.pass);
  CHECK(csc.max_residual <= 1e-12);

  const auto r1 = wsc1_report(d, grid);
  CHECK(r1.pass);
  CHECK(r1.nu_lower == doctest::Approx(1.0));
  CHECK(r1.g2_l1_max > 0.0);
  const auto r2 = wsc2_report(p, w, grid);
  CHECK(r2.pass);
  CHECK_THROWS_AS(wsc2_report(pair_of("0.5+0.2*t"), w, grid), UnsupportedError);

  const SonineData bad(p, weight_of("t"));
  const auto rb = wsc1_report(bad, grid);
  CHECK_FALSE(rb.pass);
  CHECK(rb.failed == "(i)/(a)");
  CHECK(rb.summary().find("(i)") != std::string::npos);

  std::ostringstream os;
  r1.write_csv(os);
  CHECK(os.str().rfind("point,residual\n0,", 0) == 0);
  CHECK(r1.summary().find("WSC1") == 0);
}

TEST_CASE("associate from the second weighted condition") {
  // w = 1: G = 1, G_2 = 0 and the associate is K itself
  const KernelPair p = pair_of("0.5");
  const auto mesh = quad::Mesh::graded(1.0, 64, 4.0);
  const std::vector<double> chk{0.25, 0.5, 1.0};
  const auto rep = associate_from_wsc2(p, weight_of("1"), mesh, chk);
  for (int i = 1; i <= 64; ++i)
    CHECK(rep.u[static_cast<std::size_t>(i)] == doctest::Approx(kernels::eval_K(p, mesh[i])).epsilon(1e-12));
  // nodal values are exact; the residual is that of the linear interpolant of K
  CHECK(rep.max_residual <= 5e-3);
  const auto finer = associate_from_wsc2(p, weight_of("1"), quad::Mesh::graded(1.0, 256, 4.0), chk);
  CHECK(finer.max_residual < 0.25 * rep.max_residual);
  const auto bil = associate_from_wsc2(p, weight_of("1+s*t"), mesh, chk);
  CHECK(bil.max_residual <= 1e-2);
}
