#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sonine/error.hpp"
#include "sonine/expr.hpp"

using namespace sonine;
using expr::parse;
using expr::Var;

static double at(const char* text, double s, double t, double x = 0.0) { return parse(text)(s, t, x); }

TEST_CASE("precedence and associativity") {
  CHECK(at("1 + 2*3", 0, 0) == 7.0);
  CHECK(at("(1 + 2)*3", 0, 0) == 9.0);
  CHECK(at("2^3^2", 0, 0) == 512.0);
  CHECK(at("-2^2", 0, 0) == -4.0);
  CHECK(at("8/4/2", 0, 0) == 1.0);
  CHECK(at("1 - 2 - 3", 0, 0) == -4.0);
  CHECK(at("--3", 0, 0) == 3.0);
  CHECK(at("2*-3", 0, 0) == -6.0);
}

TEST_CASE("numbers, variables and functions") {
  CHECK(at("1.5e-1", 0, 0) == doctest::Approx(0.15));
  CHECK(at(".5", 0, 0) == 0.5);
  CHECK(at("s + 2*t + 3*x", 1, 2, 3) == 14.0);
  CHECK(at("pi", 0, 0) == std::numbers::pi);
  CHECK(at("exp(1)", 0, 0) == doctest::Approx(std::exp(1.0)));
  CHECK(at("ln(exp(2))", 0, 0) == doctest::Approx(2.0));
  CHECK(at("sin(t)^2 + cos(t)^2", 0, 0.7) == doctest::Approx(1.0));
  CHECK(at("sqrt(16)", 0, 0) == 4.0);
  CHECK(at("  1+\tt ", 0, 2) == 3.0);
}

TEST_CASE("parse errors carry byte offsets") {
  auto offset = [](const char* text) {
    try {
      (void)parse(text);
    } catch (const ParseError& e) {
      return static_cast<long>(e.offset());
    }
    return -1L;
  };
  CHECK(offset("1 + *t") == 4);
  CHECK(offset("2t") == 1);
  CHECK(offset("(1 + t") == 6);
  CHECK(offset("foo(t)") == 0);
  CHECK(offset("1 $ 2") == 2);
  CHECK(offset("") == 0);
  CHECK(offset("sin t") >= 0);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(at("ln(t)", 0, -1), DomainError);
  CHECK_THROWS_AS(at("sqrt(t)", 0, -1), DomainError);
  CHECK_THROWS_AS(at("1/t", 0, 0), DomainError);
  CHECK_THROWS_AS(at("t^(-0.5)", 0, 0), DomainError);
  CHECK_THROWS_AS(at("t^0.5", 0, -1), DomainError);
  CHECK(at("t^2", 0, -3) == 9.0);
  CHECK_THROWS_AS(parse("t").eval({}), DomainError);
}

TEST_CASE("variable tracking") {
  const auto e = parse("1 + s*t");
  CHECK(e.depends_on(Var::S));
  CHECK(e.depends_on(Var::T));
  CHECK_FALSE(e.depends_on(Var::X));
  CHECK(parse("2*pi").is_constant());
  CHECK(parse("2*3").constant_value() == 6.0);
  CHECK(std::isnan(parse("t").constant_value()));
}

TEST_CASE("symbolic derivative against finite differences") {
  const char* cases[] = {"t^2*sin(t)", "exp(-(t-s))", "0.5+0.2*sin(t)", "ln(1+t)/sqrt(t+2)", "t^t", "1+s*t",
                         "cos(t)^3 - t/(1+t^2)"};
  for (const char* c : cases) {
    CAPTURE(c);
    const auto e = parse(c);
    const auto d = expr::diff(e, Var::T);
    for (double t : {0.3, 0.9, 1.7}) {
      const double h = 1e-6;
      const double fd = (e(0.4, t + h) - e(0.4, t - h)) / (2 * h);
      CHECK(d(0.4, t) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("derivative folding") {
  CHECK(expr::diff(parse("1+s"), Var::T).is_zero());
  CHECK(expr::diff(parse("0.5"), Var::T).is_zero());
  CHECK_FALSE(expr::diff(parse("1+s*t"), Var::T).is_zero());
  CHECK(expr::diff(parse("1+s*t"), Var::S)(0.0, 2.5) == 2.5);
}

TEST_CASE("serialize round trip") {
  for (const char* c : {"-2^2", "2^3^2", "1-(2-3)", "sin(t)/(1+s)", "-(t-s)", "1e-3*x"}) {
    CAPTURE(c);
    const auto e = parse(c);
    const auto back = parse(expr::serialize(e));
    CHECK(back(0.3, 0.7, 0.2) == e(0.3, 0.7, 0.2));
  }
}
