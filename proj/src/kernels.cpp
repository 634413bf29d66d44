#include "sonine/kernels.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>

#include "sonine/error.hpp"

namespace sonine::kernels {

double gamma(double x) {
  if (!(x > 0.0)) throw DomainError("gamma: argument must be positive, got " + std::to_string(x));
  return std::tgamma(x);
}

double digamma(double x) {
  if (!(x > 0.0)) throw DomainError("digamma: argument must be positive");
  return boost::math::digamma(x);
}

double kappa(double alpha0) {
  if (!(alpha0 > 0.0 && alpha0 < 1.0)) throw DomainError("kappa: alpha0 must lie in (0,1)");
  return gamma(alpha0) * gamma(1.0 - alpha0);
}

// ---------------------------------------------------------------------------

VarExponent::VarExponent(expr::Expr alpha, double horizon)
    : alpha_(std::move(alpha)), alpha_prime_(expr::diff(alpha_, expr::Var::T)) {
  if (!(horizon > 0.0)) throw ValidationError("exponent: horizon must be positive");
  if (alpha_.depends_on(expr::Var::S) || alpha_.depends_on(expr::Var::X))
    throw ValidationError("exponent: alpha may depend on t only");
  constant_ = alpha_prime_.is_zero();
  alpha0_ = (*this)(0.0);
  const int n = kValidationGridPoints;
  for (int i = 0; i < n; ++i) {
    double t = horizon * i / (n - 1);
    double a = (*this)(t);
    if (!(a > 0.0 && a < 1.0))
      throw ValidationError("exponent: alpha(" + std::to_string(t) + ") = " + std::to_string(a) +
                            " is outside (0,1)");
    lipschitz_ = std::max(lipschitz_, std::abs(derivative(t)));
  }
}

KernelPair::KernelPair(VarExponent exponent, double horizon, Normalization norm)
    : exponent_(std::move(exponent)), kappa_(kernels::kappa(exponent_.alpha0())), horizon_(horizon), norm_(norm) {
  if (!(horizon > 0.0)) throw ValidationError("kernel pair: horizon must be positive");
  const double a0 = exponent_.alpha0();
  if (norm_ == Normalization::Plain) {
    k_scale_ = 1.0;
    K_divisor_ = kappa_;
  } else {
    k_scale_ = 1.0 / gamma(1.0 - a0);
    K_divisor_ = gamma(a0);
  }
}

double eval_k(const KernelPair& pair, double t) {
  if (!(t > 0.0)) throw DomainError("k(t): t must be positive (kernel is unbounded at 0)");
  double a = pair.exponent()(t);
  double v = std::exp(-a * std::log(t));
  if (pair.normalization() == Normalization::Gamma) v /= gamma(1.0 - a);
  return v;
}

double eval_K(const KernelPair& pair, double t) {
  if (!(t > 0.0)) throw DomainError("K(t): t must be positive (kernel is unbounded at 0)");
  return std::exp((pair.alpha0() - 1.0) * std::log(t)) / pair.K_divisor();
}

double smooth_factor(const KernelPair& pair, double x) {
  if (x == 0.0) return 1.0;
  if (x < 0.0) throw DomainError("smooth_factor: x must be nonnegative");
  if (pair.constant_exponent()) return 1.0;
  const double a0 = pair.alpha0();
  const double a = pair.exponent()(x);
  double v = std::exp((a0 - a) * std::log(x));
  if (pair.normalization() == Normalization::Gamma) v *= gamma(1.0 - a0) / gamma(1.0 - a);
  return v;
}

SmoothSample smooth_factor_with_dt(const KernelPair& pair, double t, double z) {
  const double x = t * z;
  if (!(x > 0.0)) throw DomainError("smooth_factor_dt: t*z must be positive");
  if (pair.constant_exponent()) return {1.0, 0.0};
  const double a0 = pair.alpha0();
  const double a = pair.exponent()(x);
  const double da = pair.exponent().derivative(x);
  const double lx = std::log(x);
  double factor = std::exp((a0 - a) * lx);
  double log_rate = -da * lx + (a0 - a) / x;
  if (pair.normalization() == Normalization::Gamma) {
    factor *= gamma(1.0 - a0) / gamma(1.0 - a);
    log_rate += digamma(1.0 - a) * da;
  }
  return {factor, factor * z * log_rate};
}

double smooth_factor_dt(const KernelPair& pair, double t, double z) { return smooth_factor_with_dt(pair, t, z).dt; }

// ---------------------------------------------------------------------------

Weight::Weight(expr::Expr w, double horizon)
    : w_(std::move(w)), w1_(expr::diff(w_, expr::Var::S)), w2_(expr::diff(w_, expr::Var::T)) {
  if (!(horizon > 0.0)) throw ValidationError("weight: horizon must be positive");
  if (w_.depends_on(expr::Var::X)) throw ValidationError("weight: w may depend on s and t only");
  const int n = kValidationGridPoints;
  mu_lower_ = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double t = horizon * i / (n - 1);
    double v = std::abs(w_(t, t));
    mu_lower_ = std::min(mu_lower_, v);
    mu_upper_ = std::max(mu_upper_, v);
  }
  // |w_2| on the triangle 0 <= s <= t <= b.
  const int m = 64;
  for (int i = 0; i <= m; ++i) {
    double t = horizon * i / m;
    for (int j = 0; j <= i; ++j) {
      double s = horizon * j / m;
      w2_bound_ = std::max(w2_bound_, std::abs(w2_(s, t)));
    }
  }
}

// ---------------------------------------------------------------------------

std::optional<std::string> exponent_preset(std::string_view name) {
  if (name == "abel-const") return "0.5";
  if (name == "abel-linear") return "0.5+0.2*t";
  if (name == "abel-sin") return "0.5+0.2*sin(t)";
  return std::nullopt;
}

std::optional<std::string> weight_preset(std::string_view name) {
  if (name == "w-one") return "1";
  if (name == "w-bilinear") return "1+s*t";
  if (name == "w-expdiff") return "exp(-(t-s))";
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

LicmReport licm_check(const std::function<double(double)>& f, int order, std::span<const double> grid) {
  if (order < 0 || order > 4) throw ValidationError("licm_check: order must lie in [0, 4]");
  LicmReport report;
  report.checked_order = order;
  constexpr double rel_step = 0.05;
  for (double t : grid) {
    if (!(t > 0.0)) throw ValidationError("licm_check: grid must lie inside (0, b]");
    const double h = rel_step * t;
    for (int n = 0; n <= order; ++n) {
      // n-th central difference: sum_k (-1)^k C(n,k) f(t + (n/2 - k) h)
      double diff = 0.0;
      double scale = 0.0;
      for (int k = 0; k <= n; ++k) {
        double v = f(t + (0.5 * n - k) * h);
        diff += ((k % 2) ? -1.0 : 1.0) * binomial(n, k) * v;
        scale = std::max(scale, std::abs(v));
      }
      const double hn = std::pow(h, n);
      const double signed_derivative = ((n % 2) ? -1.0 : 1.0) * diff / hn;
      if (signed_derivative < -1e-8 * scale / hn) {
        report.pass = false;
        report.first_violation_order = n;
        report.first_violation_t = t;
        return report;
      }
    }
  }
  return report;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0 && hi > lo && n >= 2)) throw ValidationError("log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> g(static_cast<std::size_t>(n));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
  g.back() = hi;
  return g;
}

}  // namespace sonine::kernels
