#pragma once

// Variable-exponent Abel kernel pair k(t) = t^{-alpha(t)}, K(t) = t^{alpha(0)-1}/kappa,
// weight functions w(s,t), and the completely-monotone sign screen.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sonine/expr.hpp"

namespace sonine::kernels {

// Number of uniform points on [0, b] used for the sampled bounds below.
inline constexpr int kValidationGridPoints = 1024;

double gamma(double x);
double digamma(double x);
// Gamma(a) * Gamma(1 - a) for a in (0, 1).
double kappa(double alpha0);

class VarExponent {
 public:
  // Validates 0 < alpha(t) < 1 on a 1024-point grid over [0, horizon].
  VarExponent(expr::Expr alpha, double horizon);

  double operator()(double t) const { return alpha_(0.0, t); }
  double derivative(double t) const { return alpha_prime_(0.0, t); }

  const expr::Expr& alpha() const { return alpha_; }
  const expr::Expr& alpha_prime() const { return alpha_prime_; }
  double alpha0() const { return alpha0_; }
  // max |alpha'| over the sampling grid (an empirical Lipschitz constant)
  double lipschitz_sample() const { return lipschitz_; }
  bool is_constant() const { return constant_; }

 private:
  expr::Expr alpha_;
  expr::Expr alpha_prime_;
  double alpha0_ = 0.0;
  double lipschitz_ = 0.0;
  bool constant_ = false;
};

// Plain:  k = t^{-alpha(t)},                K = t^{alpha0-1} / kappa
// Gamma:  k = t^{-alpha(t)}/Gamma(1-alpha), K = t^{alpha0-1} / Gamma(alpha0)
// Both satisfy the same Sonine identity at t -> 0; the subdiffusion model uses
// the Gamma form.
enum class Normalization { Plain, Gamma };

class KernelPair {
 public:
  KernelPair(VarExponent exponent, double horizon, Normalization norm = Normalization::Plain);

  const VarExponent& exponent() const { return exponent_; }
  double alpha0() const { return exponent_.alpha0(); }
  double kappa() const { return kappa_; }
  double horizon() const { return horizon_; }
  Normalization normalization() const { return norm_; }
  bool constant_exponent() const { return exponent_.is_constant(); }

  // k(s) = k_scale * s^{-alpha0} * smooth_factor(s)
  double k_scale() const { return k_scale_; }
  // K(t) = t^{alpha0-1} / K_divisor
  double K_divisor() const { return K_divisor_; }

 private:
  VarExponent exponent_;
  double kappa_;
  double horizon_;
  Normalization norm_;
  double k_scale_;
  double K_divisor_;
};

double eval_k(const KernelPair& pair, double t);
double eval_K(const KernelPair& pair, double t);

// x^{alpha0 - alpha(x)} (times Gamma(1-alpha0)/Gamma(1-alpha(x)) for the Gamma
// normalization); exactly 1 at x = 0.
double smooth_factor(const KernelPair& pair, double x);

// d/dt smooth_factor(t z).
double smooth_factor_dt(const KernelPair& pair, double t, double z);

struct SmoothSample {
  double value;  // smooth_factor(t z)
  double dt;     // smooth_factor_dt(t, z)
};
SmoothSample smooth_factor_with_dt(const KernelPair& pair, double t, double z);

class Weight {
 public:
  // Samples |w(t,t)| on [0, horizon] and |dw/dt| on the triangle s <= t. Does
  // not reject a weight violating condition (i); see satisfies_condition_i().
  Weight(expr::Expr w, double horizon);

  double operator()(double s, double t) const { return w_(s, t); }
  double dt(double s, double t) const { return w2_(s, t); }
  double ds(double s, double t) const { return w1_(s, t); }

  const expr::Expr& w() const { return w_; }
  const expr::Expr& w2() const { return w2_; }
  double mu_lower() const { return mu_lower_; }
  double mu_upper() const { return mu_upper_; }
  double w2_bound_sample() const { return w2_bound_; }
  bool satisfies_condition_i() const { return mu_lower_ > 0.0; }
  // dw/dt is identically zero (builder-folded).
  bool t_independent() const { return w2_.is_zero(); }

 private:
  expr::Expr w_;
  expr::Expr w1_;
  expr::Expr w2_;
  double mu_lower_ = 0.0;
  double mu_upper_ = 0.0;
  double w2_bound_ = 0.0;
};

// Stable preset names usable in config files.
std::optional<std::string> exponent_preset(std::string_view name);
std::optional<std::string> weight_preset(std::string_view name);

struct LicmReport {
  bool pass = true;
  int first_violation_order = -1;
  double first_violation_t = 0.0;
  int checked_order = 0;
};

// Checks (-1)^n f^(n)(t) >= -1e-8 * scale for n = 0..order at each grid point,
// with f^(n) replaced by an n-th central difference of step 0.05 t.
LicmReport licm_check(const std::function<double(double)>& f, int order, std::span<const double> grid);

// n log-spaced points on [lo, hi].
std::vector<double> log_grid(double lo, double hi, int n);

}  // namespace sonine::kernels
