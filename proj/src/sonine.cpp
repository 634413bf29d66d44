#include "sonine/sonine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>

#include "sonine/error.hpp"

namespace sonine {

using kernels::KernelPair;
using kernels::Weight;

const quad::JacobiRule& sonine_rule(double alpha0, int n) {
  static std::mutex mu;
  static std::map<std::pair<double, int>, std::unique_ptr<quad::JacobiRule>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{alpha0, n}];
  if (!slot) slot = std::make_unique<quad::JacobiRule>(quad::jacobi_rule_sqrt(alpha0, n));
  return *slot;
}

namespace {

void check_triangle(double s, double t, double b, const char* who) {
  if (!(s >= 0.0 && t >= 0.0 && s + t <= b * (1.0 + 1e-12)))
    throw DomainError(std::string(who) + ": need 0 <= s, 0 <= t, s + t <= b");
}

double pair_scale(const KernelPair& pair) { return pair.k_scale() / pair.K_divisor(); }

}  // namespace

SonineData::SonineData(KernelPair pair, Weight weight, int jacobi_n)
    : pair_(std::move(pair)), weight_(std::move(weight)), rule_(&sonine_rule(pair_.alpha0(), jacobi_n)) {
  const double b = pair_.horizon();
  g00_ = weight_(0.0, 0.0);
  nu_lower_ = weight_.mu_lower();
  nu_upper_ = weight_.mu_upper();
  if (!weight_.satisfies_condition_i() || g00_ == 0.0) {
    failure_ = "(i)/(a): w(t,t) vanishes on the sampling grid";
    return;
  }
  // coarse |g_2| sample on 0 < t, s + t <= b
  const int m = 16;
  for (int i = 1; i <= m; ++i) {
    const double t = b * i / m;
    for (int j = 0; j + i <= m; ++j) {
      const double v = eval_g2(*this, b * j / m, t);
      if (!std::isfinite(v)) {
        failure_ = "(b): g_2 is not finite";
        return;
      }
      g2_bound_ = std::max(g2_bound_, std::abs(v));
    }
  }
  for (int j = 0; j < m; ++j) {
    const double s = b * j / m;
    const double tau = std::min(1e-6, b - s);
    if (std::abs(eval_g(*this, s, tau) - weight_(s, s)) > kContinuityTolerance) {
      failure_ = "(b): g(s,t) does not approach w(s,s) as t -> 0";
      return;
    }
  }
}

double eval_g(const SonineData& data, double s, double t) {
  check_triangle(s, t, data.horizon(), "eval_g");
  const Weight& w = data.weight();
  if (t == 0.0) return w(s, s);
  const KernelPair& pair = data.pair();
  const quad::JacobiRule& rule = data.rule();
  double sum = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    const double z = rule.nodes[j];
    sum += rule.weights[j] * w(s, t * z + s) * kernels::smooth_factor(pair, t * z);
  }
  return sum * pair_scale(pair);
}

double eval_g2(const SonineData& data, double s, double t) {
  check_triangle(s, t, data.horizon(), "eval_g2");
  if (!(t > 0.0)) throw DomainError("eval_g2: t must be positive");
  const Weight& w = data.weight();
  const KernelPair& pair = data.pair();
  const quad::JacobiRule& rule = data.rule();
  const bool constant = pair.constant_exponent();
  if (constant && w.t_independent()) return 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    const double z = rule.nodes[j];
    const double y = t * z + s;
    if (constant) {
      sum += rule.weights[j] * w.dt(s, y) * z;
    } else {
      const kernels::SmoothSample sm = kernels::smooth_factor_with_dt(pair, t, z);
      sum += rule.weights[j] * (w.dt(s, y) * z * sm.value + w(s, y) * sm.dt);
    }
  }
  return sum * pair_scale(pair);
}

double csc_residual(const KernelPair& pair, double t, int rule_n) {
  if (!(t > 0.0 && t <= pair.horizon() * (1.0 + 1e-12))) throw DomainError("csc_residual: need 0 < t <= b");
  const quad::JacobiRule& rule = sonine_rule(pair.alpha0(), rule_n);
  double sum = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j)
    sum += rule.weights[j] * kernels::smooth_factor(pair, t * rule.nodes[j]);
  return std::abs(sum * pair_scale(pair) - 1.0);
}

double eval_G(const KernelPair& pair, const Weight& weight, double s, double t, int rule_n) {
  if (!pair.constant_exponent()) throw UnsupportedError("eval_G: only constant exponents are supported");
  check_triangle(s, t, pair.horizon(), "eval_G");
  const double wss = weight(s, s);
  if (t == 0.0) return wss;
  // z = t*zhat: k(t zhat) K(t - t zhat) t dzhat = zhat^{-a0} (1-zhat)^{a0-1} dzhat / kappa
  const quad::JacobiRule& rule = sonine_rule(pair.alpha0(), rule_n);
  double sum = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    const double z = rule.nodes[j];
    sum += rule.weights[j] * (weight(s, t - t * z + s) - wss);
  }
  return wss + sum * pair_scale(pair);
}

double eval_G2(const KernelPair& pair, const Weight& weight, double s, double t, int rule_n) {
  const double h = 1e-5 * std::max(t, 0.01);
  const double b = pair.horizon();
  if (t >= h && s + t + h <= b) return (eval_G(pair, weight, s, t + h, rule_n) - eval_G(pair, weight, s, t - h, rule_n)) / (2 * h);
  if (s + t + h <= b) return (eval_G(pair, weight, s, t + h, rule_n) - eval_G(pair, weight, s, t, rule_n)) / h;
  return (eval_G(pair, weight, s, t, rule_n) - eval_G(pair, weight, s, t - h, rule_n)) / h;
}

// ---------------------------------------------------------------------------

void VerificationReport::write_csv(std::ostream& os) const {
  os << "point,residual\n";
  char buf[64];
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", grid[i], residuals[i]);
    os << buf;
  }
}

std::string VerificationReport::summary() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s max_residual=%.3e tolerance=%.1e pass=%s", condition.c_str(), max_residual,
                tolerance, pass ? "true" : "false");
  std::string out = buf;
  if (!pass) out += " failed=" + failed;
  if (!detail.empty()) out += " (" + detail + ")";
  return out;
}

std::vector<double> uniform_grid(double lo, double hi, int n) {
  if (n < 1) throw ValidationError("uniform_grid: need at least one point");
  if (n == 1) return {lo};
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  g.back() = hi;
  return g;
}

VerificationReport csc_report(const KernelPair& pair, std::span<const double> times, int rule_n, double tolerance) {
  VerificationReport r;
  r.condition = "CSC";
  r.tolerance = tolerance;
  for (double t : times) {
    const double v = csc_residual(pair, t, rule_n);
    r.grid.push_back(t);
    r.residuals.push_back(v);
    r.max_residual = std::max(r.max_residual, v);
  }
  r.pass = r.max_residual <= tolerance;
  if (!r.pass) r.failed = "CSC";
  if (!pair.constant_exponent()) r.detail = "variable exponent: K is not the classical associate";
  return r;
}

namespace {

template <class Value, class Deriv>
VerificationReport weighted_report(const char* name, double b, std::span<const double> s_grid, double tolerance,
                                   const Weight& weight, Value value, Deriv deriv, int levels, int nodes) {
  VerificationReport r;
  r.condition = name;
  r.tolerance = tolerance;
  r.nu_lower = std::numeric_limits<double>::infinity();
  auto fail = [&](const std::string& cond, const std::string& why) {
    if (r.pass) {
      r.pass = false;
      r.failed = cond;
      r.detail = why;
    }
  };
  if (!weight.satisfies_condition_i()) fail("(i)/(a)", "w(t,t) vanishes on the sampling grid");
  for (double s : s_grid) {
    double residual = 0.0;
    try {
      const double g0 = value(s, 0.0);
      r.nu_lower = std::min(r.nu_lower, std::abs(g0));
      r.nu_upper = std::max(r.nu_upper, std::abs(g0));
      if (!(std::abs(g0) > 0.0)) fail("(i)/(a)", "g(s,0) = 0 at s = " + std::to_string(s));
      const double tau = std::min(1e-6, b - s);
      if (tau > 0.0) {
        residual = std::abs(value(s, tau) - g0);
        const double l1 = quad::graded_panel_quad([&](double x) { return std::abs(deriv(s, x)); }, 0.0, b - s,
                                                  quad::SingularEnd::Left, levels, nodes);
        r.g2_l1_max = std::max(r.g2_l1_max, l1);
      }
    } catch (const Error& e) {
      fail("(b)", std::string("evaluation failed: ") + e.what());
      residual = std::numeric_limits<double>::infinity();
    }
    if (!(residual <= tolerance)) fail("(b)", "t -> 0 limit not attained at s = " + std::to_string(s));
    r.grid.push_back(s);
    r.residuals.push_back(residual);
    r.max_residual = std::max(r.max_residual, residual);
  }
  return r;
}

}  // namespace

VerificationReport wsc1_report(const SonineData& data, std::span<const double> s_grid, double tolerance,
                               int panel_levels, int panel_nodes) {
  return weighted_report(
      "WSC1", data.horizon(), s_grid, tolerance, data.weight(),
      [&](double s, double t) { return eval_g(data, s, t); }, [&](double s, double t) { return eval_g2(data, s, t); },
      panel_levels, panel_nodes);
}

VerificationReport wsc2_report(const KernelPair& pair, const Weight& weight, std::span<const double> s_grid,
                               double tolerance, int rule_n) {
  if (!pair.constant_exponent())
    throw UnsupportedError("WSC2 verification requires a constant exponent (G is not available for variable alpha)");
  return weighted_report(
      "WSC2", pair.horizon(), s_grid, tolerance, weight,
      [&](double s, double t) { return eval_G(pair, weight, s, t, rule_n); },
      [&](double s, double t) { return eval_G2(pair, weight, s, t, rule_n); }, 20, 8);
}

}  // namespace sonine
