#include "sonine/vie.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "sonine/error.hpp"

namespace sonine::vie {

using kernels::KernelPair;
using kernels::Weight;
using quad::Mesh;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double safe_eval(const std::function<double(double)>& fn, double t) {
  try {
    return fn(t);
  } catch (const DomainError&) {
    return kNaN;
  }
}

// Mesh points strictly below T, then T itself.
std::vector<double> nodes_upto(const Mesh& mesh, double T) {
  std::vector<double> x;
  const auto pts = mesh.points();
  const double tol = 1e-14 * mesh.horizon();
  for (double p : pts) {
    if (p < T - tol) x.push_back(p);
  }
  x.push_back(T);
  return x;
}

std::string fmt_t(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", t);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

Forcing Forcing::from_expr(const expr::Expr& f) {
  if (f.depends_on(expr::Var::S) || f.depends_on(expr::Var::X))
    throw ValidationError("forcing: f may depend on t only");
  expr::Expr fp = expr::diff(f, expr::Var::T);
  Forcing out;
  out.value = [f](double t) { return f(0.0, t); };
  out.derivative = [fp](double t) {
    if (t > 0.0) return fp(0.0, t);
    try {
      return fp(0.0, t);
    } catch (const DomainError&) {
      return kInf;
    }
  };
  return out;
}

Forcing Forcing::constant(double c) {
  return {[c](double) { return c; }, [](double) { return 0.0; }};
}

Forcing manufactured_forcing(const KernelPair& pair, const Weight& weight, const expr::Expr& u) {
  if (u.depends_on(expr::Var::S) || u.depends_on(expr::Var::X))
    throw ValidationError("manufactured forcing: u may depend on t only");
  expr::Expr up = expr::diff(u, expr::Var::T);
  Forcing out;
  out.value = [pair, weight, u](double t) {
    if (t == 0.0) return 0.0;
    // s = t - sigma; k singular at sigma = 0
    return quad::graded_panel_quad(
        [&](double sg) { return weight(t - sg, t) * kernels::eval_k(pair, sg) * u(0.0, t - sg); }, 0.0, t,
        quad::SingularEnd::Left, 24, 10);
  };
  out.derivative = [pair, weight, u, up](double t) {
    const double boundary0 = weight(0.0, t) * u(0.0, 0.0);
    if (t == 0.0) return boundary0 == 0.0 ? 0.0 : std::copysign(kInf, boundary0);
    const double boundary = boundary0 * kernels::eval_k(pair, t);
    return boundary + quad::graded_panel_quad(
                          [&](double sg) {
                            const double s = t - sg;
                            const double dw = weight.ds(s, t) + weight.dt(s, t);
                            return (dw * u(0.0, s) + weight(s, t) * up(0.0, s)) * kernels::eval_k(pair, sg);
                          },
                          0.0, t, quad::SingularEnd::Left, 24, 10);
  };
  return out;
}

// ---------------------------------------------------------------------------

void SolveReport::write_csv(std::ostream& os, std::span<const double> residual) const {
  os << "t,u,residual\n";
  char buf[96];
  for (int i = 0; i <= mesh.steps(); ++i) {
    if (i == 0 && singular_origin) continue;
    const auto k = static_cast<std::size_t>(i);
    if (residual.size() == u.size() && std::isfinite(residual[k]))
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", mesh[i], u[k], residual[k]);
    else
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,\n", mesh[i], u[k]);
    os << buf;
  }
}

std::vector<double> sample(const Mesh& mesh, const std::function<double(double)>& fn) {
  std::vector<double> v(static_cast<std::size_t>(mesh.steps()) + 1);
  for (int i = 0; i <= mesh.steps(); ++i) v[static_cast<std::size_t>(i)] = fn(mesh[i]);
  return v;
}

SolveReport solve_second_kind(const SecondKindProblem& problem, const Mesh& mesh) {
  const int n = mesh.steps();
  if (problem.rhs.size() != static_cast<std::size_t>(n) + 1)
    throw ValidationError("solve_second_kind: right-hand side must be sampled on the mesh");
  SolveReport rep;
  rep.mesh = mesh;
  rep.strategy = "second-kind";
  rep.u.assign(static_cast<std::size_t>(n) + 1, kNaN);
  auto& u = rep.u;
  const auto& r = problem.rhs;
  rep.singular_origin = !std::isfinite(r[0]);

  auto diag = [&](int i) {
    const double d = problem.diagonal(mesh[i]);
    if (!(std::abs(d) >= problem.d_min))
      throw NumericalError("diagonal coefficient vanishes at t = " + fmt_t(mesh[i]) + " (d = " + fmt_t(d) + ")");
    return d;
  };

  if (!rep.singular_origin) u[0] = r[0] / diag(0);
  const quad::GaussRule& gl2 = quad::gauss_legendre(2);

  for (int i = 1; i <= n; ++i) {
    const double ti = mesh[i];
    const double di = diag(i);
    double known = 0.0;
    double self = 0.0;
    if (problem.memory) {
      for (int j = 0; j + 1 < i; ++j) {
        const double a = mesh[j], h = mesh.step(j + 1);
        double wl = 0.0, wr = 0.0;
        for (std::size_t q = 0; q < gl2.nodes.size(); ++q) {
          const double y = a + h * gl2.nodes[q];
          const double m = problem.memory(y, ti) * h * gl2.weights[q];
          wl += m * (1.0 - gl2.nodes[q]);
          wr += m * gl2.nodes[q];
        }
        if (j == 0 && rep.singular_origin)
          known += (wl + wr) * u[1];
        else
          known += wl * u[static_cast<std::size_t>(j)] + wr * u[static_cast<std::size_t>(j) + 1];
      }
      const double a = mesh[i - 1], h = mesh.step(i);
      double wl = 0.0, wr = 0.0;
      quad::graded_panel_nodes(a, ti, quad::SingularEnd::Right, problem.adjacent_levels, problem.adjacent_nodes,
                               [&](double y, double w) {
                                 const double m = problem.memory(y, ti) * w;
                                 wl += m * (ti - y) / h;
                                 wr += m * (y - a) / h;
                               });
      if (i == 1 && rep.singular_origin) {
        self = wl + wr;
      } else {
        known += wl * u[static_cast<std::size_t>(i) - 1];
        self = wr;
      }
    }
    const double ui = (r[static_cast<std::size_t>(i)] - known) / (di + self);
    if (!std::isfinite(ui)) throw NumericalError("non-finite solution value at t = " + fmt_t(ti));
    u[static_cast<std::size_t>(i)] = ui;
  }
  return rep;
}

// ---------------------------------------------------------------------------

double power_conv(double beta, std::span<const double> x, const std::function<double(std::size_t)>& psi,
                  std::span<const double> phi, const std::function<double(std::size_t)>& panel_mean) {
  const std::size_t m = x.size();
  if (m < 2) return 0.0;
  const double T = x.back();
  double sum = 0.0;
  double psi_lo = psi(0);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const double psi_hi = psi(j + 1);
    const quad::PanelMoments pm = quad::panel_moments(beta, T - x[j + 1], T - x[j]);
    const double far_w = pm.total - pm.near_hat;
    if (std::isfinite(phi[j]) && std::isfinite(phi[j + 1])) {
      sum += pm.near_hat * psi_hi * phi[j + 1] + far_w * psi_lo * phi[j];
    } else {
      if (!panel_mean) throw NumericalError("power_conv: non-finite integrand without a panel mean");
      sum += (pm.near_hat * psi_hi + far_w * psi_lo) * panel_mean(j);
    }
    psi_lo = psi_hi;
  }
  return sum;
}

std::vector<double> rhs_K_conv(const KernelPair& pair, const std::function<double(double)>& phi, double c,
                               const Mesh& mesh, const std::function<double(double, double)>& panel_integral) {
  const int n = mesh.steps();
  const auto pts = mesh.points();
  std::vector<double> ph(pts.size());
  for (std::size_t j = 0; j < pts.size(); ++j) ph[j] = safe_eval(phi, pts[j]);
  std::vector<double> means(pts.size(), kNaN);
  auto mean = [&](std::size_t j) {
    if (std::isnan(means[j])) {
      const double a = pts[j], b = pts[j + 1];
      double integral;
      if (panel_integral) {
        integral = panel_integral(a, b);
      } else {
        const auto end = std::isfinite(ph[j]) ? quad::SingularEnd::Right : quad::SingularEnd::Left;
        integral = quad::graded_panel_quad(phi, a, b, end, 30, 8);
      }
      means[j] = integral / (b - a);
    }
    return means[j];
  };
  const double inv_div = 1.0 / pair.K_divisor();
  const double beta = 1.0 - pair.alpha0();
  std::vector<double> r(pts.size());
  r[0] = c == 0.0 ? 0.0 : std::copysign(kInf, c);
  for (int i = 1; i <= n; ++i) {
    const auto x = pts.first(static_cast<std::size_t>(i) + 1);
    double v = power_conv(beta, x, [&](std::size_t) { return inv_div; }, std::span(ph).first(x.size()), mean);
    if (c != 0.0) v += c * kernels::eval_K(pair, mesh[i]);
    r[static_cast<std::size_t>(i)] = v;
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

void require_wsc1(const SonineData& data) {
  if (!data.wsc1_valid()) throw ValidationError("WSC1 validation failed: " + data.wsc1_failure());
}

// int_0^t K(t-s) phi(s) ds with s = t z: t^{a0} / K_div * int_0^1 (1-z)^{a0-1} z^{-a0} z^{a0} phi(t z) dz.
// The Jacobi weight absorbs an s^{-a0} singularity of phi at the origin.
double k_conv_jacobi(const KernelPair& pair, const std::function<double(double)>& phi, double t) {
  if (t == 0.0) return 0.0;
  const double a0 = pair.alpha0();
  const quad::JacobiRule& rule = sonine_rule(a0, kDefaultJacobiNodes);
  double sum = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    const double z = rule.nodes[j];
    sum += rule.weights[j] * std::pow(z, a0) * phi(t * z);
  }
  return sum * std::pow(t, a0) / pair.K_divisor();
}

bool memory_vanishes(const SonineData& data) {
  return data.pair().constant_exponent() && data.weight().t_independent();
}

// int_0^t w(0, t-s) k(t-s) phi(s) ds at every mesh node
std::vector<double> k_weighted_conv(const SonineData& data, std::span<const double> ph, const Mesh& mesh,
                                    const std::function<double(std::size_t)>& mean) {
  const KernelPair& pair = data.pair();
  const Weight& w = data.weight();
  const auto pts = mesh.points();
  std::vector<double> r(pts.size(), 0.0);
  for (int i = 1; i <= mesh.steps(); ++i) {
    const double ti = mesh[i];
    const auto x = pts.first(static_cast<std::size_t>(i) + 1);
    auto psi = [&](std::size_t j) {
      const double d = ti - x[j];
      return pair.k_scale() * kernels::smooth_factor(pair, d) * w(0.0, d);
    };
    r[static_cast<std::size_t>(i)] = power_conv(pair.alpha0(), x, psi, ph.first(x.size()), mean);
  }
  return r;
}

}  // namespace

SecondKindProblem transform_first_kind_weighted(const FirstKindProblem& problem, const SonineData& data,
                                                const Mesh& mesh) {
  require_wsc1(data);
  if (problem.variant != Variant::Weighted) throw ValidationError("transform: expected the weighted variant");
  const Forcing f = problem.f;
  SecondKindProblem p;
  p.diagonal = [&data](double t) { return eval_g(data, t, 0.0); };
  if (!memory_vanishes(data)) p.memory = [&data](double y, double t) { return eval_g2(data, y, t - y); };
  // K(t) f(0) + int_0^t K(t-s) f'(s) ds; the limit at t = 0 is left unresolved
  // when f' is singular there.
  const double f0 = f.value(0.0);
  p.rhs = sample(mesh, [&](double t) {
    if (t == 0.0) return f0 != 0.0 || !std::isfinite(safe_eval(f.derivative, 0.0)) ? kNaN : 0.0;
    return (f0 != 0.0 ? f0 * kernels::eval_K(data.pair(), t) : 0.0) + k_conv_jacobi(data.pair(), f.derivative, t);
  });
  return p;
}

SecondKindProblem transform_first_kind_K(const FirstKindProblem& problem, const SonineData& data,
                                         const Mesh& mesh) {
  require_wsc1(data);
  if (problem.variant != Variant::KKernel) throw ValidationError("transform: expected the K-kernel variant");
  const Forcing& f = problem.f;
  const KernelPair& pair = data.pair();
  SecondKindProblem p;
  const double g00 = data.g00();
  p.diagonal = [g00](double) { return g00; };
  if (!memory_vanishes(data)) p.memory = [&data](double y, double t) { return eval_g2(data, 0.0, t - y); };

  // int_0^t w(0,t-s) k(t-s) f'(s) ds with s = t z; the rule weight z^{a0-1}
  // matches f' when f behaves like t^{a0}
  const double a0 = pair.alpha0();
  const quad::JacobiRule& rule = sonine_rule(1.0 - a0, kDefaultJacobiNodes);
  const Weight& w = data.weight();
  const double f0 = f.value(0.0);
  const bool fp0_finite = std::isfinite(safe_eval(f.derivative, 0.0));
  p.rhs = sample(mesh, [&](double t) {
    if (t == 0.0) {
      if (f0 != 0.0) return std::copysign(kInf, f0 * g00);
      return fp0_finite ? 0.0 : kNaN;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double z = rule.nodes[j];
      const double d = t * (1.0 - z);
      sum += rule.weights[j] * std::pow(z, 1.0 - a0) * kernels::smooth_factor(pair, d) * w(0.0, d) *
             f.derivative(t * z);
    }
    double r = sum * pair.k_scale() * std::pow(t, 1.0 - a0);
    if (f0 != 0.0) r += f0 * w(0.0, t) * kernels::eval_k(pair, t);
    return r;
  });
  return p;
}

namespace {

// Midpoint product rule for int_0^t kernel(s, t) u(s) ds = R(t) with
// u piecewise constant; kernel(t, t) must not vanish.
SolveReport midpoint_first_kind(const Mesh& mesh, const std::function<double(double, double)>& kernel,
                                std::span<const double> R, bool singular) {
  const int n = mesh.steps();
  std::vector<double> mid(static_cast<std::size_t>(n));
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) mid[static_cast<std::size_t>(j)] = 0.5 * (mesh[j] + mesh[j + 1]);
  for (int i = 1; i <= n; ++i) {
    const double ti = mesh[i];
    double known = 0.0;
    for (int j = 0; j + 1 < i; ++j) {
      const auto k = static_cast<std::size_t>(j);
      known += mesh.step(j + 1) * kernel(mid[k], ti) * v[k];
    }
    const auto k = static_cast<std::size_t>(i) - 1;
    const double d = mesh.step(i) * kernel(mid[k], ti);
    if (!(std::abs(d) > 0.0)) throw NumericalError("first-kind diagonal vanishes at t = " + fmt_t(ti));
    v[k] = (R[static_cast<std::size_t>(i)] - known) / d;
    if (!std::isfinite(v[k])) throw NumericalError("non-finite solution value at t = " + fmt_t(ti));
  }
  SolveReport rep;
  rep.mesh = mesh;
  rep.strategy = "first-kind-g";
  rep.singular_origin = singular;
  rep.u.assign(static_cast<std::size_t>(n) + 1, kNaN);
  auto lin = [&](std::size_t a, double t) {
    if (n == 1) return v[0];
    const std::size_t b = a + 1;
    return v[a] + (t - mid[a]) * (v[b] - v[a]) / (mid[b] - mid[a]);
  };
  for (int i = 0; i <= n; ++i) {
    const std::size_t a = static_cast<std::size_t>(std::clamp(i - 1, 0, std::max(n - 2, 0)));
    rep.u[static_cast<std::size_t>(i)] = lin(a, mesh[i]);
  }
  if (singular) rep.u[0] = kNaN;
  return rep;
}

}  // namespace

SolveReport solve_first_kind(const FirstKindProblem& problem, const SonineData& data, const Mesh& mesh,
                             Strategy strategy) {
  if (strategy == Strategy::SecondKind) {
    const SecondKindProblem p = problem.variant == Variant::Weighted
                                    ? transform_first_kind_weighted(problem, data, mesh)
                                    : transform_first_kind_K(problem, data, mesh);
    return solve_second_kind(p, mesh);
  }
  require_wsc1(data);
  const Forcing& f = problem.f;
  const bool singular = f.value(0.0) != 0.0 || !std::isfinite(safe_eval(f.derivative, 0.0));
  if (problem.variant == Variant::Weighted) {
    const auto R = sample(mesh, [&](double t) { return k_conv_jacobi(data.pair(), f.value, t); });
    return midpoint_first_kind(mesh, [&](double s, double t) { return eval_g(data, s, t - s); }, R, singular);
  }
  const auto pts = mesh.points();
  std::vector<double> fv(pts.size());
  for (std::size_t j = 0; j < pts.size(); ++j) fv[j] = safe_eval(f.value, pts[j]);
  auto mean = [&](std::size_t j) {
    const double a = pts[j], b = pts[j + 1];
    const auto end = std::isfinite(fv[j]) ? quad::SingularEnd::Right : quad::SingularEnd::Left;
    return quad::graded_panel_quad(f.value, a, b, end, 30, 8) / (b - a);
  };
  const auto R = k_weighted_conv(data, fv, mesh, mean);
  return midpoint_first_kind(mesh, [&](double s, double t) { return eval_g(data, 0.0, t - s); }, R, singular);
}

SolveReport solve_nonlocal_ode(const NonlocalOdeProblem& problem, const SonineData& data, const Mesh& mesh) {
  require_wsc1(data);
  if (problem.c != 0.0 && mesh.is_uniform())
    throw ValidationError("nonlocal ODE with c != 0: the solution is singular at t = 0, use a graded mesh");
  SecondKindProblem p;
  p.diagonal = [&data](double t) { return eval_g(data, t, 0.0); };
  if (!memory_vanishes(data)) p.memory = [&data](double y, double t) { return eval_g2(data, y, t - y); };
  p.rhs = rhs_K_conv(data.pair(), problem.f.value, problem.c, mesh);
  SolveReport rep = solve_second_kind(p, mesh);
  rep.strategy = "ode";
  return rep;
}

// ---------------------------------------------------------------------------

double interpolate(const SolveReport& report, double t) {
  const Mesh& mesh = report.mesh;
  const auto pts = mesh.points();
  if (t <= pts.front()) return report.singular_origin ? report.u[1] : report.u[0];
  if (t >= pts.back()) return report.u.back();
  const auto it = std::upper_bound(pts.begin(), pts.end(), t);
  const auto hi = static_cast<std::size_t>(it - pts.begin());
  const std::size_t lo = hi - 1;
  if (lo == 0 && report.singular_origin) return report.u[1];
  const double w = (t - pts[lo]) / (pts[hi] - pts[lo]);
  return (1.0 - w) * report.u[lo] + w * report.u[hi];
}

namespace {

std::vector<double> interpolated_nodes(const SolveReport& report, std::span<const double> x) {
  std::vector<double> v(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) v[j] = interpolate(report, x[j]);
  return v;
}

// int_0^T w(s,T) k(T-s) u(s) ds
double weighted_k_integral(const SonineData& data, const SolveReport& report, double T) {
  if (T <= 0.0) return 0.0;
  const KernelPair& pair = data.pair();
  const Weight& w = data.weight();
  const auto x = nodes_upto(report.mesh, T);
  const auto uh = interpolated_nodes(report, x);
  auto psi = [&](std::size_t j) { return pair.k_scale() * kernels::smooth_factor(pair, T - x[j]) * w(x[j], T); };
  return power_conv(pair.alpha0(), x, psi, uh);
}

}  // namespace

std::vector<double> residual_first_kind(const FirstKindProblem& problem, const SonineData& data,
                                        const SolveReport& report, std::span<const double> checkpoints) {
  std::vector<double> out;
  const KernelPair& pair = data.pair();
  for (double T : checkpoints) {
    double lhs;
    if (problem.variant == Variant::Weighted) {
      lhs = weighted_k_integral(data, report, T);
    } else if (T <= 0.0) {
      lhs = 0.0;
    } else {
      const auto x = nodes_upto(report.mesh, T);
      const auto uh = interpolated_nodes(report, x);
      const double inv = 1.0 / pair.K_divisor();
      lhs = power_conv(1.0 - pair.alpha0(), x, [&](std::size_t) { return inv; }, uh);
    }
    out.push_back(lhs - problem.f.value(T));
  }
  return out;
}

std::vector<double> residual_nonlocal_ode(const NonlocalOdeProblem& problem, const SonineData& data,
                                          const SolveReport& report, std::span<const double> checkpoints) {
  std::vector<double> out;
  for (double T : checkpoints) {
    const double F =
        problem.c + (T > 0.0 ? quad::graded_panel_quad(problem.f.value, 0.0, T, quad::SingularEnd::Left, 20, 8) : 0.0);
    out.push_back(weighted_k_integral(data, report, T) - F);
  }
  return out;
}

AssociateReport construct_csc_associate(const SonineData& data, const Mesh& mesh,
                                        std::span<const double> checkpoints) {
  const FirstKindProblem problem{Variant::KKernel, Forcing::constant(1.0)};
  const SolveReport rep = solve_first_kind(problem, data, mesh, Strategy::SecondKind);
  AssociateReport out{mesh, rep.u, {checkpoints.begin(), checkpoints.end()}, {}, 0.0};
  for (double r : residual_first_kind(problem, data, rep, checkpoints)) {
    out.residuals.push_back(std::abs(r));
    out.max_residual = std::max(out.max_residual, std::abs(r));
  }
  return out;
}

ErrorMetrics compare(const SolveReport& report, const std::function<double(double)>& exact) {
  ErrorMetrics m;
  double norm = 0.0;
  for (int i = 1; i <= report.mesh.steps(); ++i) {
    const double ex = exact(report.mesh[i]);
    const double e = std::abs(report.u[static_cast<std::size_t>(i)] - ex);
    const double h = report.mesh.step(i);
    m.max_error = std::max(m.max_error, e);
    m.l1_error += h * e;
    norm += h * std::abs(ex);
  }
  m.l1_relative = norm > 0.0 ? m.l1_error / norm : m.l1_error;
  return m;
}

}  // namespace sonine::vie
