#include "sonine/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "sonine/error.hpp"

namespace sonine::quad {

namespace {

// Gauss rule on [0,1] for the weight (1-z)^a z^b from the monic Jacobi
// recurrence on [-1,1] (weight (1-x)^a (1+x)^b).
GaussRule gauss_jacobi_unit(double a, double b, int n) {
  if (n < 1) throw ValidationError("Gauss rule: need at least one node");
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(std::max(n - 1, 1));
  const double ab = a + b;
  diag(0) = (b - a) / (ab + 2.0);
  for (int k = 1; k < n; ++k) {
    const double s = 2.0 * k + ab;
    diag(k) = (b * b - a * a) / (s * (s + 2.0));
  }
  for (int k = 1; k < n; ++k) {
    double beta;
    if (k == 1) {
      beta = 4.0 * (a + 1.0) * (b + 1.0) / ((ab + 2.0) * (ab + 2.0) * (ab + 3.0));
    } else {
      const double s = 2.0 * k + ab;
      beta = 4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0));
    }
    sub(k - 1) = std::sqrt(beta);
  }
  GaussRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  // mass of (1-z)^a z^b on [0,1]
  const double mass = std::exp(std::lgamma(a + 1.0) + std::lgamma(b + 1.0) - std::lgamma(ab + 2.0));
  if (n == 1) {
    rule.nodes[0] = 0.5 * (diag(0) + 1.0);
    rule.weights[0] = mass;
    return rule;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericalError("Gauss rule: tridiagonal eigensolver did not converge");
  const Eigen::VectorXd& x = solver.eigenvalues();
  const Eigen::MatrixXd& v = solver.eigenvectors();
  for (int i = 0; i < n; ++i) {
    rule.nodes[static_cast<std::size_t>(i)] = 0.5 * (x(i) + 1.0);
    rule.weights[static_cast<std::size_t>(i)] = mass * v(0, i) * v(0, i);
  }
  return rule;
}

void check_alpha0(double alpha0) {
  if (!(alpha0 > 0.0 && alpha0 < 1.0)) throw ValidationError("Jacobi rule: alpha0 must lie in (0,1)");
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<GaussRule>(gauss_jacobi_unit(0.0, 0.0, n));
  return *slot;
}

double JacobiRule::apply(const std::function<double(double)>& phi) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) sum += weights[j] * phi(nodes[j]);
  return sum;
}

JacobiRule jacobi_rule(double alpha0, int n) {
  check_alpha0(alpha0);
  GaussRule g = gauss_jacobi_unit(alpha0 - 1.0, -alpha0, n);
  return {alpha0, n, std::move(g.nodes), std::move(g.weights)};
}

JacobiRule jacobi_rule_sqrt(double alpha0, int n) {
  check_alpha0(alpha0);
  // z = y^2: (1-z)^{a0-1} z^{-a0} dz = (1-y)^{a0-1} y^{1-2a0} * 2 (1+y)^{a0-1} dy
  GaussRule g = gauss_jacobi_unit(alpha0 - 1.0, 1.0 - 2.0 * alpha0, n);
  JacobiRule rule{alpha0, n, {}, {}};
  rule.nodes.resize(g.nodes.size());
  rule.weights.resize(g.nodes.size());
  for (std::size_t j = 0; j < g.nodes.size(); ++j) {
    const double y = g.nodes[j];
    rule.nodes[j] = y * y;
    rule.weights[j] = g.weights[j] * 2.0 * std::pow(1.0 + y, alpha0 - 1.0);
  }
  return rule;
}

// ---------------------------------------------------------------------------

Mesh Mesh::graded(double horizon, int steps, double grading) {
  if (!(horizon > 0.0)) throw ValidationError("mesh: horizon must be positive");
  if (steps < 1) throw ValidationError("mesh: need at least one step");
  if (!(grading >= 1.0)) throw ValidationError("mesh: grading exponent must be >= 1");
  Mesh m;
  m.horizon_ = horizon;
  m.steps_ = steps;
  m.grading_ = grading;
  m.points_.resize(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double r = static_cast<double>(i) / steps;
    m.points_[static_cast<std::size_t>(i)] = grading == 1.0 ? horizon * r : horizon * std::pow(r, grading);
  }
  m.points_.back() = horizon;
  return m;
}

double default_grading(double alpha0) { return std::max(1.0, 2.0 / alpha0); }

PanelMoments panel_moments(double beta, double near, double far) {
  const double h = far - near;
  const double eps = h / far;
  if (eps >= 0.5) {
    const double p1 = 1.0 - beta;
    const double p2 = 2.0 - beta;
    const double total = (std::pow(far, p1) - (near > 0.0 ? std::pow(near, p1) : 0.0)) / p1;
    const double second = (std::pow(far, p2) - (near > 0.0 ? std::pow(near, p2) : 0.0)) / p2;
    return {total, (far * total - second) / h};
  }
  // (far - v)^{-beta} = far^{-beta} sum_m (beta)_m/m! (v/far)^m, v in [0, h]
  double c = 1.0;
  double pw = 1.0;
  double s1 = 0.0, s2 = 0.0;
  for (int m = 0; m < 200; ++m) {
    const double term = c * pw;
    s1 += term / (m + 1);
    s2 += term / (m + 2);
    if (term < 1e-18 * s1) break;
    c *= (beta + m) / (m + 1);
    pw *= eps;
  }
  const double scale = std::pow(far, -beta) * h;
  return {scale * s1, scale * s2};
}

std::vector<double> product_weights(double beta, std::span<const double> nodes, SingularEnd end) {
  const std::size_t m = nodes.size();
  std::vector<double> w(m, 0.0);
  if (m < 2) return w;
  const double x0 = nodes.front();
  const double xm = nodes.back();
  for (std::size_t j = 0; j + 1 < m; ++j) {
    if (end == SingularEnd::Right) {
      const PanelMoments pm = panel_moments(beta, xm - nodes[j + 1], xm - nodes[j]);
      w[j + 1] += pm.near_hat;
      w[j] += pm.total - pm.near_hat;
    } else {
      const PanelMoments pm = panel_moments(beta, nodes[j] - x0, nodes[j + 1] - x0);
      w[j] += pm.near_hat;
      w[j + 1] += pm.total - pm.near_hat;
    }
  }
  return w;
}

std::vector<double> power_conv_weights(double beta, const Mesh& mesh, int i) {
  if (i < 1 || i > mesh.steps()) throw ValidationError("power_conv_weights: step index out of range");
  return product_weights(beta, mesh.points().first(static_cast<std::size_t>(i) + 1), SingularEnd::Right);
}

// ---------------------------------------------------------------------------

void graded_panel_nodes(double a, double b, SingularEnd end, int levels, int nodes_per_panel,
                        const std::function<void(double, double)>& visit) {
  if (!(a < b)) throw ValidationError("graded_panel_quad: need a < b");
  const GaussRule& g = gauss_legendre(nodes_per_panel);
  const double len = b - a;
  // distance d from the singular end maps to x
  auto place = [&](double d) { return end == SingularEnd::Left ? a + d : b - d; };
  // a singular end away from 0 cannot be approached closer than a few ulps
  const double anchor = std::abs(end == SingularEnd::Left ? a : b);
  const double floor_d = 1e-10 * anchor;
  double outer = len;
  for (int k = 0; k < levels && 0.5 * outer >= floor_d; ++k) {
    const double inner = 0.5 * outer;
    const double h = outer - inner;
    for (std::size_t q = 0; q < g.nodes.size(); ++q) visit(place(inner + h * g.nodes[q]), h * g.weights[q]);
    outer = inner;
  }
  // innermost panel [0, outer] in distance: d = outer * y^p
  const int p = anchor == 0.0 ? 10 : 2;
  for (std::size_t q = 0; q < g.nodes.size(); ++q) {
    const double y = g.nodes[q];
    const double yp = std::pow(y, p - 1);
    visit(place(outer * yp * y), p * outer * yp * g.weights[q]);
  }
}

double graded_panel_quad(const std::function<double(double)>& fn, double a, double b, SingularEnd end, int levels,
                         int nodes_per_panel) {
  double sum = 0.0;
  graded_panel_nodes(a, b, end, levels, nodes_per_panel, [&](double x, double w) {
    const double v = fn(x);
    if (!std::isfinite(v))
      throw NumericalError("graded_panel_quad: integrand is not finite at x = " + std::to_string(x));
    sum += w * v;
  });
  return sum;
}

}  // namespace sonine::quad
