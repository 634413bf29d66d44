#pragma once

// Quadrature for weakly singular integrands:
//  * Gauss-Jacobi rules for int_0^1 (1-z)^{a0-1} z^{-a0} phi(z) dz,
//  * product-integration weights for int (t_i - s)^{-beta} phi(s) ds with
//    piecewise-linear phi,
//  * composite Gauss-Legendre on panels graded toward a singular endpoint.

#include <array>
#include <functional>
#include <span>
#include <vector>

namespace sonine::quad {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss-Legendre on [0, 1]. Cached; safe to call concurrently.
const GaussRule& gauss_legendre(int n);

// Rule for int_0^1 (1-z)^{alpha0-1} z^{-alpha0} phi(z) dz.
struct JacobiRule {
  double alpha0 = 0.5;
  int n = 0;
  std::vector<double> nodes;    // strictly increasing, inside (0, 1)
  std::vector<double> weights;  // positive, sum = kappa(alpha0)

  double apply(const std::function<double(double)>& phi) const;
};

// Golub-Welsch: Gauss-Jacobi with parameters (alpha0-1, -alpha0), exact for
// polynomial phi of degree <= 2n-1.
JacobiRule jacobi_rule(double alpha0, int n);

// Same weight function, built from the n-point Gauss-Jacobi rule in y = sqrt(z)
// (parameters (alpha0-1, 1-2 alpha0)). Nodes cluster quadratically at z = 0,
// so phi with z log z behaviour at the origin converges like n^{-6} instead of
// n^{-3}. Polynomial moments are reproduced to rounding.
JacobiRule jacobi_rule_sqrt(double alpha0, int n);

class Mesh {
 public:
  // t_i = b (i/N)^r
  static Mesh graded(double horizon, int steps, double grading);
  static Mesh uniform(double horizon, int steps) { return graded(horizon, steps, 1.0); }

  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  double grading() const { return grading_; }
  bool is_uniform() const { return grading_ == 1.0; }
  std::span<const double> points() const { return points_; }
  double operator[](int i) const { return points_[static_cast<std::size_t>(i)]; }
  double step(int i) const { return (*this)[i] - (*this)[i - 1]; }

 private:
  double horizon_ = 1.0;
  int steps_ = 0;
  double grading_ = 1.0;
  std::vector<double> points_;
};

// Mesh grading that resolves t^{alpha0-1} behaviour at the origin.
double default_grading(double alpha0);

// For a panel at distance `near` .. `far` = near + h from the singular point:
//   total = int_near^far u^{-beta} du
//   near_hat = int u^{-beta} (far - u)/h du   (hat equal to 1 at the near end)
// far-end hat weight = total - near_hat.
struct PanelMoments {
  double total;
  double near_hat;
};
PanelMoments panel_moments(double beta, double near, double far);

enum class SingularEnd { Left, Right };

// Weights w_j with sum_j w_j phi(x_j) = int_{x_0}^{x_m} |x_sing - s|^{-beta} phi_hat(s) ds,
// phi_hat the piecewise-linear interpolant on the nodes and x_sing = x_0 (Left)
// or x_m (Right).
std::vector<double> product_weights(double beta, std::span<const double> nodes, SingularEnd end);

// Row i of the product-integration matrix for int_0^{t_i} (t_i - s)^{-beta} phi(s) ds.
std::vector<double> power_conv_weights(double beta, const Mesh& mesh, int i);

// Visits (x, weight) for composite Gauss-Legendre on panels [a, b] graded
// geometrically (ratio 1/2) toward `end`; the innermost panel uses a
// quadratic change of variables. No node coincides with an endpoint.
void graded_panel_nodes(double a, double b, SingularEnd end, int levels, int nodes_per_panel,
                        const std::function<void(double, double)>& visit);

// Throws NumericalError if fn returns a non-finite value at a node.
double graded_panel_quad(const std::function<double(double)>& fn, double a, double b, SingularEnd end,
                         int levels = 40, int nodes_per_panel = 16);

}  // namespace sonine::quad
