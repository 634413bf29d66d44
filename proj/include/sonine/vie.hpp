#pragma once

// Second-kind Volterra engine and the transformations that feed it:
//   weighted first kind   int_0^t w(s,t) k(t-s) u(s) ds = f(t)
//   first kind in K       int_0^t K(t-s) u(s) ds = f(t)
//   nonlocal ODE          d/dt int_0^t w(s,t) k(t-s) u(s) ds = f(t), initial value c
// each rewritten as d(t) u(t) + int_0^t m(y,t) u(y) dy = r(t).

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sonine/expr.hpp"
#include "sonine/kernels.hpp"
#include "sonine/quadrature.hpp"
#include "sonine/sonine.hpp"

namespace sonine::vie {

struct Forcing {
  std::function<double(double)> value;
  std::function<double(double)> derivative;  // may return +-inf at t = 0

  // f(t) from an expression in t; f' by symbolic differentiation.
  static Forcing from_expr(const expr::Expr& f);
  static Forcing constant(double c);
};

// f(t) = int_0^t w(s,t) k(t-s) u(s) ds and its derivative, by graded-panel
// quadrature, for a prescribed u.
Forcing manufactured_forcing(const kernels::KernelPair& pair, const kernels::Weight& weight, const expr::Expr& u);

struct SecondKindProblem {
  std::function<double(double)> diagonal;
  std::function<double(double, double)> memory;  // m(y, t); empty when m == 0
  std::vector<double> rhs;                       // r(t_i); a non-finite r(0) marks a solution singular at 0
  double d_min = 1e-12;
  int adjacent_levels = 12;
  int adjacent_nodes = 8;
};

struct SolveReport {
  quad::Mesh mesh;
  std::vector<double> u;         // u[0] is NaN when singular_origin
  // u(0) not resolved (singular solution, or r(0) only exists as a limit);
  // u is taken constant (= u[1]) on the first panel
  bool singular_origin = false;
  std::string strategy;

  void write_csv(std::ostream& os, std::span<const double> residual = {}) const;  // t,u,residual
};

std::vector<double> sample(const quad::Mesh& mesh, const std::function<double(double)>& fn);

SolveReport solve_second_kind(const SecondKindProblem& problem, const quad::Mesh& mesh);

// c K(t_i) + int_0^{t_i} K(t_i - s) phi(s) ds, phi piecewise linear on the mesh.
// A panel with a non-finite phi endpoint uses panel_integral(a, b) / (b - a)
// as a constant (graded-panel quadrature of phi when panel_integral is empty).
std::vector<double> rhs_K_conv(const kernels::KernelPair& pair, const std::function<double(double)>& phi, double c,
                               const quad::Mesh& mesh,
                               const std::function<double(double, double)>& panel_integral = {});

enum class Variant { Weighted, KKernel };
enum class Strategy { SecondKind, FirstKindG };

struct FirstKindProblem {
  Variant variant = Variant::Weighted;
  Forcing f;
};

// d(t) = g(t,0), m(y,t) = g_2(y,t-y), r = K(t) f(0) + int K(t-s) f'(s) ds,
// the convolution by the Jacobi rule after s = t z (f' may blow up like s^{-a0}).
SecondKindProblem transform_first_kind_weighted(const FirstKindProblem& problem, const SonineData& data,
                                                const quad::Mesh& mesh);
// d = g(0,0), m(y,t) = g_2(0,t-y), r = f(0) w(0,t) k(t) + int w(0,s) k(s) f'(t-s) ds.
SecondKindProblem transform_first_kind_K(const FirstKindProblem& problem, const SonineData& data,
                                         const quad::Mesh& mesh);

SolveReport solve_first_kind(const FirstKindProblem& problem, const SonineData& data, const quad::Mesh& mesh,
                             Strategy strategy = Strategy::SecondKind);

struct NonlocalOdeProblem {
  Forcing f;
  double c = 0.0;
};

// Refuses a uniform mesh when c != 0.
SolveReport solve_nonlocal_ode(const NonlocalOdeProblem& problem, const SonineData& data, const quad::Mesh& mesh);

// Piecewise-linear interpolant of the solution (constant on the first panel
// when the solution is singular at 0).
double interpolate(const SolveReport& report, double t);

// int_0^t w(s,t) k(t-s) u(s) ds - f(t)   (Weighted)
// int_0^t K(t-s) u(s) ds - f(t)          (KKernel)
std::vector<double> residual_first_kind(const FirstKindProblem& problem, const SonineData& data,
                                        const SolveReport& report, std::span<const double> checkpoints);

// int_0^t w(s,t) k(t-s) u(s) ds - c - int_0^t f
std::vector<double> residual_nonlocal_ode(const NonlocalOdeProblem& problem, const SonineData& data,
                                          const SolveReport& report, std::span<const double> checkpoints);

// Solves the K-kernel equation with f = 1 and reports int_0^t K(t-s) u(s) ds - 1.
AssociateReport construct_csc_associate(const SonineData& data, const quad::Mesh& mesh,
                                        std::span<const double> checkpoints);

struct ErrorMetrics {
  double max_error = 0.0;    // over nodes i >= 1
  double l1_error = 0.0;     // sum_i (t_i - t_{i-1}) |u_i - u(t_i)|
  double l1_relative = 0.0;  // l1_error / sum_i (t_i - t_{i-1}) |u(t_i)|
};
ErrorMetrics compare(const SolveReport& report, const std::function<double(double)>& exact);

// int_0^T (T-s)^{-beta} psi(s) phi(s) ds over the nodes x (x.back() = T) with
// psi, phi piecewise linear. A panel whose phi endpoint is non-finite uses the
// constant panel_mean(j) for phi.
double power_conv(double beta, std::span<const double> x, const std::function<double(std::size_t)>& psi,
                  std::span<const double> phi, const std::function<double(std::size_t)>& panel_mean = {});

}  // namespace sonine::vie
