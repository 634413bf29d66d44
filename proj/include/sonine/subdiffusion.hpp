#pragma once

// 1D weighted variable-exponent subdiffusion on [0,1], homogeneous Dirichlet
// data, in the transformed form
//   g(t,0) u_t + int_0^t g_2(s,t-s) u_s ds - d/dt int_0^t K(t-s) u_xx ds
//     = d/dt int_0^t K(t-s) f(x,s) ds,
// i.e. the model equation multiplied through by g(t,0).

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sonine/quadrature.hpp"
#include "sonine/sonine.hpp"

namespace sonine::pde {

// c[i][j], j = 0..i: sum_j c[i][j] phi(t_j) = d/dt int_0^t K(t-s) phi_hat(s) ds at t_i,
// exact for piecewise-linear phi_hat. Row 0 is empty. K(t) = t^{alpha0-1}/K_divisor.
std::vector<std::vector<double>> l1_weights(double alpha0, const quad::Mesh& mesh, double K_divisor);
std::vector<std::vector<double>> l1_weights(double alpha0, const quad::Mesh& mesh);  // K_divisor = Gamma(alpha0)

struct PdeConfig {
  int M = 32;  // interior nodes, h = 1/(M+1)
  quad::Mesh mesh = quad::Mesh::uniform(1.0, 64);
  std::function<double(double, double)> forcing;  // f(x, t)
  std::function<double(double)> u0;
  std::function<double(double, double)> exact;  // optional, for the final-time error
};

struct StepDiagnostics {
  double solve_residual = 0.0;  // max |A u - rhs| of the tridiagonal solve
  std::size_t memory_terms = 0;
};

struct PdeSolution {
  std::vector<double> x;  // interior nodes
  quad::Mesh mesh;
  std::vector<std::vector<double>> u;  // u[i][j] at (x_j, t_i)
  std::vector<StepDiagnostics> steps;
  std::optional<double> final_error;  // relative discrete L2 at t_N

  void write_csv(std::ostream& os) const;  // x,t,u including the boundary zeros
};

// Requires the Gamma normalization and a WSC1-valid pair/weight.
PdeSolution solve_subdiffusion(const SonineData& data, const PdeConfig& config);

double relative_l2_error(std::span<const double> x, std::span<const double> u,
                         const std::function<double(double)>& exact);

}  // namespace sonine::pde
