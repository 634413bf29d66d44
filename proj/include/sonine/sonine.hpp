#pragma once

// Weighted Sonine functions for the Abel pair:
//   g(s,t) = int_0^t w(s, z+s) K(t-z) k(z) dz          (first weighted condition)
//   G(s,t) = int_0^t w(s, z+s) k(t-z) K(z) dz          (second weighted condition)
// evaluated after the substitution z = t*zhat, which leaves the weight
// (1-zhat)^{a0-1} zhat^{-a0} for a Gauss-Jacobi rule.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sonine/kernels.hpp"
#include "sonine/quadrature.hpp"

namespace sonine {

inline constexpr int kDefaultJacobiNodes = 32;
inline constexpr double kSolverTolerance = 1e-2;
inline constexpr double kContinuityTolerance = 1e-4;
inline constexpr double kCscTolerance = 1e-12;

// Cached per (alpha0, n); the sqrt-mapped variant of the Jacobi rule.
const quad::JacobiRule& sonine_rule(double alpha0, int n);

class SonineData {
 public:
  // Samples g(s,0) = w(s,s) on the kernel validation grid and |g_2| on a
  // coarse triangle. Never throws on a failed condition; see wsc1_valid().
  SonineData(kernels::KernelPair pair, kernels::Weight weight, int jacobi_n = kDefaultJacobiNodes);

  const kernels::KernelPair& pair() const { return pair_; }
  const kernels::Weight& weight() const { return weight_; }
  const quad::JacobiRule& rule() const { return *rule_; }
  double horizon() const { return pair_.horizon(); }

  double g00() const { return g00_; }
  double nu_lower() const { return nu_lower_; }
  double nu_upper() const { return nu_upper_; }
  double g2_bound_sample() const { return g2_bound_; }

  bool wsc1_valid() const { return failure_.empty(); }
  // "(i)/(a)" or "(b)" plus a short reason; empty when valid.
  const std::string& wsc1_failure() const { return failure_; }

 private:
  kernels::KernelPair pair_;
  kernels::Weight weight_;
  const quad::JacobiRule* rule_;
  double g00_ = 0.0;
  double nu_lower_ = 0.0;
  double nu_upper_ = 0.0;
  double g2_bound_ = 0.0;
  std::string failure_;
};

// 0 <= s, 0 <= t, s + t <= b. Exactly w(s,s) at t = 0.
double eval_g(const SonineData& data, double s, double t);
// t > 0.
double eval_g2(const SonineData& data, double s, double t);

// |int_0^t K(t-s) k(s) ds - 1|
double csc_residual(const kernels::KernelPair& pair, double t, int rule_n = kDefaultJacobiNodes);

// Constant exponent only (UnsupportedError otherwise). Exactly w(s,s) at t = 0.
double eval_G(const kernels::KernelPair& pair, const kernels::Weight& weight, double s, double t,
              int rule_n = kDefaultJacobiNodes);
// dG/dt by central differences with step 1e-5 * max(t, 0.01); forward
// differences when t is smaller than the step.
double eval_G2(const kernels::KernelPair& pair, const kernels::Weight& weight, double s, double t,
               int rule_n = kDefaultJacobiNodes);

struct VerificationReport {
  std::string condition;  // CSC | WSC1 | WSC2
  std::vector<double> grid;
  std::vector<double> residuals;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  std::string failed;  // named condition when !pass
  std::string detail;
  // sampled stand-ins for the analytic bounds
  double nu_lower = 0.0;
  double nu_upper = 0.0;
  double g2_l1_max = 0.0;

  void write_csv(std::ostream& os) const;  // columns: point,residual
  std::string summary() const;
};

std::vector<double> uniform_grid(double lo, double hi, int n);

VerificationReport csc_report(const kernels::KernelPair& pair, std::span<const double> times,
                              int rule_n = kDefaultJacobiNodes, double tolerance = kCscTolerance);

// Per s: residual |g(s,tau) - w(s,s)| at tau = 1e-6, condition (a) from
// |g(s,0)|, condition (b) from int_0^{b-s} |g_2(s,.)| on graded panels.
VerificationReport wsc1_report(const SonineData& data, std::span<const double> s_grid,
                               double tolerance = kContinuityTolerance, int panel_levels = 40, int panel_nodes = 16);
VerificationReport wsc2_report(const kernels::KernelPair& pair, const kernels::Weight& weight,
                               std::span<const double> s_grid, double tolerance = kContinuityTolerance,
                               int rule_n = kDefaultJacobiNodes);

struct AssociateReport {
  quad::Mesh mesh;
  std::vector<double> u;  // u[0] is NaN when the associate is singular at 0
  std::vector<double> checkpoints;
  std::vector<double> residuals;
  double max_residual = 0.0;
};

// Solves u(t) G(0,0) + int_0^t u(y) G_2(0,t-y) dy = w(0,t) K(t) and reports
// |int_0^t k(t-s) u(s) ds - 1| at the checkpoints.
AssociateReport associate_from_wsc2(const kernels::KernelPair& pair, const kernels::Weight& weight,
                                    const quad::Mesh& mesh, std::span<const double> checkpoints,
                                    int rule_n = kDefaultJacobiNodes);

}  // namespace sonine
