#include <cmath>
#include <limits>

#include "sonine/error.hpp"
#include "sonine/sonine.hpp"
#include "sonine/vie.hpp"

namespace sonine {

AssociateReport associate_from_wsc2(const kernels::KernelPair& pair, const kernels::Weight& weight,
                                    const quad::Mesh& mesh, std::span<const double> checkpoints, int rule_n) {
  if (!pair.constant_exponent()) throw UnsupportedError("associate_from_wsc2: only constant exponents are supported");
  if (!weight.satisfies_condition_i()) throw ValidationError("associate_from_wsc2: w(t,t) vanishes (condition (i))");

  vie::SecondKindProblem p;
  const double G00 = eval_G(pair, weight, 0.0, 0.0, rule_n);
  p.diagonal = [G00](double) { return G00; };
  if (!weight.t_independent())
    p.memory = [&](double y, double t) { return eval_G2(pair, weight, 0.0, t - y, rule_n); };
  // d/dt int_0^t w(0,t-s) K(t-s) ds = w(0,t) K(t)
  p.rhs = vie::sample(mesh, [&](double t) {
    if (t == 0.0) return std::numeric_limits<double>::infinity();
    return weight(0.0, t) * kernels::eval_K(pair, t);
  });
  const vie::SolveReport rep = vie::solve_second_kind(p, mesh);

  AssociateReport out{mesh, rep.u, {checkpoints.begin(), checkpoints.end()}, {}, 0.0};
  for (double T : checkpoints) {
    std::vector<double> x;
    for (double t : mesh.points())
      if (t < T * (1.0 - 1e-14)) x.push_back(t);
    x.push_back(T);
    std::vector<double> uh(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) uh[j] = vie::interpolate(rep, x[j]);
    const double ks = pair.k_scale();
    const double conv = vie::power_conv(pair.alpha0(), x, [ks](std::size_t) { return ks; }, uh);
    const double r = std::abs(conv - 1.0);
    out.residuals.push_back(r);
    out.max_residual = std::max(out.max_residual, r);
  }
  return out;
}

}  // namespace sonine
