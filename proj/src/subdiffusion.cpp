#include "sonine/subdiffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "sonine/error.hpp"

namespace sonine::pde {

std::vector<std::vector<double>> l1_weights(double alpha0, const quad::Mesh& mesh, double K_divisor) {
  if (!(alpha0 > 0.0 && alpha0 < 1.0)) throw ValidationError("l1_weights: alpha0 must lie in (0,1)");
  const int n = mesh.steps();
  const double beta = 1.0 - alpha0;
  std::vector<std::vector<double>> c(static_cast<std::size_t>(n) + 1);
  for (int i = 1; i <= n; ++i) {
    const double ti = mesh[i];
    auto& row = c[static_cast<std::size_t>(i)];
    row.assign(static_cast<std::size_t>(i) + 1, 0.0);
    // A_j / tau_j for panel j = [t_{j-1}, t_j]
    auto slope = [&](int j) {
      return quad::panel_moments(beta, ti - mesh[j], ti - mesh[j - 1]).total / K_divisor / mesh.step(j);
    };
    double prev = slope(1);
    row[0] = std::pow(ti, alpha0 - 1.0) / K_divisor - prev;
    for (int j = 1; j < i; ++j) {
      const double next = slope(j + 1);
      row[static_cast<std::size_t>(j)] = prev - next;
      prev = next;
    }
    row[static_cast<std::size_t>(i)] = prev;
  }
  return c;
}

std::vector<std::vector<double>> l1_weights(double alpha0, const quad::Mesh& mesh) {
  return l1_weights(alpha0, mesh, kernels::gamma(alpha0));
}

void PdeSolution::write_csv(std::ostream& os) const {
  os << "x,t,u\n";
  char buf[96];
  for (int i = 0; i <= mesh.steps(); ++i) {
    const auto& row = u[static_cast<std::size_t>(i)];
    std::snprintf(buf, sizeof buf, "0,%.17g,0\n", mesh[i]);
    os << buf;
    for (std::size_t j = 0; j < x.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x[j], mesh[i], row[j]);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "1,%.17g,0\n", mesh[i]);
    os << buf;
  }
}

double relative_l2_error(std::span<const double> x, std::span<const double> u,
                         const std::function<double(double)>& exact) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double e = exact(x[j]);
    num += (u[j] - e) * (u[j] - e);
    den += e * e;
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

namespace {

// Thomas algorithm for the constant tridiagonal matrix (off, diag, off).
std::vector<double> thomas(double diag, double off, const std::vector<double>& rhs, int step) {
  const std::size_t m = rhs.size();
  std::vector<double> c(m), d(m);
  double piv = diag;
  for (std::size_t j = 0; j < m; ++j) {
    if (j > 0) piv = diag - off * c[j - 1];
    if (!(std::abs(piv) > 1e-300) || !std::isfinite(piv))
      throw NumericalError("tridiagonal solve broke down at step " + std::to_string(step));
    c[j] = off / piv;
    d[j] = (rhs[j] - (j > 0 ? off * d[j - 1] : 0.0)) / piv;
  }
  for (std::size_t j = m - 1; j-- > 0;) d[j] -= c[j] * d[j + 1];
  return d;
}

}  // namespace

PdeSolution solve_subdiffusion(const SonineData& data, const PdeConfig& cfg) {
  const kernels::KernelPair& pair = data.pair();
  if (pair.normalization() != kernels::Normalization::Gamma)
    throw ValidationError("subdiffusion: the kernel must use the Gamma normalization");
  if (!data.wsc1_valid()) throw ValidationError("WSC1 validation failed: " + data.wsc1_failure());
  if (cfg.M < 1) throw ValidationError("subdiffusion: need at least one interior node");
  if (!cfg.u0 || !cfg.forcing) throw ValidationError("subdiffusion: u0 and f are required");
  if (std::abs(cfg.u0(0.0)) > 1e-12 || std::abs(cfg.u0(1.0)) > 1e-12)
    throw ValidationError("subdiffusion: u0 must vanish at x = 0 and x = 1");
  if (cfg.mesh.horizon() > pair.horizon() * (1.0 + 1e-12))
    throw ValidationError("subdiffusion: final time exceeds the kernel horizon");

  const quad::Mesh& mesh = cfg.mesh;
  const int n = mesh.steps();
  const auto M = static_cast<std::size_t>(cfg.M);
  const double h = 1.0 / (cfg.M + 1);
  const double inv_h2 = 1.0 / (h * h);

  PdeSolution sol;
  sol.mesh = mesh;
  sol.x.resize(M);
  for (std::size_t j = 0; j < M; ++j) sol.x[j] = h * static_cast<double>(j + 1);
  sol.u.assign(static_cast<std::size_t>(n) + 1, std::vector<double>(M, 0.0));
  sol.steps.resize(static_cast<std::size_t>(n) + 1);
  for (std::size_t j = 0; j < M; ++j) sol.u[0][j] = cfg.u0(sol.x[j]);

  // f at every node, Laplacians of past levels
  std::vector<std::vector<double>> f(static_cast<std::size_t>(n) + 1, std::vector<double>(M));
  double scale = 1.0;
  for (std::size_t j = 0; j < M; ++j) scale = std::max(scale, std::abs(sol.u[0][j]));
  double fmax = 0.0;
  for (int i = 0; i <= n; ++i)
    for (std::size_t j = 0; j < M; ++j) {
      f[static_cast<std::size_t>(i)][j] = cfg.forcing(sol.x[j], mesh[i]);
      fmax = std::max(fmax, std::abs(f[static_cast<std::size_t>(i)][j]));
    }
  scale = std::max(scale, fmax * mesh.horizon());
  std::vector<std::vector<double>> lap(static_cast<std::size_t>(n) + 1, std::vector<double>(M));
  auto laplacian = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t j = 0; j < M; ++j) {
      const double l = j > 0 ? v[j - 1] : 0.0;
      const double r = j + 1 < M ? v[j + 1] : 0.0;
      out[j] = (l - 2.0 * v[j] + r) * inv_h2;
    }
  };
  laplacian(sol.u[0], lap[0]);

  const auto c = l1_weights(pair.alpha0(), mesh, pair.K_divisor());
  const bool memory = !(pair.constant_exponent() && data.weight().t_independent());
  const quad::GaussRule& gl2 = quad::gauss_legendre(2);
  std::vector<double> W;
  std::vector<double> rhs(M);

  for (int i = 1; i <= n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const double ti = mesh[i];
    const double tau = mesh.step(i);
    const double gi = eval_g(data, ti, 0.0);
    // W[k] = int_{t_{k-1}}^{t_k} g_2(s, t_i - s) ds
    W.assign(iu + 1, 0.0);
    if (memory) {
      for (int k = 1; k < i; ++k) {
        const double a = mesh[k - 1], hk = mesh.step(k);
        double sum = 0.0;
        for (std::size_t q = 0; q < gl2.nodes.size(); ++q) {
          const double s = a + hk * gl2.nodes[q];
          sum += gl2.weights[q] * eval_g2(data, s, ti - s);
        }
        W[static_cast<std::size_t>(k)] = sum * hk;
      }
      W[iu] = quad::graded_panel_quad([&](double s) { return eval_g2(data, s, ti - s); }, mesh[i - 1], ti,
                                      quad::SingularEnd::Right, 12, 8);
    }
    const auto& ci = c[iu];
    const double lead = (gi + W[iu]) / tau;
    const auto& prev = sol.u[iu - 1];
    for (std::size_t j = 0; j < M; ++j) {
      double v = lead * prev[j];
      for (int k = 1; k < i; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        v -= W[ku] * (sol.u[ku][j] - sol.u[ku - 1][j]) / mesh.step(k);
      }
      for (std::size_t k = 0; k < iu; ++k) v += ci[k] * lap[k][j];
      for (std::size_t k = 0; k <= iu; ++k) v += ci[k] * f[k][j];
      rhs[j] = v;
    }
    const double diag = lead + 2.0 * ci[iu] * inv_h2;
    const double off = -ci[iu] * inv_h2;
    std::vector<double> next = thomas(diag, off, rhs, i);

    double res = 0.0, umax = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      const double l = j > 0 ? next[j - 1] : 0.0;
      const double r = j + 1 < M ? next[j + 1] : 0.0;
      res = std::max(res, std::abs(off * l + diag * next[j] + off * r - rhs[j]));
      umax = std::max(umax, std::abs(next[j]));
    }
    if (!std::isfinite(umax) || umax > 1e3 * scale)
      throw NumericalError("subdiffusion: solution blew up at step " + std::to_string(i) + " (t = " +
                           std::to_string(ti) + ")");
    sol.steps[iu] = {res, memory ? iu : 0};
    sol.u[iu] = std::move(next);
    laplacian(sol.u[iu], lap[iu]);
  }

  if (cfg.exact) {
    const double T = mesh[n];
    sol.final_error = relative_l2_error(sol.x, sol.u.back(), [&](double x) { return cfg.exact(x, T); });
  }
  return sol;
}

}  // namespace sonine::pde
