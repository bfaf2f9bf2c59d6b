#include "sie/poincare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sie {

namespace {

const double kCbrtEps = std::cbrt(std::numeric_limits<double>::epsilon());

int steepest_coordinate(const HybridSystemDef& sys, const State& x) {
  const State g = sys.eval_grad_h(x);
  Eigen::Index j = 0;
  g.cwiseAbs().maxCoeff(&j);
  return static_cast<int>(j);
}

}  // namespace

// ---------------------------------------------------------------------------
// SurfaceChart

SurfaceChart::SurfaceChart(const HybridSystemDef& sys, const State& reference,
                           std::optional<int> eliminated)
    : sys_(&sys), reference_(reference) {
  if (reference.size() != sys.n || sys.n < 1) {
    throw Error(ErrorKind::PreconditionViolated, "chart reference has wrong dimension");
  }
  j_ = eliminated ? *eliminated : steepest_coordinate(sys, reference);
  if (j_ < 0 || j_ >= sys.n) throw Error(ErrorKind::PreconditionViolated, "chart index out of range");
}

Eigen::VectorXd SurfaceChart::project(const State& x) const {
  const Eigen::Index n = x.size();
  Eigen::VectorXd z(n - 1);
  for (Eigen::Index i = 0, k = 0; i < n; ++i) {
    if (i != j_) z[k++] = x[i];
  }
  return z;
}

State SurfaceChart::embed(const Eigen::VectorXd& z) const {
  const Eigen::Index n = reference_.size();
  if (z.size() != n - 1) throw Error(ErrorKind::PreconditionViolated, "chart coordinate dimension mismatch");
  State x(n);
  for (Eigen::Index i = 0, k = 0; i < n; ++i) {
    x[i] = i == j_ ? reference_[j_] : z[k++];
  }
  const double scale = std::max(1.0, std::abs(x[j_]));
  for (int it = 0; it < 60; ++it) {
    const double hv = sys_->eval_h(x);
    const double dh = sys_->eval_grad_h(x)[j_];
    if (std::abs(dh) < 1e-12) {
      throw Error(ErrorKind::ChartSingular, "|dH/dx_j| below 1e-12 while embedding", std::numeric_limits<double>::quiet_NaN(), j_, dh);
    }
    const double step = hv / dh;
    x[j_] -= step;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * scale || hv == 0.0) {
      return x;
    }
  }
  if (std::abs(sys_->eval_h(x)) <= 1e-12) return x;
  throw Error(ErrorKind::ChartSingular, "embedding Newton solve did not converge");
}

// ---------------------------------------------------------------------------
// Map

PoincareStep poincare_step(const HybridSystemDef& sys, const State& x, const ContinuousSignal& u,
                           const Input& v, const SolverConfig& cfg, double t0) {
  TimeToImpact tti = time_to_impact(sys, x, u, v, cfg, t0);
  if (!tti.finite()) {
    throw Error(ErrorKind::InfiniteTimeToImpact,
                "no crossing within t_cap=" + std::to_string(cfg.events.t_cap), t0);
  }
  return {std::move(tti.x_next), tti.duration};
}

State poincare_map(const HybridSystemDef& sys, const State& x, const ContinuousSignal& u,
                   const Input& v, const SolverConfig& cfg, double t0) {
  return poincare_step(sys, x, u, v, cfg, t0).x_next;
}

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::LES: return "LES";
    case Verdict::LASMarginal: return "LAS-marginal";
    case Verdict::Unstable: return "unstable";
  }
  return "unstable";
}

Verdict classify(double spectral_radius, double margin) noexcept {
  if (spectral_radius < 1.0 - margin) return Verdict::LES;
  if (spectral_radius <= 1.0 + margin) return Verdict::LASMarginal;
  return Verdict::Unstable;
}

namespace {

struct ReducedMap {
  const HybridSystemDef& sys;
  const SurfaceChart& chart;
  const SolverConfig& cfg;
  ContinuousSignal u0;
  Input v0;

  Eigen::VectorXd residual(const Eigen::VectorXd& z) const {
    return chart.project(poincare_map(sys, chart.embed(z), u0, v0, cfg)) - z;
  }
  Eigen::VectorXd image(const Eigen::VectorXd& z) const {
    return chart.project(poincare_map(sys, chart.embed(z), u0, v0, cfg));
  }

  /// Central differences of `fn` at z, column j with step scale * kCbrtEps * max(1, |z_j|).
  template <typename Fn>
  Eigen::MatrixXd jacobian(const Fn& fn, const Eigen::VectorXd& z, double scale) const {
    const Eigen::Index m = z.size();
    Eigen::MatrixXd jac(m, m);
    Eigen::VectorXd zp = z;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double h = scale * kCbrtEps * std::max(1.0, std::abs(z[j]));
      zp[j] = z[j] + h;
      const Eigen::VectorXd fp = fn(zp);
      zp[j] = z[j] - h;
      const Eigen::VectorXd fm = fn(zp);
      zp[j] = z[j];
      jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
  }
};

}  // namespace

StabilityReport find_fixed_point(const HybridSystemDef& sys, const State& x_guess,
                                 const FixedPointConfig& cfg) {
  if (sys.n < 2) throw Error(ErrorKind::PreconditionViolated, "fixed-point search needs n >= 2");
  const SurfaceChart chart(sys, x_guess, cfg.chart_index);
  const ReducedMap map{sys, chart, cfg.solver, ContinuousSignal::zero(sys.p), sys.zero_v()};
  auto residual = [&](const Eigen::VectorXd& z) { return map.residual(z); };

  StabilityReport report;
  Eigen::VectorXd z = chart.project(x_guess);
  Eigen::VectorXd fz = residual(z);
  bool converged = false;
  for (int iter = 0; iter <= cfg.max_iter; ++iter) {
    const double r = fz.norm();
    report.newton_iterates.push_back(z);
    report.newton_residuals.push_back(r);
    if (r <= cfg.newton_tol * std::max(1.0, z.norm())) {
      converged = true;
      // Polish: full steps kept only while they at least halve the residual.
      for (int k = 0; k < 2 && fz.norm() > 0.0; ++k) {
        try {
          const Eigen::MatrixXd jac = map.jacobian(residual, z, 1.0);
          const Eigen::VectorXd trial = z + jac.partialPivLu().solve(-fz);
          Eigen::VectorXd ft = residual(trial);
          if (!trial.allFinite() || !(ft.norm() <= 0.5 * fz.norm())) break;
          z = trial;
          fz = std::move(ft);
          report.newton_iterates.push_back(z);
          report.newton_residuals.push_back(fz.norm());
        } catch (const Error&) {
          break;
        }
      }
      break;
    }
    if (iter == cfg.max_iter) break;
    Eigen::MatrixXd jac;
    try {
      jac = map.jacobian(residual, z, 1.0);
    } catch (const Error& e) {
      throw NewtonDivergedError(std::string("Jacobian evaluation failed: ") + e.what(),
                                report.newton_iterates, report.newton_residuals);
    }
    const Eigen::VectorXd dz = jac.partialPivLu().solve(-fz);
    if (!dz.allFinite()) {
      throw NewtonDivergedError("singular Newton system", report.newton_iterates, report.newton_residuals);
    }
    bool accepted = false;
    double alpha = 1.0;
    for (int k = 0; k <= cfg.max_halvings; ++k, alpha *= 0.5) {
      const Eigen::VectorXd trial = z + alpha * dz;
      try {
        Eigen::VectorXd ft = residual(trial);
        if (ft.norm() < r) {
          z = trial;
          fz = std::move(ft);
          accepted = true;
          break;
        }
      } catch (const Error&) {
        // Map undefined at the trial point; shorten the step.
      }
    }
    if (!accepted) {
      throw NewtonDivergedError("line search failed after " + std::to_string(cfg.max_halvings) + " halvings",
                                report.newton_iterates, report.newton_residuals);
    }
  }
  if (!converged) {
    throw NewtonDivergedError("no convergence in " + std::to_string(cfg.max_iter) + " iterations",
                              report.newton_iterates, report.newton_residuals);
  }
  report.x_star = chart.embed(z);
  report.chart_index = cfg.chart_index ? *cfg.chart_index : steepest_coordinate(sys, report.x_star);
  report.T_star = poincare_step(sys, report.x_star, map.u0, map.v0, cfg.solver).t_impact;
  report.converged = true;
  return report;
}

StabilityReport linearize(const HybridSystemDef& sys, StabilityReport report, const FixedPointConfig& cfg) {
  if (!report.converged) throw Error(ErrorKind::PreconditionViolated, "linearize needs a converged fixed point");
  const SurfaceChart chart(sys, report.x_star, report.chart_index);
  const ReducedMap map{sys, chart, cfg.solver, ContinuousSignal::zero(sys.p), sys.zero_v()};
  auto image = [&](const Eigen::VectorXd& z) { return map.image(z); };
  const Eigen::VectorXd z = chart.project(report.x_star);

  report.jacobian = map.jacobian(image, z, 1.0);
  report.jacobian_half = map.jacobian(image, z, 0.5);
  const Eigen::MatrixXd jac_double = map.jacobian(image, z, 2.0);
  report.fd_step = kCbrtEps * std::max(1.0, z.cwiseAbs().maxCoeff());

  // Central differences: J(h) - J(h/2) ~ (3/4) c h^2 and J(2h) - J(h) ~ 3 c h^2, plus
  // evaluation noise of order eps_int / h in each column.
  const double h = report.fd_step;
  const double curvature = (jac_double - report.jacobian).cwiseAbs().maxCoeff() / (3.0 * h * h);
  const double eps_int = cfg.solver.integ.rtol * std::max(1.0, report.x_star.norm()) + cfg.solver.integ.atol;
  report.richardson_diff = (report.jacobian - report.jacobian_half).cwiseAbs().maxCoeff();
  report.richardson_bound = 10.0 * (0.75 * curvature * h * h + 3.0 * eps_int / h);

  report.eigenvalues = eigenvalues(report.jacobian);
  report.spectral_radius = report.eigenvalues.size() == 0 ? 0.0 : report.eigenvalues.cwiseAbs().maxCoeff();
  report.verdict = classify(report.spectral_radius, cfg.margin);
  return report;
}

// ---------------------------------------------------------------------------
// Eigenvalues

namespace {

void to_hessenberg(Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k + 2 < n; ++k) {
    const Eigen::Index m = n - k - 1;
    Eigen::VectorXd v = a.block(k + 1, k, m, 1);
    const double norm_x = v.norm();
    if (norm_x == 0.0) continue;
    const double alpha = v[0] > 0.0 ? -norm_x : norm_x;
    v[0] -= alpha;
    const double vn = v.norm();
    if (vn == 0.0) continue;
    v /= vn;
    a.block(k + 1, k, m, n - k) -= 2.0 * v * (v.transpose() * a.block(k + 1, k, m, n - k));
    a.block(0, k + 1, n, m) -= 2.0 * (a.block(0, k + 1, n, m) * v) * v.transpose();
    a.block(k + 2, k, m - 1, 1).setZero();
  }
}

double sign_of(double magnitude, double s) { return s >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude); }

}  // namespace

Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& input) {
  if (input.rows() != input.cols()) throw Error(ErrorKind::PreconditionViolated, "eigenvalues need a square matrix");
  const int n = static_cast<int>(input.rows());
  Eigen::VectorXcd out(n);
  if (n == 0) return out;
  if (!input.allFinite()) throw Error(ErrorKind::PreconditionViolated, "matrix has non-finite entries");

  Eigen::MatrixXd a = input;
  to_hessenberg(a);
  Eigen::VectorXd wr = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd wi = Eigen::VectorXd::Zero(n);

  double anorm = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();

  // Francis double-shift QR on the active block [l, nn] (0-based).
  int nn = n - 1;
  double t = 0.0;
  while (nn >= 0) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 1; --l) {
        double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) <= eps * s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      double x = a(nn, nn);
      if (l == nn) {
        wr[nn] = x + t;
        wi[nn] = 0.0;
        --nn;
      } else {
        double y = a(nn - 1, nn - 1);
        double w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          const double p = 0.5 * (y - x);
          const double q = p * p + w;
          double z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn - 1] = -z;
            wi[nn] = z;
          }
          nn -= 2;
        } else {
          if (its == 60) throw Error(ErrorKind::PreconditionViolated, "QR iteration did not converge");
          if (its == 10 || its == 20) {
            // Exceptional shift.
            t += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            const double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
          for (; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            double s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
            if (u <= eps * v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              x = std::abs(p) + std::abs(q) + std::abs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            const double s = sign_of(std::sqrt(p * p + q * q + r * r), p);
            if (s != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k != nn - 1) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k != nn - 1) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (nn >= 0 && l < nn - 1);
  }
  for (int i = 0; i < n; ++i) out[i] = {wr[i], wi[i]};
  return out;
}

}  // namespace sie
