#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sie/events.hpp"

namespace sie {

/**
 * @brief Coordinates on S by eliminating one state coordinate.
 *
 * The eliminated index j is where |dH/dx_j| is largest at the reference point. project() drops
 * x_j; embed() re-inserts it by a 1-D Newton solve of H = 0 along x_j, started from the
 * reference value.
 */
class SurfaceChart {
 public:
  SurfaceChart(const HybridSystemDef& sys, const State& reference,
               std::optional<int> eliminated = std::nullopt);

  [[nodiscard]] int eliminated() const noexcept { return j_; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(reference_.size()) - 1; }
  [[nodiscard]] const State& reference() const noexcept { return reference_; }
  [[nodiscard]] Eigen::VectorXd project(const State& x) const;
  /// Throws ChartSingular when |dH/dx_j| < 1e-12 during the solve, or when it fails to converge.
  [[nodiscard]] State embed(const Eigen::VectorXd& z) const;

 private:
  const HybridSystemDef* sys_;
  State reference_;
  int j_;
};

struct PoincareStep {
  State x_next;
  double t_impact = 0.0;  ///< T_I(x, u, v)
};

/// P(x, u, v) = phi(T_I(x, u, v), delta(x, v), u) with the input read on the clock starting at t0.
[[nodiscard]] PoincareStep poincare_step(const HybridSystemDef& sys, const State& x,
                                         const ContinuousSignal& u, const Input& v,
                                         const SolverConfig& cfg, double t0 = 0.0);
[[nodiscard]] State poincare_map(const HybridSystemDef& sys, const State& x, const ContinuousSignal& u,
                                 const Input& v, const SolverConfig& cfg, double t0 = 0.0);

enum class Verdict { LES, LASMarginal, Unstable };
[[nodiscard]] std::string_view to_string(Verdict v) noexcept;

struct StabilityReport {
  State x_star;
  double T_star = 0.0;
  int chart_index = 0;
  bool converged = false;
  std::vector<double> newton_residuals;
  std::vector<Eigen::VectorXd> newton_iterates;
  Eigen::MatrixXd jacobian;       ///< (n-1)x(n-1) in chart coordinates, FD step h
  Eigen::MatrixXd jacobian_half;  ///< same at step h/2
  double fd_step = 0.0;
  /// max |J(h) - J(h/2)| and the step-halving consistency bound it is checked against.
  double richardson_diff = 0.0;
  double richardson_bound = 0.0;
  Eigen::VectorXcd eigenvalues;
  double spectral_radius = 0.0;
  Verdict verdict = Verdict::Unstable;

  [[nodiscard]] bool richardson_consistent() const { return richardson_diff <= richardson_bound; }
};

struct FixedPointConfig {
  SolverConfig solver = SolverConfig::tight();
  double newton_tol = 1e-10;  ///< on |F| / max(1, |z|)
  int max_iter = 50;
  int max_halvings = 20;
  double margin = 1e-6;       ///< LES iff spectral radius < 1 - margin
  std::optional<int> chart_index;
};

/// Newton on F(z) = project(P(embed(z), 0, 0)) - z with a central-difference Jacobian.
/// Throws NewtonDivergedError (with the iterate trace) or ChartSingular.
[[nodiscard]] StabilityReport find_fixed_point(const HybridSystemDef& sys, const State& x_guess,
                                               const FixedPointConfig& cfg = {});

/// Fills the Jacobian, eigenvalues and verdict of a converged report.
[[nodiscard]] StabilityReport linearize(const HybridSystemDef& sys, StabilityReport report,
                                        const FixedPointConfig& cfg = {});

[[nodiscard]] Verdict classify(double spectral_radius, double margin) noexcept;

/// Eigenvalues of a real square matrix: Householder reduction to Hessenberg form followed by
/// Francis double-shift QR.
[[nodiscard]] Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& a);

}  // namespace sie
