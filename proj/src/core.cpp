#include "sie/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "sie/rng.hpp"

namespace sie {

namespace {

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::EvaluatorFailure, std::string(what) + " raised: " + e.what());
  }
}

void require_finite(const State& x, const char* what) {
  if (!x.allFinite()) {
    throw Error(ErrorKind::EvaluatorFailure, std::string(what) + " returned a non-finite value");
  }
}

}  // namespace

double SplitMix64::normal() noexcept {
  // Box-Muller; u1 in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

State HybridSystemDef::eval_f(const State& x, const Input& u) const {
  State dx = guarded("f", [&] { return f(x, u); });
  if (dx.size() != n) throw Error(ErrorKind::EvaluatorFailure, "f returned wrong dimension");
  require_finite(dx, "f");
  return dx;
}

State HybridSystemDef::eval_delta(const State& x, const Input& v) const {
  State xp = guarded("delta", [&] { return delta(x, v); });
  if (xp.size() != n) throw Error(ErrorKind::EvaluatorFailure, "delta returned wrong dimension");
  require_finite(xp, "delta");
  return xp;
}

double HybridSystemDef::eval_h(const State& x) const {
  const double value = guarded("H", [&] { return h(x); });
  if (!std::isfinite(value)) throw Error(ErrorKind::EvaluatorFailure, "H returned a non-finite value");
  return value;
}

State HybridSystemDef::eval_grad_h(const State& x) const {
  State g = grad_h ? guarded("grad_h", [&] { return grad_h(x); })
                   : central_difference_gradient([this](const State& y) { return eval_h(y); }, x);
  if (g.size() != n) throw Error(ErrorKind::EvaluatorFailure, "grad_h returned wrong dimension");
  require_finite(g, "grad_h");
  return g;
}

double HybridSystemDef::lie_derivative(const State& x, const Input& u) const {
  return eval_grad_h(x).dot(eval_f(x, u));
}

State central_difference_gradient(const std::function<double(const State&)>& h, const State& x) {
  State g(x.size());
  State probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = 1e-6 * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + step;
    const double hp = h(probe);
    probe[i] = x[i] - step;
    const double hm = h(probe);
    probe[i] = x[i];
    g[i] = (hp - hm) / (2.0 * step);
  }
  return g;
}

// ---------------------------------------------------------------------------
// ContinuousSignal

ContinuousSignal ContinuousSignal::zero(int dim) {
  ContinuousSignal s(Kind::Zero, dim);
  s.value_ = Input::Zero(dim);
  return s;
}

ContinuousSignal ContinuousSignal::constant(const Input& value) {
  ContinuousSignal s(Kind::Constant, static_cast<int>(value.size()));
  s.value_ = value;
  return s;
}

ContinuousSignal ContinuousSignal::sinusoid(const Input& amplitude, double omega, double phase) {
  ContinuousSignal s(Kind::Sinusoid, static_cast<int>(amplitude.size()));
  s.value_ = amplitude;
  s.omega_ = omega;
  s.phase_ = phase;
  return s;
}

ContinuousSignal ContinuousSignal::tabulated(std::vector<double> times, std::vector<Input> values) {
  if (times.empty() || times.size() != values.size()) {
    throw Error(ErrorKind::InvalidConfig, "tabulated signal needs matching non-empty times/values");
  }
  if (!std::is_sorted(times.begin(), times.end()) ||
      std::adjacent_find(times.begin(), times.end()) != times.end()) {
    throw Error(ErrorKind::InvalidConfig, "tabulated signal times must be strictly increasing");
  }
  const auto dim = values.front().size();
  for (const auto& v : values) {
    if (v.size() != dim) throw Error(ErrorKind::InvalidConfig, "tabulated signal dimension mismatch");
  }
  ContinuousSignal s(Kind::Tabulated, static_cast<int>(dim));
  s.times_ = std::move(times);
  s.samples_ = std::move(values);
  return s;
}

ContinuousSignal ContinuousSignal::composite(std::vector<ContinuousSignal> terms) {
  if (terms.empty()) throw Error(ErrorKind::InvalidConfig, "composite signal needs at least one term");
  const int dim = terms.front().dim();
  for (const auto& t : terms) {
    if (t.dim() != dim) throw Error(ErrorKind::InvalidConfig, "composite signal dimension mismatch");
  }
  ContinuousSignal s(Kind::Composite, dim);
  s.terms_ = std::move(terms);
  return s;
}

Input ContinuousSignal::eval(double t) const {
  switch (kind_) {
    case Kind::Zero:
      return Input::Zero(dim_);
    case Kind::Constant:
      return value_;
    case Kind::Sinusoid:
      return value_ * std::sin(omega_ * t + phase_);
    case Kind::Tabulated: {
      if (t <= times_.front()) return samples_.front();
      if (t >= times_.back()) return samples_.back();
      const auto it = std::upper_bound(times_.begin(), times_.end(), t);
      const auto i = static_cast<std::size_t>(it - times_.begin());
      const double w = (t - times_[i - 1]) / (times_[i] - times_[i - 1]);
      return (1.0 - w) * samples_[i - 1] + w * samples_[i];
    }
    case Kind::Composite: {
      Input sum = Input::Zero(dim_);
      for (const auto& term : terms_) sum += term.eval(t);
      return sum;
    }
  }
  return Input::Zero(dim_);
}

double ContinuousSignal::sup_norm() const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Constant:
    case Kind::Sinusoid:
      return value_.norm();
    case Kind::Tabulated: {
      // Linear interpolation stays inside the convex hull of neighbouring samples.
      double m = 0.0;
      for (const auto& v : samples_) m = std::max(m, v.norm());
      return m;
    }
    case Kind::Composite: {
      double m = 0.0;
      for (const auto& term : terms_) m += term.sup_norm();
      return m;
    }
  }
  return 0.0;
}

ContinuousSignal ContinuousSignal::shifted(double dt) const {
  ContinuousSignal s = *this;
  switch (kind_) {
    case Kind::Sinusoid:
      s.phase_ = phase_ + omega_ * dt;
      break;
    case Kind::Tabulated:
      for (auto& t : s.times_) t -= dt;
      break;
    case Kind::Composite:
      for (auto& term : s.terms_) term = term.shifted(dt);
      break;
    default:
      break;
  }
  return s;
}

ContinuousSignal ContinuousSignal::scaled(double factor) const {
  ContinuousSignal s = *this;
  s.value_ *= factor;
  for (auto& v : s.samples_) v *= factor;
  for (auto& term : s.terms_) term = term.scaled(factor);
  return s;
}

// ---------------------------------------------------------------------------
// DiscreteSequence

DiscreteSequence DiscreteSequence::zero(int dim) {
  DiscreteSequence s(Kind::Zero, dim);
  s.value_ = Input::Zero(dim);
  return s;
}

DiscreteSequence DiscreteSequence::constant(const Input& value) {
  DiscreteSequence s(Kind::Constant, static_cast<int>(value.size()));
  s.value_ = value;
  return s;
}

DiscreteSequence DiscreteSequence::iid_uniform(const Input& bound, std::uint64_t seed) {
  if ((bound.array() < 0.0).any()) {
    throw Error(ErrorKind::InvalidConfig, "iid-uniform bounds must be non-negative");
  }
  DiscreteSequence s(Kind::IidUniform, static_cast<int>(bound.size()));
  s.value_ = bound;
  s.seed_ = seed;
  return s;
}

DiscreteSequence DiscreteSequence::explicit_values(std::vector<Input> values) {
  const int dim = values.empty() ? 0 : static_cast<int>(values.front().size());
  for (const auto& v : values) {
    if (v.size() != dim) throw Error(ErrorKind::InvalidConfig, "explicit sequence dimension mismatch");
  }
  DiscreteSequence s(Kind::Explicit, dim);
  s.values_ = std::move(values);
  return s;
}

Input DiscreteSequence::at(std::size_t k) const {
  switch (kind_) {
    case Kind::Zero:
      return Input::Zero(dim_);
    case Kind::Constant:
      return value_;
    case Kind::IidUniform: {
      Input v(dim_);
      for (int i = 0; i < dim_; ++i) {
        const std::uint64_t n = static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(dim_) +
                                static_cast<std::uint64_t>(i) + 1;
        const double unit = SplitMix64::to_unit(SplitMix64::at(seed_, n));
        v[i] = value_[i] * (2.0 * unit - 1.0);
      }
      return v;
    }
    case Kind::Explicit:
      return k < values_.size() ? values_[k] : Input::Zero(dim_);
  }
  return Input::Zero(dim_);
}

double DiscreteSequence::sup_norm() const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Constant:
    case Kind::IidUniform:
      return value_.norm();
    case Kind::Explicit: {
      double m = 0.0;
      for (const auto& v : values_) m = std::max(m, v.norm());
      return m;
    }
  }
  return 0.0;
}

DiscreteSequence DiscreteSequence::scaled(double factor) const {
  DiscreteSequence s = *this;
  s.value_ *= factor;
  for (auto& v : s.values_) v *= factor;
  return s;
}

DiscreteSequence DiscreteSequence::reseeded(std::uint64_t seed) const {
  DiscreteSequence s = *this;
  s.seed_ = seed;
  return s;
}

// ---------------------------------------------------------------------------

double euclidean(const Eigen::Ref<const Eigen::VectorXd>& x) { return x.norm(); }

double point_set_distance(const State& x, std::span<const State> samples) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& y : samples) best = std::min(best, (x - y).norm());
  return best;
}

ValidationReport validate_system(const HybridSystemDef& sys, std::span<const State> probes,
                                 double surface_tol) {
  if (probes.empty()) throw Error(ErrorKind::PreconditionViolated, "no probe states");
  ValidationReport report;
  const Input u0 = sys.zero_u();
  const Input v0 = sys.zero_v();
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const State& x = probes[i];
    if (!x.allFinite()) throw Error(ErrorKind::PreconditionViolated, "probe state not finite");
    ProbeResult r;
    try {
      r.f_finite = sys.f(x, u0).allFinite();
      r.delta_finite = sys.delta(x, v0).allFinite();
      const double hv = sys.h(x);
      r.h_finite = std::isfinite(hv);
      r.on_surface = r.h_finite && std::abs(hv) <= surface_tol;
      const State fd = central_difference_gradient(sys.h, x);
      if (sys.grad_h) {
        const State g = sys.grad_h(x);
        r.grad_norm = g.norm();
        r.grad_mismatch = (g - fd).norm() / std::max(g.norm(), 1e-300);
        if (g.norm() == 0.0 && fd.norm() == 0.0) r.grad_mismatch = 0.0;
      } else {
        r.grad_norm = fd.norm();
      }
    } catch (const std::exception& e) {
      throw Error(ErrorKind::EvaluatorFailure, std::string("probe ") + std::to_string(i) + ": " + e.what(),
                  std::numeric_limits<double>::quiet_NaN(), static_cast<std::ptrdiff_t>(i));
    }
    report.all_finite = report.all_finite && r.f_finite && r.delta_finite && r.h_finite;
    report.max_grad_mismatch = std::max(report.max_grad_mismatch, r.grad_mismatch);
    if (r.on_surface && r.grad_norm < 1e-12) report.degenerate_gradient = true;
    report.probes.push_back(r);
  }
  return report;
}

}  // namespace sie
