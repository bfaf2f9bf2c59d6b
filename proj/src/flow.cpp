#include "sie/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sie {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Continuous extension (Hairer, Norsett, Wanner; dopri5 CONTD5).
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

struct Attempt {
  DenseStep step;
  State k7;
  double err = 0.0;
};

State rhs(const HybridSystemDef& sys, const ContinuousSignal& u, double t, const State& x) {
  return sys.eval_f(x, u.eval(t));
}

double error_norm(const State& err, const State& y0, const State& y1, const IntegratorConfig& cfg) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sk = cfg.atol + cfg.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / sk;
    sum += r * r;
  }
  return err.size() == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(err.size()));
}

Attempt attempt(const HybridSystemDef& sys, const ContinuousSignal& u, double t, const State& y,
                const State& k1, double h, const IntegratorConfig* cfg) {
  const State k2 = rhs(sys, u, t + c2 * h, y + h * (a21 * k1));
  const State k3 = rhs(sys, u, t + c3 * h, y + h * (a31 * k1 + a32 * k2));
  const State k4 = rhs(sys, u, t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const State k5 = rhs(sys, u, t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const State k6 =
      rhs(sys, u, t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  State y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
  const State k7 = rhs(sys, u, t + h, y1);

  Attempt out;
  if (cfg != nullptr) {
    const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    out.err = error_norm(err, y, y1, *cfg);
  }
  const State ydiff = y1 - y;
  const State bspl = h * k1 - ydiff;
  out.step.t0 = t;
  out.step.h = h;
  out.step.t_end = t + h;
  out.step.y0 = y;
  out.step.rcont[0] = bspl;
  out.step.rcont[1] = ydiff - h * k7 - bspl;
  out.step.rcont[2] = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
  out.step.y1 = std::move(y1);
  out.k7 = k7;
  return out;
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw Error(ErrorKind::InvalidConfig, "rtol and atol must be > 0");
  if (!(max_step > 0.0)) throw Error(ErrorKind::InvalidConfig, "max_step must be > 0");
  if (max_steps == 0) throw Error(ErrorKind::InvalidConfig, "max_steps must be > 0");
  if (!(blowup_norm > 0.0)) throw Error(ErrorKind::InvalidConfig, "blowup_norm must be > 0");
}

IntegratorConfig IntegratorConfig::tight() {
  IntegratorConfig cfg;
  cfg.rtol = 1e-12;
  cfg.atol = 1e-14;
  return cfg;
}

State DenseStep::eval(double t) const {
  if (t == t0) return y0;
  if (t == t_end) return y1;
  const double theta = (t - t0) / h;
  const double theta1 = 1.0 - theta;
  return y0 + theta * ((y1 - y0) + theta1 * (rcont[0] + theta * (rcont[1] + theta1 * rcont[2])));
}

State DenseStep::derivative(double t) const {
  const double theta = (t - t0) / h;
  const double theta1 = 1.0 - theta;
  const State inner = rcont[1] + theta1 * rcont[2];
  const State b = rcont[0] + theta * inner;
  const State a = (y1 - y0) + theta1 * b;
  const State da = -b + theta1 * (rcont[1] + (theta1 - theta) * rcont[2]);
  return (a + theta * da) / h;
}

FlowSegment::FlowSegment(double t0, State x0) : t0_(t0), x0_(std::move(x0)) {}

std::size_t FlowSegment::step_index(double t) const {
  if (steps_.empty()) return 0;
  // First step whose end exceeds t; steps_[i].t0 <= t < steps_[i].t1().
  const auto it = std::upper_bound(steps_.begin(), steps_.end(), t,
                                   [](double value, const DenseStep& s) { return value < s.t1(); });
  if (it == steps_.end()) return steps_.size() - 1;
  return static_cast<std::size_t>(it - steps_.begin());
}

State FlowSegment::eval(double t) const {
  if (steps_.empty() || t <= t0_) return x0_;
  if (t >= t1()) return x1();
  return steps_[step_index(t)].eval(t);
}

State FlowSegment::derivative(double t) const {
  if (steps_.empty()) return State::Zero(x0_.size());
  return steps_[step_index(std::clamp(t, t0_, t1()))].derivative(t);
}

void FlowSegment::append(DenseStep step) {
  stats_.min_step = std::min(stats_.min_step, step.h);
  stats_.max_step = std::max(stats_.max_step, step.h);
  steps_.push_back(std::move(step));
}

void FlowSegment::replace_last(DenseStep step) {
  if (steps_.empty()) {
    append(std::move(step));
    return;
  }
  steps_.back() = std::move(step);
}

void FlowSegment::truncate_at(std::size_t i, DenseStep step) {
  steps_.resize(i + 1);
  steps_[i] = std::move(step);
}

DenseStep dopri_step(const HybridSystemDef& sys, const ContinuousSignal& u, double t0,
                     const State& y0, double h) {
  if (h == 0.0) {
    DenseStep s;
    s.t0 = t0;
    s.h = 0.0;
    s.t_end = t0;
    s.y0 = y0;
    s.y1 = y0;
    for (auto& r : s.rcont) r = State::Zero(y0.size());
    return s;
  }
  return attempt(sys, u, t0, y0, rhs(sys, u, t0, y0), h, nullptr).step;
}

FlowStepper::FlowStepper(const HybridSystemDef& sys, const ContinuousSignal& u,
                         const IntegratorConfig& cfg, double t0, const State& x0)
    : sys_(sys), u_(u), cfg_(cfg), t_(t0), x_(x0) {
  cfg_.validate();
  if (x0.size() != sys.n) throw Error(ErrorKind::PreconditionViolated, "initial state has wrong dimension");
  if (!x0.allFinite()) throw Error(ErrorKind::PreconditionViolated, "initial state not finite");
  if (u.dim() != sys.p) throw Error(ErrorKind::PreconditionViolated, "input dimension does not match system");
  k1_ = rhs(sys_, u_, t_, x_);
  stats_.evaluations = 1;
}

double FlowStepper::initial_step(double t_limit) {
  const double span = t_limit - t_;
  const State sk = (cfg_.atol + cfg_.rtol * x_.array().abs()).matrix();
  const double n = static_cast<double>(std::max<Eigen::Index>(x_.size(), 1));
  const double dnf = std::sqrt((k1_.array() / sk.array()).square().sum() / n);
  const double dny = std::sqrt((x_.array() / sk.array()).square().sum() / n);
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
  h = std::min({h, cfg_.max_step, span});
  const State f1 = rhs(sys_, u_, t_ + h, x_ + h * k1_);
  ++stats_.evaluations;
  const double der2 = std::sqrt(((f1 - k1_).array() / sk.array()).square().sum() / n) / h;
  const double der12 = std::max(std::abs(der2), dnf);
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
  const double floor = std::max(1e-10 * span, 256.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_)));
  return std::min({std::max(std::min(100.0 * h, h1), floor), cfg_.max_step, span});
}

const DenseStep& FlowStepper::advance(double t_limit) {
  if (!(t_limit > t_)) throw Error(ErrorKind::PreconditionViolated, "step limit must exceed current time");
  if (h_ <= 0.0) h_ = initial_step(t_limit);
  for (;;) {
    if (stats_.accepted + stats_.rejected >= cfg_.max_steps) {
      throw Error(ErrorKind::StepLimitExceeded, "step budget exhausted at t=" + std::to_string(t_), t_);
    }
    double h = std::min(h_, cfg_.max_step);
    bool lands = false;
    if (t_ + h >= t_limit || (t_limit - (t_ + h)) < 1e-10 * h) {
      h = t_limit - t_;
      lands = true;
    }
    if (h <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(t_) || h < 1e-300) {
      throw Error(ErrorKind::StepLimitExceeded, "step size underflow at t=" + std::to_string(t_), t_);
    }
    Attempt a = attempt(sys_, u_, t_, x_, k1_, h, &cfg_);
    stats_.evaluations += 6;
    if (!std::isfinite(a.err)) a.err = 1e10;
    if (a.err <= 1.0) {
      double fac = a.err == 0.0 ? 10.0 : std::clamp(0.9 * std::pow(a.err, -0.2), 0.2, 10.0);
      if (last_rejected_) fac = std::min(fac, 1.0);
      last_rejected_ = false;
      ++stats_.accepted;
      stats_.min_step = std::min(stats_.min_step, h);
      stats_.max_step = std::max(stats_.max_step, h);
      const double norm = a.step.y1.norm();
      if (norm > cfg_.blowup_norm) {
        throw Error(ErrorKind::Blowup, "state norm " + std::to_string(norm) + " exceeded bound",
                    t_ + h, -1, norm);
      }
      if (lands) a.step.t_end = t_limit;
      t_ = a.step.t_end;
      x_ = a.step.y1;
      k1_ = std::move(a.k7);
      // A landing step may have been shortened; don't let it shrink the proposal.
      h_ = lands ? std::max(h_, fac * h) : fac * h;
      last_ = std::move(a.step);
      return last_;
    }
    ++stats_.rejected;
    last_rejected_ = true;
    h_ = h * std::max(0.2, 0.9 * std::pow(a.err, -0.2));
  }
}

FlowResult integrate_partial(const HybridSystemDef& sys, const State& x0, const ContinuousSignal& u,
                             double t0, double t1, const IntegratorConfig& cfg) {
  FlowResult out{FlowSegment(t0, x0), std::nullopt};
  if (!(t1 > t0)) {
    out.error = Error(ErrorKind::PreconditionViolated, "integration span must be positive");
    return out;
  }
  try {
    FlowStepper stepper(sys, u, cfg, t0, x0);
    while (stepper.t() < t1) out.segment.append(stepper.advance(t1));
    out.segment.mutable_stats() = stepper.stats();
  } catch (const Error& e) {
    out.error = e;
  }
  return out;
}

FlowSegment integrate(const HybridSystemDef& sys, const State& x0, const ContinuousSignal& u,
                      double t0, double t1, const IntegratorConfig& cfg) {
  FlowResult r = integrate_partial(sys, x0, u, t0, t1, cfg);
  if (r.error) throw *r.error;
  return std::move(r.segment);
}

FlowSegment integrate(const HybridSystemDef& sys, const State& x0, const ContinuousSignal& u,
                      double T, const IntegratorConfig& cfg) {
  return integrate(sys, x0, u, 0.0, T, cfg);
}

Sensitivity flow_sensitivity(const HybridSystemDef& sys, const State& x0, const ContinuousSignal& u,
                             double T, const IntegratorConfig& cfg, const State& direction) {
  if (std::abs(direction.norm() - 1.0) > 1e-12) {
    throw Error(ErrorKind::PreconditionViolated, "direction must have unit norm");
  }
  Sensitivity s;
  s.step = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, x0.norm());
  if (T == 0.0) {
    s.derivative = direction;
    s.derivative_half = direction;
    return s;
  }
  auto central = [&](double h) -> State {
    const State plus = integrate(sys, x0 + h * direction, u, T, cfg).x1();
    const State minus = integrate(sys, x0 - h * direction, u, T, cfg).x1();
    return (plus - minus) / (2.0 * h);
  };
  s.derivative = central(s.step);
  s.derivative_half = central(0.5 * s.step);
  s.error_estimate = (s.derivative - s.derivative_half).norm() / 3.0;
  return s;
}

}  // namespace sie
