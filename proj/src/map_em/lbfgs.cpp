// Licensed under the Apache License 2.0 (see LICENSE file).

#include "map_em/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "common/errors.hpp"

namespace neuralsurv::map_em {

namespace {

struct Probe {
  double a;
  double f;
  double d;  // directional derivative
};

// Minimizer of the cubic through two probes, safeguarded into the bracket interior.
double interpolate(const Probe& lo, const Probe& hi) {
  const double lo_a = std::min(lo.a, hi.a), hi_a = std::max(lo.a, hi.a);
  const double d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
  const double disc = d1 * d1 - lo.d * hi.d;
  double a = 0.5 * (lo.a + hi.a);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), hi.a - lo.a);
    const double denom = hi.d - lo.d + 2.0 * d2;
    if (denom != 0.0) {
      const double cand = hi.a - (hi.a - lo.a) * (hi.d + d2 - d1) / denom;
      if (std::isfinite(cand)) a = cand;
    }
  }
  const double margin = 0.1 * (hi_a - lo_a);
  return std::clamp(a, lo_a + margin, hi_a - margin);
}

class LineSearch {
 public:
  LineSearch(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& p, const LbfgsOptions& opt,
             int& evals)
      : f_(f), x_(x), p_(p), opt_(opt), evals_(evals), g_(x.size()) {}

  // Returns true and fills the accepted point when the strong Wolfe conditions hold
  // (or sufficient decrease holds when the budget runs out).
  bool run(double f0, double d0, double a1, Eigen::VectorXd& x_out, double& f_out, Eigen::VectorXd& g_out) {
    f0_ = f0;
    d0_ = d0;
    Probe prev{0.0, f0, d0};
    double a = a1;
    for (int it = 0; it < opt_.max_line_search; ++it) {
      const Probe cur = eval(a);
      if (!std::isfinite(cur.f) || cur.f > f0 + opt_.c1 * a * d0 || (it > 0 && cur.f >= prev.f)) {
        if (!std::isfinite(cur.f)) {
          a = 0.5 * (prev.a + a);
          continue;
        }
        return zoom(prev, cur, x_out, f_out, g_out);
      }
      if (std::abs(cur.d) <= -opt_.c2 * d0) return accept(cur, x_out, f_out, g_out);
      if (cur.d >= 0.0) return zoom(cur, prev, x_out, f_out, g_out);
      prev = cur;
      best_ = cur;
      a *= 2.0;
    }
    if (best_.a > 0.0) {
      eval(best_.a);
      return accept(best_, x_out, f_out, g_out);
    }
    return false;
  }

 private:
  Probe eval(double a) {
    xt_ = x_ + a * p_;
    ++evals_;
    const double fv = f_(xt_, g_);
    return {a, fv, std::isfinite(fv) ? g_.dot(p_) : std::numeric_limits<double>::quiet_NaN()};
  }

  // The probe must be the most recent evaluation.
  bool accept(const Probe& p, Eigen::VectorXd& x_out, double& f_out, Eigen::VectorXd& g_out) {
    x_out = xt_;
    f_out = p.f;
    g_out = g_;
    return true;
  }

  bool zoom(Probe lo, Probe hi, Eigen::VectorXd& x_out, double& f_out, Eigen::VectorXd& g_out) {
    for (int it = 0; it < opt_.max_line_search; ++it) {
      const double a = interpolate(lo, hi);
      const Probe cur = eval(a);
      if (!std::isfinite(cur.f) || cur.f > f0_ + opt_.c1 * a * d0_ || cur.f >= lo.f) {
        hi = cur;
        if (!std::isfinite(hi.f)) hi.f = std::numeric_limits<double>::max(), hi.d = 0.0;
      } else {
        if (std::abs(cur.d) <= -opt_.c2 * d0_) return accept(cur, x_out, f_out, g_out);
        if (cur.d * (hi.a - lo.a) >= 0.0) hi = lo;
        lo = cur;
      }
      if (std::abs(hi.a - lo.a) < 1e-16 * std::max(1.0, lo.a)) break;
    }
    if (lo.a > 0.0 && lo.f < f0_) {
      eval(lo.a);
      return accept(lo, x_out, f_out, g_out);
    }
    return false;
  }

  const Objective& f_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& p_;
  const LbfgsOptions& opt_;
  int& evals_;
  Eigen::VectorXd g_;
  Eigen::VectorXd xt_;
  double f0_ = 0.0, d0_ = 0.0;
  Probe best_{0.0, 0.0, 0.0};
};

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& opt) {
  if (opt.memory < 1 || opt.max_iterations < 0) throw InputError("lbfgs: invalid options");
  LbfgsResult r;
  r.x = std::move(x0);
  r.gradient.resize(r.x.size());
  r.value = f(r.x, r.gradient);
  r.evaluations = 1;
  if (!std::isfinite(r.value) || !r.gradient.allFinite()) throw NumericalError("lbfgs: objective not finite at start");

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd x_new, g_new, p;
  std::vector<double> alpha(static_cast<std::size_t>(opt.memory));

  for (r.iterations = 0; r.iterations < opt.max_iterations; ++r.iterations) {
    const double gnorm = r.gradient.lpNorm<Eigen::Infinity>();
    if (gnorm <= opt.gradient_tolerance) {
      r.converged = true;
      r.message = "gradient tolerance reached";
      return r;
    }
    // Two-loop recursion.
    p = -r.gradient;
    const auto h = s_hist.size();
    for (std::size_t j = h; j-- > 0;) {
      alpha[j] = rho_hist[j] * s_hist[j].dot(p);
      p -= alpha[j] * y_hist[j];
    }
    if (h > 0) p *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t j = 0; j < h; ++j) {
      const double beta = rho_hist[j] * y_hist[j].dot(p);
      p += (alpha[j] - beta) * s_hist[j];
    }
    double d0 = r.gradient.dot(p);
    if (!(d0 < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      p = -r.gradient;
      d0 = -r.gradient.squaredNorm();
    }
    const double a1 = h == 0 ? std::min(1.0, 1.0 / r.gradient.norm()) : 1.0;
    double f_new = 0.0;
    LineSearch ls(f, r.x, p, opt, r.evaluations);
    if (!ls.run(r.value, d0, a1, x_new, f_new, g_new) || !(f_new <= r.value)) {
      r.message = "line search failed";
      r.converged = gnorm <= 1e3 * opt.gradient_tolerance;
      return r;
    }
    Eigen::VectorXd s = x_new - r.x;
    Eigen::VectorXd y = g_new - r.gradient;
    const double sy = s.dot(y);
    const double change = r.value - f_new;
    r.x.swap(x_new);
    r.gradient.swap(g_new);
    r.value = f_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      rho_hist.push_back(1.0 / sy);
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
    }
    if (change <= opt.relative_tolerance * std::max({1.0, std::abs(r.value)})) {
      ++r.iterations;
      r.converged = true;
      r.message = "relative change below tolerance";
      return r;
    }
  }
  r.message = "iteration limit reached";
  return r;
}

}  // namespace neuralsurv::map_em
