// Licensed under the Apache License 2.0 (see LICENSE file).

#include "predict/predict.hpp"

#include <algorithm>
#include <cmath>

#include "common/errors.hpp"
#include "common/parallel.hpp"
#include "net/linearized.hpp"
#include "numkit/special.hpp"

namespace neuralsurv::predict {

PosteriorDraws draw_posterior(const PosteriorParameters& post, std::size_t S, numkit::RngStream& rng) {
  if (S < 2) throw InputError("predict: need at least 2 posterior draws");
  if (!(post.alpha > 0.0) || !(post.beta > 0.0)) throw InputError("predict: invalid Gamma posterior");
  const Eigen::Index m = post.mu.size();
  if (post.sigma.dim() != m) throw InputError("predict: covariance dimension mismatch");
  const auto s = static_cast<Eigen::Index>(S);
  PosteriorDraws d;
  d.phi.resize(s);
  Eigen::MatrixXd Z(m, s);
  for (Eigen::Index k = 0; k < s; ++k) {
    d.phi[k] = rng.gamma(post.alpha, post.beta);
    for (Eigen::Index j = 0; j < m; ++j) Z(j, k) = rng.normal();
  }
  d.theta = post.sigma.transform_normals(Z).colwise() + post.mu;
  return d;
}

PosteriorSurvival survival_curves(const net::MlpModel& model, const model::BaselinePrior& prior, double horizon,
                                  const PosteriorDraws& draws, const Eigen::VectorXd& theta_star,
                                  const Eigen::MatrixXd& X, const std::vector<double>& times, double level) {
  if (times.empty()) throw InputError("predict: empty time grid");
  for (std::size_t k = 0; k < times.size(); ++k)
    if (!(times[k] >= 0.0) || (k > 0 && times[k] < times[k - 1]))
      throw InputError("predict: times must be non-negative and non-decreasing");
  if (static_cast<std::size_t>(X.cols()) != model.covariate_dim()) throw InputError("predict: covariate count mismatch");
  // Integrate from 0 even when the requested grid starts later.
  const bool prepend = times.front() > 0.0;
  std::vector<double> axis;
  if (prepend) axis.push_back(0.0);
  axis.insert(axis.end(), times.begin(), times.end());
  const std::size_t T = axis.size();
  const auto pts = net::curve_points(axis, X);
  const auto eval = net::evaluate_points(model, {theta_star.data(), static_cast<std::size_t>(theta_star.size())}, pts,
                                         true);
  const auto base = model::baseline_terms(model, pts, prior, horizon);
  const Eigen::MatrixXd delta = draws.theta.colwise() - theta_star;
  const Eigen::Index S = draws.phi.size();

  PosteriorSurvival out;
  out.times = times;
  out.level = level;
  out.draws.resize(pts.observation_count());
  parallel_for(pts.observation_count(), [&](std::size_t i) {
    const auto b = static_cast<Eigen::Index>(pts.begin(i));
    const auto t = static_cast<Eigen::Index>(T);
    const Eigen::MatrixXd G =
        (eval.J.middleCols(b, t).transpose() * delta).colwise() + eval.g.segment(b, t);  // T x S
    Eigen::MatrixXd surv(S, t - (prepend ? 1 : 0));
    for (Eigen::Index s = 0; s < S; ++s) {
      double cum = 0.0, prev_h = 0.0;
      for (Eigen::Index k = 0; k < t; ++k) {
        const double h = draws.phi[s] * base.factor[b + k] * numkit::sigmoid(G(k, s));
        if (k > 0) cum += 0.5 * (axis[static_cast<std::size_t>(k)] - axis[static_cast<std::size_t>(k - 1)]) * (h + prev_h);
        prev_h = h;
        if (!prepend || k > 0) surv(s, k - (prepend ? 1 : 0)) = std::exp(-cum);
      }
    }
    out.draws[i] = std::move(surv);
  });
  if (S >= 20) {
    out.summary.resize(out.draws.size());
    for (std::size_t i = 0; i < out.draws.size(); ++i) out.summary[i] = summarize(out.draws[i], level);
  }
  return out;
}

PosteriorSurvival sample_survival(const PosteriorParameters& post, const net::MlpModel& model,
                                  const model::BaselinePrior& prior, double horizon, const Eigen::MatrixXd& X,
                                  const std::vector<double>& times, std::size_t S, numkit::RngStream& rng,
                                  double level) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("predict: level must lie in (0, 1)");
  const auto draws = draw_posterior(post, S, rng);
  return survival_curves(model, prior, horizon, draws, post.theta_star, X, times, level);
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Band credible_band(const Eigen::MatrixXd& samples, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("credible band: level must lie in (0, 1)");
  if (samples.rows() < 20) throw InputError("credible band: need at least 20 draws");
  Band b{Eigen::VectorXd(samples.cols()), Eigen::VectorXd(samples.cols())};
  std::vector<double> col(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index k = 0; k < samples.cols(); ++k) {
    Eigen::VectorXd::Map(col.data(), samples.rows()) = samples.col(k);
    b.lo[k] = quantile(col, 0.5 * (1.0 - level));
    b.hi[k] = quantile(col, 0.5 * (1.0 + level));
  }
  return b;
}

SurvivalSummary summarize(const Eigen::MatrixXd& samples, double level) {
  auto band = credible_band(samples, level);
  SurvivalSummary s;
  s.mean = samples.colwise().mean().transpose();
  s.median.resize(samples.cols());
  std::vector<double> col(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index k = 0; k < samples.cols(); ++k) {
    Eigen::VectorXd::Map(col.data(), samples.rows()) = samples.col(k);
    s.median[k] = quantile(col, 0.5);
  }
  s.lo = std::move(band.lo);
  s.hi = std::move(band.hi);
  return s;
}

}  // namespace neuralsurv::predict
