// Licensed under the Apache License 2.0 (see LICENSE file).

#include "pipeline/selftest.hpp"

#include <algorithm>
#include <cmath>

#include "cavi/low_rank.hpp"
#include "data/dataset.hpp"
#include "json.hpp"
#include "map_em/em.hpp"
#include "model/marked_pp.hpp"
#include "net/mlp.hpp"
#include "numkit/grid.hpp"
#include "numkit/rng.hpp"
#include "numkit/special.hpp"

namespace neuralsurv::pipeline {

namespace {

CheckResult check_pg_mean(numkit::RngStream& rng) {
  constexpr std::size_t kDraws = 20000;
  double worst = 0.0;
  std::string detail;
  for (double c : {0.1, 1.0, 5.0}) {
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t d = 0; d < kDraws; ++d) {
      const double w = model::sample_pg_series(1.0, c, rng);
      sum += w;
      sum_sq += w * w;
    }
    const double n = static_cast<double>(kDraws);
    const double mean = sum / n;
    const double se = std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / (n - 1.0));
    const double z = std::abs(mean - numkit::pg_mean(1.0, c)) / se;
    worst = std::max(worst, z);
    detail += "c=" + std::to_string(c) + " z=" + std::to_string(z) + "; ";
  }
  return {"pg_mean_vs_series_mc", worst < 3.0, worst, 3.0, detail + "standard errors"};
}

CheckResult check_jacobian(numkit::RngStream& rng, bool flip) {
  const auto model = net::MlpModel::default_architecture(4);
  const std::size_t m = model.parameter_count();
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> theta(m), x(4);
    for (auto& v : theta) v = rng.normal(0.0, 0.5);
    for (auto& v : x) v = rng.normal();
    const double t = rng.uniform();
    Eigen::VectorXd J = model.jacobian(t, x, theta);
    if (flip) J = -J;
    for (std::size_t j = 0; j < m; ++j) {
      const double keep = theta[j];
      theta[j] = keep + h;
      const double up = model.forward(t, x, theta);
      theta[j] = keep - h;
      const double down = model.forward(t, x, theta);
      theta[j] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double tol = std::max(1e-6, 1e-4 * std::abs(J[static_cast<Eigen::Index>(j)]));
      worst = std::max(worst, std::abs(J[static_cast<Eigen::Index>(j)] - fd) / tol);
    }
  }
  return {"jacobian_vs_finite_differences", worst <= 1.0, worst, 1.0,
          "largest |J - FD| / max(1e-6, 1e-4 |J|) over 100 random points"};
}

CheckResult check_woodbury(numkit::RngStream& rng) {
  cavi::LowRankFactor f{Eigen::MatrixXd(120, 30), Eigen::VectorXd(30)};
  for (Eigen::Index r = 0; r < f.U.size(); ++r) f.U.data()[r] = rng.normal();
  for (Eigen::Index r = 0; r < f.c.size(); ++r) f.c[r] = rng.exponential(1.0);
  const Eigen::MatrixXd dense = cavi::dense_inverse_B(f);
  const double err = (cavi::woodbury_inverse_B(f) - dense).norm() / dense.norm();
  return {"woodbury_vs_dense_inverse", err < 1e-8, err, 1e-8, "relative Frobenius error, m=120, R=30"};
}

CheckResult check_augmentation(numkit::RngStream& rng) {
  model::BaselineIntensity lam{0.5, 1.0, [](double) { return 0.5; }};
  const auto g = [](double) { return 0.3; };
  const auto mc = model::augmented_survival_factor(lam, g, 1.0, 50000, rng);
  const double exact = model::survival_factor(lam, g, 1.0);
  const double rel = std::abs(mc.mean - exact) / exact;
  return {"augmentation_identity_mc", rel < 0.01, rel, 0.01,
          "relative error of E[prod exp f(w, -g)] vs exp(-int lambda0 sigmoid(g)), 5e4 draws"};
}

CheckResult check_em_ascent(std::uint64_t seed) {
  numkit::RngStream rng(seed);
  const auto raw = data::gen_synthetic(25, rng);
  const auto ds = data::normalize_time(data::FeatureScaling::fit(raw).apply(raw), raw.max_time());
  const auto grid = numkit::build_grid(ds.time, 64);
  const map_em::EmProblem prob(net::MlpModel::default_architecture(ds.covariate_count()), grid, ds, {});
  map_em::EmConfig cfg;
  cfg.seed = seed;
  const auto r = map_em::run_em(prob, cfg);
  double worst = 0.0;
  for (std::size_t k = 1; k < r.trace.size(); ++k)
    worst = std::max(worst, r.trace[k - 1].log_posterior - r.trace[k].log_posterior);
  return {"em_ascent", worst <= 1e-8 && r.converged, worst, 1e-8,
          "largest decrease of the EM objective over " + std::to_string(r.iterations) + " iterations" +
              (r.converged ? "" : " (not converged)")};
}

CheckResult check_digamma() {
  double worst = 0.0;
  for (double x = 0.05; x < 50.0; x *= 1.37)
    worst = std::max(worst, std::abs(numkit::digamma(x + 1.0) - numkit::digamma(x) - 1.0 / x));
  return {"digamma_recurrence", worst <= 1e-10, worst, 1e-10, "max |psi(x+1) - psi(x) - 1/x| on [0.05, 50]"};
}

}  // namespace

bool SelftestReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string SelftestReport::to_json() const {
  nlohmann::json j;
  j["all_passed"] = all_passed();
  auto& arr = j["checks"] = nlohmann::json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name},
                   {"passed", c.passed},
                   {"observed", c.observed},
                   {"tolerance", c.tolerance},
                   {"detail", c.detail}});
  return j.dump(2);
}

SelftestReport run_selftest(const SelftestOptions& opt) {
  numkit::RngStream root(opt.seed);
  SelftestReport rep;
  auto pg_rng = root.derive(1);
  auto jac_rng = root.derive(2);
  auto wb_rng = root.derive(3);
  auto aug_rng = root.derive(4);
  rep.checks.push_back(check_pg_mean(pg_rng));
  rep.checks.push_back(check_jacobian(jac_rng, opt.inject_jacobian_sign_flip));
  rep.checks.push_back(check_woodbury(wb_rng));
  rep.checks.push_back(check_augmentation(aug_rng));
  rep.checks.push_back(check_em_ascent(opt.seed));
  rep.checks.push_back(check_digamma());
  return rep;
}

}  // namespace neuralsurv::pipeline
