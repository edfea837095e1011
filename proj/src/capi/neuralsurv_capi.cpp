// Licensed under the Apache License 2.0 (see LICENSE file).

#include "neuralsurv/neuralsurv.h"

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <string>

#include "common/errors.hpp"
#include "common/parallel.hpp"
#include "data/csv.hpp"
#include "data/dataset.hpp"
#include "json.hpp"
#include "pipeline/checkpoint.hpp"
#include "pipeline/config.hpp"
#include "pipeline/pipeline.hpp"
#include "pipeline/selftest.hpp"

using namespace neuralsurv;

struct ns_config {
  pipeline::RunConfig cfg;
};
struct ns_dataset {
  data::Dataset ds;
};
struct ns_model {
  pipeline::FittedModel fm;
  std::optional<map_em::EmResult> em;
  std::optional<cavi::CaviResult> cavi;
};
struct ns_survival {
  predict::PosteriorSurvival ps;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
ns_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const InputError& e) {
    g_last_error = e.what();
    return NS_ERR_INPUT;
  } catch (const NumericalError& e) {
    g_last_error = e.what();
    return NS_ERR_NUMERIC;
  } catch (const ConvergenceError& e) {
    g_last_error = e.what();
    return NS_ERR_CONVERGENCE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return NS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NS_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw InputError(std::string(what) + " must not be null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* ns_last_error(void) { return g_last_error.c_str(); }
const char* ns_version(void) { return "0.1.0"; }
void ns_string_free(char* s) { std::free(s); }
void ns_set_threads(size_t n) { set_worker_count(n); }

ns_status ns_config_create(ns_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new ns_config{};
    return NS_OK;
  });
}
void ns_config_free(ns_config* cfg) { delete cfg; }

ns_status ns_config_set(ns_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
    return NS_OK;
  });
}

ns_status ns_config_get(const ns_config* cfg, const char* key, char** out) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(out, "out");
    *out = dup(cfg->cfg.get(key));
    return NS_OK;
  });
}

ns_status ns_config_load(ns_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "config");
    require(path, "path");
    cfg->cfg.load_file(path);
    return NS_OK;
  });
}

ns_status ns_config_text(const ns_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    *out = dup(cfg->cfg.to_text());
    return NS_OK;
  });
}

ns_status ns_config_hash(const ns_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    *out = dup(cfg->cfg.hash());
    return NS_OK;
  });
}

ns_status ns_dataset_load_csv(const char* path, const char* time_col, const char* event_col, const char* features,
                              ns_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    data::CsvSchema schema;
    if (time_col) schema.time_col = time_col;
    if (event_col) schema.event_col = event_col;
    if (features) schema.feature_cols = data::parse_feature_list(features);
    *out = new ns_dataset{data::load_csv(path, schema)};
    return NS_OK;
  });
}

ns_status ns_dataset_synthetic(size_t n, uint64_t seed, ns_dataset** out) {
  return guarded([&] {
    require(out, "out");
    if (n == 0) throw InputError("synthetic: n must be >= 1");
    numkit::RngStream rng(seed);
    *out = new ns_dataset{data::gen_synthetic(n, rng)};
    return NS_OK;
  });
}

ns_status ns_dataset_from_arrays(size_t n, size_t p, const double* X, const double* time, const int* event,
                                 ns_dataset** out) {
  return guarded([&] {
    require(out, "out");
    require(time, "time");
    require(event, "event");
    if (p > 0) require(X, "X");
    data::Dataset ds;
    ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < p; ++j) ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X[i * p + j];
    ds.time.assign(time, time + n);
    ds.event.assign(event, event + n);
    for (size_t j = 0; j < p; ++j) ds.feature_names.push_back("x" + std::to_string(j + 1));
    ds.validate();
    *out = new ns_dataset{std::move(ds)};
    return NS_OK;
  });
}

ns_status ns_dataset_write_csv(const ns_dataset* ds, const char* path) {
  return guarded([&] {
    require(ds, "dataset");
    require(path, "path");
    data::write_csv(ds->ds, path);
    return NS_OK;
  });
}

size_t ns_dataset_size(const ns_dataset* ds) { return ds ? ds->ds.size() : 0; }
size_t ns_dataset_covariates(const ns_dataset* ds) { return ds ? ds->ds.covariate_count() : 0; }
size_t ns_dataset_events(const ns_dataset* ds) { return ds ? ds->ds.event_count() : 0; }
double ns_dataset_max_time(const ns_dataset* ds) { return ds && ds->ds.size() ? ds->ds.max_time() : 0.0; }
void ns_dataset_free(ns_dataset* ds) { delete ds; }

ns_status ns_fit(const ns_dataset* train, const ns_config* cfg, ns_model** out) {
  return guarded([&] {
    require(train, "dataset");
    require(cfg, "config");
    require(out, "out");
    auto res = pipeline::fit(train->ds, cfg->cfg);
    auto* m = new ns_model{std::move(res.model), std::move(res.em), std::move(res.cavi)};
    *out = m;
    if (!m->fm.em_converged || !m->fm.cavi_converged) {
      g_last_error = !m->fm.em_converged ? "EM reached its iteration cap without converging"
                                         : "CAVI reached its iteration cap without converging";
      return NS_ERR_CONVERGENCE;
    }
    return NS_OK;
  });
}

ns_status ns_model_save(const ns_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    pipeline::save_checkpoint(model->fm, path);
    return NS_OK;
  });
}

ns_status ns_model_load(const char* path, ns_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new ns_model{pipeline::load_checkpoint(path), std::nullopt, std::nullopt};
    return NS_OK;
  });
}

ns_status ns_model_info(const ns_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    const auto& fm = model->fm;
    nlohmann::json j;
    j["phi_map"] = fm.phi_map;
    j["alpha"] = fm.posterior.alpha;
    j["beta"] = fm.posterior.beta;
    j["mean_phi"] = fm.posterior.alpha / fm.posterior.beta;
    j["parameters"] = fm.network.parameter_count();
    j["layer_sizes"] = fm.network.layer_sizes();
    j["t_max"] = fm.t_max;
    j["em"] = {{"iterations", fm.em_iterations}, {"converged", fm.em_converged}};
    j["cavi"] = {{"iterations", fm.cavi_iterations}, {"converged", fm.cavi_converged}};
    j["config_hash"] = fm.config_hash;
    *out = dup(j.dump(2));
    return NS_OK;
  });
}

ns_status ns_model_em_trace(const ns_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    if (!model->em) throw InputError("EM trace is only available for a freshly fitted model");
    *out = dup(map_em::trace_json(*model->em));
    return NS_OK;
  });
}

ns_status ns_model_cavi_trace(const ns_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    if (!model->cavi) throw InputError("CAVI trace is only available for a freshly fitted model");
    *out = dup(cavi::trace_json(*model->cavi));
    return NS_OK;
  });
}

double ns_model_max_time(const ns_model* model) { return model ? model->fm.t_max : 0.0; }
void ns_model_free(ns_model* model) { delete model; }

ns_status ns_predict(const ns_model* model, const ns_dataset* ds, const double* times, size_t n_times, size_t draws,
                     double level, uint64_t seed, ns_survival** out) {
  return guarded([&] {
    require(model, "model");
    require(ds, "dataset");
    require(times, "times");
    require(out, "out");
    if (draws < 20) throw InputError("predict: need at least 20 draws for credible bands");
    const std::vector<double> t(times, times + n_times);
    *out = new ns_survival{pipeline::predict_survival(model->fm, ds->ds.X, t, draws, level, seed)};
    return NS_OK;
  });
}

size_t ns_survival_subjects(const ns_survival* s) { return s ? s->ps.subject_count() : 0; }
size_t ns_survival_times(const ns_survival* s) { return s ? s->ps.times.size() : 0; }
size_t ns_survival_draws(const ns_survival* s) {
  return s && !s->ps.draws.empty() ? static_cast<size_t>(s->ps.draws.front().rows()) : 0;
}

ns_status ns_survival_summary(const ns_survival* s, size_t subject, double* mean, double* median, double* lo,
                              double* hi) {
  return guarded([&] {
    require(s, "survival");
    if (subject >= s->ps.subject_count()) throw InputError("survival: subject index out of range");
    const auto& sm = s->ps.summary[subject];
    const auto T = static_cast<Eigen::Index>(s->ps.times.size());
    if (mean) Eigen::VectorXd::Map(mean, T) = sm.mean;
    if (median) Eigen::VectorXd::Map(median, T) = sm.median;
    if (lo) Eigen::VectorXd::Map(lo, T) = sm.lo;
    if (hi) Eigen::VectorXd::Map(hi, T) = sm.hi;
    return NS_OK;
  });
}

ns_status ns_survival_samples(const ns_survival* s, size_t subject, double* out) {
  return guarded([&] {
    require(s, "survival");
    require(out, "out");
    if (subject >= s->ps.subject_count()) throw InputError("survival: subject index out of range");
    const auto& d = s->ps.draws[subject];
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out, d.rows(), d.cols()) = d;
    return NS_OK;
  });
}

ns_status ns_survival_write_csv(const ns_survival* s, const char* path) {
  return guarded([&] {
    require(s, "survival");
    require(path, "path");
    std::ofstream f(path);
    if (!f) throw InputError(std::string("cannot write ") + path);
    f << std::setprecision(10) << "subject,time,mean,median,lo,hi\n";
    for (size_t i = 0; i < s->ps.subject_count(); ++i) {
      const auto& sm = s->ps.summary[i];
      for (size_t k = 0; k < s->ps.times.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        f << i << ',' << s->ps.times[k] << ',' << sm.mean[kk] << ',' << sm.median[kk] << ',' << sm.lo[kk] << ','
          << sm.hi[kk] << '\n';
      }
    }
    if (!f) throw InputError(std::string("write failed for ") + path);
    return NS_OK;
  });
}

ns_status ns_survival_write_draws(const ns_survival* s, const char* path) {
  return guarded([&] {
    require(s, "survival");
    require(path, "path");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError(std::string("cannot write ") + path);
    auto put_u64 = [&](std::uint64_t v) {
      unsigned char b[8];
      for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xff);
      f.write(reinterpret_cast<const char*>(b), 8);
    };
    auto put_d = [&](double d) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, 8);
      put_u64(bits);
    };
    f.write("NSDRAWS1", 8);
    put_u64(s->ps.subject_count());
    put_u64(ns_survival_draws(s));
    put_u64(s->ps.times.size());
    for (double t : s->ps.times) put_d(t);
    for (const auto& d : s->ps.draws)
      for (Eigen::Index r = 0; r < d.rows(); ++r)
        for (Eigen::Index c = 0; c < d.cols(); ++c) put_d(d(r, c));
    if (!f) throw InputError(std::string("write failed for ") + path);
    return NS_OK;
  });
}

void ns_survival_free(ns_survival* s) { delete s; }

ns_status ns_evaluate(const ns_model* model, const ns_dataset* test, const ns_config* cfg, int constant_half,
                      char** out) {
  return guarded([&] {
    require(model, "model");
    require(test, "dataset");
    require(cfg, "config");
    require(out, "out");
    *out = dup(pipeline::evaluate(model->fm, test->ds, cfg->cfg, constant_half != 0).to_json());
    return NS_OK;
  });
}

ns_status ns_selftest(uint64_t seed, unsigned flags, char** report, int* passed) {
  return guarded([&] {
    require(report, "report");
    pipeline::SelftestOptions opt;
    opt.seed = seed;
    opt.inject_jacobian_sign_flip = (flags & NS_SELFTEST_FLIP_JACOBIAN) != 0;
    const auto rep = pipeline::run_selftest(opt);
    *report = dup(rep.to_json());
    if (passed) *passed = rep.all_passed() ? 1 : 0;
    return NS_OK;
  });
}

}  // extern "C"
