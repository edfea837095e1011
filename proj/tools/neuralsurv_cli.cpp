// Licensed under the Apache License 2.0 (see LICENSE file).

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "neuralsurv/neuralsurv.h"

namespace {

struct Failure {
  ns_status status;
};

void check(ns_status st, const std::string& what) {
  if (st == NS_OK) return;
  std::cerr << "error: " << what << ": " << ns_last_error() << "\n";
  throw Failure{st};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  ns_string_free(s);
  return out;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) {
    std::cerr << "error: cannot write " << path << "\n";
    throw Failure{NS_ERR_INPUT};
  }
  f << text << "\n";
}

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::size_t threads = 0;
};

using ConfigPtr = std::unique_ptr<ns_config, decltype(&ns_config_free)>;

ConfigPtr make_config(const Common& c) {
  ns_config* raw = nullptr;
  check(ns_config_create(&raw), "config");
  ConfigPtr cfg(raw, ns_config_free);
  if (const char* env = std::getenv("NEURALSURV_SEED")) check(ns_config_set(cfg.get(), "seed", env), "NEURALSURV_SEED");
  if (!c.config_file.empty()) check(ns_config_load(cfg.get(), c.config_file.c_str()), "config file");
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
      throw Failure{NS_ERR_INPUT};
    }
    check(ns_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set " + kv);
  }
  if (c.seed >= 0) check(ns_config_set(cfg.get(), "seed", std::to_string(c.seed).c_str()), "--seed");
  if (c.threads > 0) check(ns_config_set(cfg.get(), "threads", std::to_string(c.threads).c_str()), "--threads");
  char* threads = nullptr;
  check(ns_config_get(cfg.get(), "threads", &threads), "config");
  ns_set_threads(std::stoul(take(threads)));
  return cfg;
}

std::string config_value(const ns_config* cfg, const char* key) {
  char* v = nullptr;
  check(ns_config_get(cfg, key, &v), "config");
  return take(v);
}

using DatasetPtr = std::unique_ptr<ns_dataset, decltype(&ns_dataset_free)>;
using ModelPtr = std::unique_ptr<ns_model, decltype(&ns_model_free)>;

DatasetPtr load_data(const std::string& path, const ns_config* cfg) {
  ns_dataset* ds = nullptr;
  const auto time_col = config_value(cfg, "time_col");
  const auto event_col = config_value(cfg, "event_col");
  const auto features = config_value(cfg, "features");
  check(ns_dataset_load_csv(path.c_str(), time_col.c_str(), event_col.c_str(), features.c_str(), &ds),
        "loading " + path);
  return DatasetPtr(ds, ns_dataset_free);
}

ModelPtr load_model(const std::string& path) {
  ns_model* m = nullptr;
  check(ns_model_load(path.c_str(), &m), "loading " + path);
  return ModelPtr(m, ns_model_free);
}

std::vector<double> parse_times(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      std::cerr << "error: bad time value '" << item << "'\n";
      throw Failure{NS_ERR_INPUT};
    }
  }
  return out;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_file, "key = value configuration file");
  sub->add_option("--set", c.overrides, "Override a configuration key (key=value); repeatable");
  sub->add_option("--seed", c.seed, "Random seed (default: NEURALSURV_SEED or the config value)");
  sub->add_option("--threads", c.threads, "Cap on worker threads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian survival analysis with linearized neural hazards"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "Write a synthetic two-group survival dataset");
  std::size_t synth_n = 100;
  std::string synth_out;
  synth->add_option("-n,--n", synth_n, "Number of subjects")->capture_default_str();
  synth->add_option("-o,--out", synth_out, "Output CSV")->required();
  add_common(synth, common);

  auto* fit = app.add_subcommand("fit", "Fit the model (EM for the MAP estimate, then variational inference)");
  std::string fit_train, fit_out, fit_trace, time_col, event_col, features;
  fit->add_option("-t,--train", fit_train, "Training CSV")->required();
  fit->add_option("-o,--out", fit_out, "Checkpoint path")->required();
  fit->add_option("--trace", fit_trace, "Write EM and CAVI traces as JSON");
  fit->add_option("--time-col", time_col, "Time column name");
  fit->add_option("--event-col", event_col, "Event indicator column name");
  fit->add_option("--features", features, "Comma list of covariate columns or 'rest'");
  add_common(fit, common);

  auto* pred = app.add_subcommand("predict", "Posterior survival curves with credible bands");
  std::string pred_model, pred_data, pred_out, pred_draws_out, pred_times;
  std::size_t pred_grid = 50, pred_draws = 0;
  double pred_level = 0.0;
  pred->add_option("-m,--model", pred_model, "Checkpoint")->required();
  pred->add_option("-d,--data", pred_data, "CSV with the subjects' covariates")->required();
  pred->add_option("-o,--out", pred_out, "Output CSV (subject,time,mean,median,lo,hi)")->required();
  pred->add_option("--draws-out", pred_draws_out, "Binary file with every sampled curve");
  pred->add_option("--times", pred_times, "Comma list of times (original units)");
  pred->add_option("--grid", pred_grid, "Uniform grid size on [0, training max time] when --times is absent")
      ->capture_default_str();
  pred->add_option("--draws", pred_draws, "Posterior draws (default: config)");
  pred->add_option("--level", pred_level, "Credible level in (0,1) (default: config)");
  pred->add_option("--time-col", time_col, "Time column name");
  pred->add_option("--event-col", event_col, "Event indicator column name");
  pred->add_option("--features", features, "Comma list of covariate columns or 'rest'");
  add_common(pred, common);

  auto* ev = app.add_subcommand("eval", "C-index and IPCW integrated Brier score on a test set");
  std::string ev_model, ev_test, ev_out;
  bool constant_half = false;
  ev->add_option("-m,--model", ev_model, "Checkpoint")->required();
  ev->add_option("-t,--test", ev_test, "Test CSV")->required();
  ev->add_option("-o,--out", ev_out, "Metrics JSON (default: stdout)");
  ev->add_flag("--constant-half", constant_half, "Score the constant S = 1/2 predictor instead (debugging)");
  ev->add_option("--time-col", time_col, "Time column name");
  ev->add_option("--event-col", event_col, "Event indicator column name");
  ev->add_option("--features", features, "Comma list of covariate columns or 'rest'");
  add_common(ev, common);

  auto* st = app.add_subcommand("selftest", "Run the built-in numerical checks");
  bool flip = false;
  std::string st_out;
  st->add_flag("--inject-jacobian-flip", flip, "Negate the analytic Jacobian (checks that the test can fail)");
  st->add_option("-o,--out", st_out, "Report JSON (default: stdout)");
  add_common(st, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : NS_ERR_INPUT;
  }

  try {
    auto cfg = make_config(common);
    if (!time_col.empty()) check(ns_config_set(cfg.get(), "time_col", time_col.c_str()), "--time-col");
    if (!event_col.empty()) check(ns_config_set(cfg.get(), "event_col", event_col.c_str()), "--event-col");
    if (!features.empty()) check(ns_config_set(cfg.get(), "features", features.c_str()), "--features");
    const std::uint64_t seed = std::stoull(config_value(cfg.get(), "seed"));

    if (*synth) {
      ns_dataset* raw = nullptr;
      check(ns_dataset_synthetic(synth_n, seed, &raw), "synth");
      DatasetPtr ds(raw, ns_dataset_free);
      check(ns_dataset_write_csv(ds.get(), synth_out.c_str()), "writing " + synth_out);
      std::cerr << "wrote " << ns_dataset_size(ds.get()) << " subjects (" << ns_dataset_events(ds.get())
                << " events) to " << synth_out << "\n";
      return 0;
    }

    if (*fit) {
      auto ds = load_data(fit_train, cfg.get());
      ns_model* raw = nullptr;
      const ns_status rc = ns_fit(ds.get(), cfg.get(), &raw);
      if (rc != NS_OK && rc != NS_ERR_CONVERGENCE) check(rc, "fit");
      ModelPtr model(raw, ns_model_free);
      if (rc == NS_ERR_CONVERGENCE) std::cerr << "warning: " << ns_last_error() << "\n";
      check(ns_model_save(model.get(), fit_out.c_str()), "saving " + fit_out);
      if (!fit_trace.empty()) {
        char *em = nullptr, *cv = nullptr;
        check(ns_model_em_trace(model.get(), &em), "trace");
        check(ns_model_cavi_trace(model.get(), &cv), "trace");
        emit("{\"em\": " + take(em) + ",\n\"cavi\": " + take(cv) + "}", fit_trace);
      }
      char* info = nullptr;
      check(ns_model_info(model.get(), &info), "info");
      std::cerr << take(info) << "\n";
      return rc;
    }

    if (*pred) {
      auto model = load_model(pred_model);
      auto ds = load_data(pred_data, cfg.get());
      std::vector<double> times;
      if (!pred_times.empty()) {
        times = parse_times(pred_times);
      } else {
        const double t_max = ns_model_max_time(model.get());
        if (pred_grid < 2) {
          std::cerr << "error: --grid must be >= 2\n";
          return NS_ERR_INPUT;
        }
        for (std::size_t k = 0; k < pred_grid; ++k)
          times.push_back(t_max * static_cast<double>(k) / static_cast<double>(pred_grid - 1));
      }
      const std::size_t draws = pred_draws ? pred_draws : std::stoul(config_value(cfg.get(), "draws"));
      const double level = pred_level > 0.0 ? pred_level : std::stod(config_value(cfg.get(), "level"));
      ns_survival* raw = nullptr;
      check(ns_predict(model.get(), ds.get(), times.data(), times.size(), draws, level, seed, &raw), "predict");
      std::unique_ptr<ns_survival, decltype(&ns_survival_free)> surv(raw, ns_survival_free);
      check(ns_survival_write_csv(surv.get(), pred_out.c_str()), "writing " + pred_out);
      if (!pred_draws_out.empty())
        check(ns_survival_write_draws(surv.get(), pred_draws_out.c_str()), "writing " + pred_draws_out);
      return 0;
    }

    if (*ev) {
      auto model = load_model(ev_model);
      auto ds = load_data(ev_test, cfg.get());
      char* json = nullptr;
      check(ns_evaluate(model.get(), ds.get(), cfg.get(), constant_half ? 1 : 0, &json), "eval");
      emit(take(json), ev_out);
      return 0;
    }

    if (*st) {
      char* report = nullptr;
      int passed = 0;
      check(ns_selftest(seed, flip ? NS_SELFTEST_FLIP_JACOBIAN : 0u, &report, &passed), "selftest");
      emit(take(report), st_out);
      return passed ? 0 : NS_ERR_NUMERIC;
    }
  } catch (const Failure& f) {
    return f.status;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return NS_ERR_INPUT;
  }
  return 0;
}
