// Licensed under the Apache License 2.0 (see LICENSE file).

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "neuralsurv/neuralsurv.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  ns_string_free(s);
  return out;
}

ns_config* small_config() {
  ns_config* cfg = nullptr;
  REQUIRE(ns_config_create(&cfg) == NS_OK);
  REQUIRE(ns_config_set(cfg, "seed", "3") == NS_OK);
  REQUIRE(ns_config_set(cfg, "grid_size", "16") == NS_OK);
  REQUIRE(ns_config_set(cfg, "hidden", "8") == NS_OK);
  return cfg;
}

ns_dataset* synthetic(size_t n, uint64_t seed) {
  ns_dataset* ds = nullptr;
  REQUIRE(ns_dataset_synthetic(n, seed, &ds) == NS_OK);
  return ds;
}

}  // namespace

TEST_CASE("config through the C interface") {
  ns_config* cfg = nullptr;
  REQUIRE(ns_config_create(&cfg) == NS_OK);
  char* v = nullptr;
  REQUIRE(ns_config_get(cfg, "grid_size", &v) == NS_OK);
  CHECK(take(v) == "64");
  CHECK(ns_config_set(cfg, "rho", "2") == NS_OK);
  REQUIRE(ns_config_get(cfg, "rho", &v) == NS_OK);
  CHECK(std::stod(take(v)) == 2.0);

  CHECK(ns_config_set(cfg, "bogus", "1") == NS_ERR_INPUT);
  CHECK(std::string(ns_last_error()).find("bogus") != std::string::npos);
  CHECK(ns_config_set(cfg, "draws", "lots") == NS_ERR_INPUT);

  char* h = nullptr;
  REQUIRE(ns_config_hash(cfg, &h) == NS_OK);
  CHECK(take(h).size() == 16);
  char* text = nullptr;
  REQUIRE(ns_config_text(cfg, &text) == NS_OK);
  CHECK(take(text).find("rho=2") != std::string::npos);

  std::ofstream("capi_cfg.txt") << "# settings\nseed = 9\n";
  CHECK(ns_config_load(cfg, "capi_cfg.txt") == NS_OK);
  REQUIRE(ns_config_get(cfg, "seed", &v) == NS_OK);
  CHECK(take(v) == "9");
  CHECK(ns_config_load(cfg, "capi_no_such_file.txt") == NS_ERR_INPUT);
  ns_config_free(cfg);
}

TEST_CASE("datasets through the C interface") {
  ns_dataset* ds = synthetic(30, 4);
  CHECK(ns_dataset_size(ds) == 30);
  CHECK(ns_dataset_covariates(ds) == 4);
  CHECK(ns_dataset_events(ds) <= 30);
  CHECK(ns_dataset_max_time(ds) > 0.0);
  REQUIRE(ns_dataset_write_csv(ds, "capi_synth.csv") == NS_OK);

  ns_dataset* back = nullptr;
  REQUIRE(ns_dataset_load_csv("capi_synth.csv", "time", "event", "rest", &back) == NS_OK);
  CHECK(ns_dataset_size(back) == 30);
  CHECK(ns_dataset_events(back) == ns_dataset_events(ds));
  CHECK(ns_dataset_max_time(back) == doctest::Approx(ns_dataset_max_time(ds)).epsilon(1e-9));
  ns_dataset_free(back);
  ns_dataset_free(ds);

  const double X[] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  const double t[] = {1.0, 2.0, 3.0};
  const int e[] = {1, 0, 1};
  ns_dataset* arr = nullptr;
  REQUIRE(ns_dataset_from_arrays(3, 2, X, t, e, &arr) == NS_OK);
  CHECK(ns_dataset_size(arr) == 3);
  CHECK(ns_dataset_covariates(arr) == 2);
  CHECK(ns_dataset_events(arr) == 2);
  ns_dataset_free(arr);

  const int bad_e[] = {1, 2, 1};
  CHECK(ns_dataset_from_arrays(3, 2, X, t, bad_e, &arr) == NS_ERR_INPUT);
  std::ofstream("capi_bad.csv") << "time,event,x\n1,1,oops\n";
  CHECK(ns_dataset_load_csv("capi_bad.csv", "time", "event", "rest", &arr) == NS_ERR_INPUT);
  CHECK(std::strlen(ns_last_error()) > 0);
  CHECK(ns_dataset_load_csv("capi_synth.csv", "T", "event", "rest", &arr) == NS_ERR_INPUT);
}

TEST_CASE("fit, save, load, predict and evaluate") {
  ns_config* cfg = small_config();
  ns_dataset* train = synthetic(25, 1001);
  ns_model* model = nullptr;
  REQUIRE(ns_fit(train, cfg, &model) == NS_OK);
  CHECK(std::string(ns_last_error()).empty());
  CHECK(ns_model_max_time(model) == doctest::Approx(ns_dataset_max_time(train)));

  char* info = nullptr;
  REQUIRE(ns_model_info(model, &info) == NS_OK);
  const auto j = nlohmann::json::parse(take(info));
  CHECK(j["em"]["converged"].get<bool>());
  CHECK(j["cavi"]["converged"].get<bool>());
  CHECK(j["alpha"].get<double>() > 0.0);
  char* trace = nullptr;
  REQUIRE(ns_model_em_trace(model, &trace) == NS_OK);
  CHECK(!take(trace).empty());
  REQUIRE(ns_model_cavi_trace(model, &trace) == NS_OK);
  CHECK(!take(trace).empty());

  REQUIRE(ns_model_save(model, "capi_model.nsck") == NS_OK);
  ns_model* loaded = nullptr;
  REQUIRE(ns_model_load("capi_model.nsck", &loaded) == NS_OK);
  CHECK(ns_model_em_trace(loaded, &trace) == NS_ERR_INPUT);

  ns_dataset* test = synthetic(8, 999);
  const std::vector<double> times{0.0, 10.0, 25.0, 50.0, 80.0};
  ns_survival* s1 = nullptr;
  ns_survival* s2 = nullptr;
  REQUIRE(ns_predict(model, test, times.data(), times.size(), 40, 0.9, 5, &s1) == NS_OK);
  REQUIRE(ns_predict(loaded, test, times.data(), times.size(), 40, 0.9, 5, &s2) == NS_OK);
  CHECK(ns_survival_subjects(s1) == 8);
  CHECK(ns_survival_times(s1) == 5);
  CHECK(ns_survival_draws(s1) == 40);

  std::vector<double> a(40 * 5), b(40 * 5);
  for (size_t i = 0; i < 8; ++i) {
    REQUIRE(ns_survival_samples(s1, i, a.data()) == NS_OK);
    REQUIRE(ns_survival_samples(s2, i, b.data()) == NS_OK);
    CHECK(a == b);
    for (size_t s = 0; s < 40; ++s) {
      CHECK(a[s * 5] == 1.0);
      for (size_t k = 1; k < 5; ++k) CHECK(a[s * 5 + k] <= a[s * 5 + k - 1]);
    }
    std::vector<double> mean(5), med(5), lo(5), hi(5);
    REQUIRE(ns_survival_summary(s1, i, mean.data(), med.data(), lo.data(), hi.data()) == NS_OK);
    for (size_t k = 0; k < 5; ++k) {
      double m = 0.0;
      for (size_t s = 0; s < 40; ++s) m += a[s * 5 + k];
      CHECK(mean[k] == doctest::Approx(m / 40.0).epsilon(1e-12));
      CHECK(lo[k] <= med[k]);
      CHECK(med[k] <= hi[k]);
    }
  }
  CHECK(ns_survival_summary(s1, 8, nullptr, nullptr, nullptr, nullptr) == NS_ERR_INPUT);

  REQUIRE(ns_survival_write_csv(s1, "capi_pred.csv") == NS_OK);
  std::ifstream csv("capi_pred.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "subject,time,mean,median,lo,hi");
  size_t rows = 0;
  while (std::getline(csv, line)) rows += line.empty() ? 0 : 1;
  CHECK(rows == 8 * 5);

  REQUIRE(ns_survival_write_draws(s1, "capi_draws.bin") == NS_OK);
  std::ifstream bin("capi_draws.bin", std::ios::binary | std::ios::ate);
  CHECK(static_cast<size_t>(bin.tellg()) == 8 + 3 * 8 + 5 * 8 + 8 * 40 * 5 * 8);

  CHECK(ns_predict(model, test, times.data(), times.size(), 5, 0.9, 5, &s2) == NS_ERR_INPUT);
  const std::vector<double> backwards{10.0, 5.0};
  ns_survival* s3 = nullptr;
  CHECK(ns_predict(model, test, backwards.data(), 2, 40, 0.9, 5, &s3) == NS_ERR_INPUT);

  char* metrics = nullptr;
  REQUIRE(ns_evaluate(model, test, cfg, 0, &metrics) == NS_OK);
  const auto mj = nlohmann::json::parse(take(metrics));
  for (const char* k : {"c_index", "ipcw_ibs", "n", "n_events", "grid"}) CHECK(mj.contains(k));
  CHECK(mj["n"].get<size_t>() == 8);

  ns_survival_free(s1);
  ns_survival_free(s2);
  ns_dataset_free(test);
  ns_model_free(loaded);
  ns_model_free(model);
  ns_dataset_free(train);
  ns_config_free(cfg);
}

TEST_CASE("selftest through the C interface") {
  char* report = nullptr;
  int passed = 0;
  REQUIRE(ns_selftest(7, 0, &report, &passed) == NS_OK);
  CHECK(passed == 1);
  CHECK(nlohmann::json::parse(take(report)).is_object());
  REQUIRE(ns_selftest(7, NS_SELFTEST_FLIP_JACOBIAN, &report, &passed) == NS_OK);
  CHECK(passed == 0);
  ns_string_free(report);
}

TEST_CASE("null arguments and errors") {
  CHECK(ns_config_create(nullptr) == NS_ERR_INPUT);
  CHECK(std::string(ns_last_error()).find("null") != std::string::npos);
  CHECK(ns_config_set(nullptr, "seed", "1") == NS_ERR_INPUT);
  CHECK(ns_fit(nullptr, nullptr, nullptr) == NS_ERR_INPUT);
  CHECK(ns_model_load("capi_absent.nsck", nullptr) == NS_ERR_INPUT);
  ns_model* m = nullptr;
  CHECK(ns_model_load("capi_absent.nsck", &m) != NS_OK);
  CHECK(m == nullptr);
  CHECK(ns_predict(nullptr, nullptr, nullptr, 0, 40, 0.9, 1, nullptr) == NS_ERR_INPUT);
  CHECK(ns_survival_subjects(nullptr) == 0);
  CHECK(ns_dataset_size(nullptr) == 0);
  CHECK(ns_model_max_time(nullptr) == 0.0);
  CHECK(ns_selftest(7, 0, nullptr, nullptr) == NS_ERR_INPUT);
  ns_config_free(nullptr);
  ns_dataset_free(nullptr);
  ns_model_free(nullptr);
  ns_survival_free(nullptr);
  ns_string_free(nullptr);
  CHECK(std::string(ns_version()).size() > 0);

  ns_config* cfg = nullptr;
  REQUIRE(ns_config_create(&cfg) == NS_OK);
  CHECK(std::string(ns_last_error()).empty());
  ns_config_free(cfg);
}
