// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cavi/cavi.hpp"
#include "map_em/em.hpp"
#include "model/hazard.hpp"

namespace neuralsurv::pipeline {

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t grid_size = 64;
  std::vector<std::size_t> hidden = {16, 16};
  std::string activation = "relu";
  double alpha0 = 1.0;
  double beta0 = 1.0;
  double rho = 1.0;
  double em_tolerance = 1e-6;
  int em_max_iterations = 500;
  double em_init_scale = 0.01;
  int lbfgs_max_iterations = 100;
  int lbfgs_memory = 10;
  double cavi_tolerance = 1e-6;
  int cavi_max_iterations = 1000;
  std::size_t dense_limit = 5000;
  std::size_t draws = 200;
  double level = 0.9;
  std::size_t eval_grid = 100;
  std::string time_col = "time";
  std::string event_col = "event";
  std::string features = "rest";
  std::size_t threads = 0;

  // Throws InputError for an unknown key or a malformed/out-of-range value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();
  void validate() const;

  // key = value lines; '#' starts a comment.
  void load_text(const std::string& text);
  void load_file(const std::string& path);
  // Canonical "key=value" lines in key order.
  std::string to_text() const;
  // 16 hex digits of FNV-1a over to_text().
  std::string hash() const;

  model::BaselinePrior prior() const { return {alpha0, beta0, rho}; }
  map_em::EmConfig em() const;
  cavi::CaviConfig cavi() const;
};

}  // namespace neuralsurv::pipeline
