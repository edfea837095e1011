// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <string>
#include <vector>

#include "data/dataset.hpp"

namespace neuralsurv::data {

struct CsvSchema {
  std::string time_col = "time";
  std::string event_col = "event";
  // Empty means every remaining column, in file order.
  std::vector<std::string> feature_cols;
};

// Parses a comma list; "rest" or "" yields an empty list (all remaining columns).
std::vector<std::string> parse_feature_list(const std::string& list);

// Reads a numeric CSV with a header row. Rows with a missing value (empty
// cell, NA, NaN) in any used column are dropped. Covariates are returned in
// original units; standardize with FeatureScaling. Throws InputError on a
// missing column, a non-numeric cell, or when no rows remain.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

void write_csv(const Dataset& ds, const std::string& path, const CsvSchema& schema = {});

}  // namespace neuralsurv::data
