// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <string>

#include "pipeline/pipeline.hpp"

namespace neuralsurv::pipeline {

// File layout: 8-byte magic "NSURVCK1", little-endian u64 header length, a
// JSON header (creation time, config hash, architecture, preprocessing and
// scalar state plus the offset/length of every array), then the arrays as
// raw little-endian doubles. Everything after the header is a deterministic
// function of the fitted model.
void save_checkpoint(const FittedModel& fm, const std::string& path);
FittedModel load_checkpoint(const std::string& path);

// The binary body alone (what determinism checks compare).
std::string checkpoint_body(const FittedModel& fm);

}  // namespace neuralsurv::pipeline
