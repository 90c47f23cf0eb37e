// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: every tunable of the pipelines in one struct, read from
// a flat `key = value` text file with [section] headers. Absent keys keep
// their defaults.
//
//   # comment
//   seed = 7
//   [train]
//   max_lr = 0.002

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "desmiles/landscape.hpp"
#include "desmiles/net.hpp"
#include "desmiles/search.hpp"
#include "desmiles/train.hpp"
#include "desmiles/transfer.hpp"

namespace desmiles::config {

class UnknownKey : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TypeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int workers = 1;
  net::ModelConfig model;
  train::TrainConfig train;
  search::SearchBudget search;
  transfer::FinetuneConfig finetune;
  transfer::PairOptions pairs;
  landscape::GridOptions landscape;
  landscape::CorrelationOptions correlate;

  /// Copies `seed` into every seeded component and `workers` into the grid.
  void propagate_seed();
  /// Every key with its current value, in the file format; parses back to
  /// an equal configuration.
  std::string to_text() const;
};

/// Throws SyntaxError, UnknownKey or TypeError with the offending line.
RunConfig parse_config(std::string_view text);
/// parse_config on a file; throws std::runtime_error when unreadable.
RunConfig load_config(const std::string& path);

/// Sets one `section.key` (or top-level `key`) from text.
void set_value(RunConfig& config, std::string_view qualified_key, std::string_view value);

}  // namespace desmiles::config
