// SPDX-License-Identifier: Apache-2.0
//
// Regenerating a molecule from its fingerprint: a molecule counts as
// recovered when a generated molecule's 4096-bit input fingerprint equals
// the query's exactly.

#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include "desmiles/chem.hpp"
#include "desmiles/net.hpp"
#include "desmiles/search.hpp"

namespace desmiles::recovery {

struct RecoveryResult {
  std::string query;
  bool found = false;
  /// 1-based position in the stream of valid, distinct molecules.
  std::optional<std::size_t> rank;
  std::size_t branches_used = 0;
  std::size_t leaves_emitted = 0;
  std::optional<std::string> matched_smiles;
  /// The match is the query molecule itself, not only a fingerprint twin.
  bool graph_exact = false;
};

RecoveryResult recover_one(const net::Network<float>& model, const tokenizer::Vocabulary& vocab,
                           const chem::MolecularGraph& g, const search::SearchBudget& budget);

enum class Decoder { AStar, Beam, Sample };

struct DecoderChoice {
  Decoder kind = Decoder::AStar;
  std::size_t width = 10;     // beam width
  std::size_t tries = 100;    // samples
  std::uint64_t seed = 1;
};

/// Recovery with an arbitrary decoder. Beam and sampling report no branch
/// counts; their rank is the position in the sorted result list.
RecoveryResult recover_with(const net::Network<float>& model, const tokenizer::Vocabulary& vocab,
                            const chem::MolecularGraph& g, const DecoderChoice& decoder,
                            const search::SearchBudget& budget);

struct RecoveryMetrics {
  std::size_t count = 0;
  std::size_t found = 0;
  std::size_t graph_exact = 0;
  /// found / count; absent for an empty dataset.
  std::optional<double> rate;
  std::optional<double> graph_exact_rate;
  /// Branch percentiles over recovered molecules (A* only).
  double branches_p50 = 0, branches_p75 = 0, branches_p90 = 0;
  std::map<std::size_t, std::size_t> rank_histogram;

  std::string summary_json() const;
};

RecoveryMetrics summarize(std::span<const RecoveryResult> results);

/// recover_with over every SMILES of `dataset`; one JSON line per molecule
/// goes to `jsonl` when given.
RecoveryMetrics evaluate_recovery(const net::Network<float>& model, const tokenizer::Vocabulary& vocab,
                                  std::span<const std::string> dataset, const search::SearchBudget& budget,
                                  const DecoderChoice& decoder = {}, std::ostream* jsonl = nullptr);

std::string to_json_line(const RecoveryResult& r);

}  // namespace desmiles::recovery
